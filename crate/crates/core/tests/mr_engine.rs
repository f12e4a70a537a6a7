//! Metamorphic relations keep direct execution results unchanged.

use sketchprobe::exec::{self, Engine, EngineConfig, ExecCache};
use sketchprobe::filler::{fill, FillConfig};
use sketchprobe::mr::{apply_mr, Direction, MetamorphicRelation, MrId};
use sketchprobe::sketch::parse_sketch;

#[test]
fn inject_and_remove_preserve_results_on_handwritten_fills() {
    let engine = Engine::new(EngineConfig::default()).with_cache(ExecCache::shared());
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/sketches");
    let mut files: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    let mut checked = 0;
    for (i, f) in files.iter().enumerate().step_by(4) {
        let s = parse_sketch(&std::fs::read_to_string(f).unwrap()).unwrap();
        let cfg = FillConfig {
            rng_seed: i as u64,
            instances_per_sketch: 1,
            ..Default::default()
        };
        let p = fill(&s, &cfg).unwrap().remove(0).source_text;
        let base = exec::normalize(&engine.execute_source(&p).unwrap());
        for id in MrId::ALL {
            let injected = apply_mr(&p, MetamorphicRelation::injecting(id, 3)).unwrap();
            let removed = apply_mr(&injected.source_text, MetamorphicRelation::new(id, Direction::Remove, 3)).unwrap();
            for text in [&injected.source_text, &removed.source_text] {
                let r = exec::normalize(&engine.execute_source(text).unwrap());
                assert_eq!(r, base, "{} on {}:\n{text}", id.label(), f.display());
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 66);
}
