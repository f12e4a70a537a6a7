//! End-to-end campaigns with builtin stub tools and recorded LLM sources.

use std::path::{Path, PathBuf};

use sketchprobe::campaign::{report, run_campaign, CampaignConfig, CampaignSummary, Only, ReportFormat};
use sketchprobe::mr::MrId;
use sketchprobe::store::ResultStore;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Campaign directory with a few handwritten sketches and a config file.
fn setup(extra: &str) -> (tempfile::TempDir, CampaignConfig) {
    let dir = tempfile::tempdir().unwrap();
    let sketches = dir.path().join("sketches");
    std::fs::create_dir(&sketches).unwrap();
    for f in ["01_figure_one.js", "07_closure_counter.js", "11_try_catch.js"] {
        std::fs::copy(fixtures().join("sketches").join(f), sketches.join(f)).unwrap();
    }
    let toml = format!(
        r#"
output_root = "out"
seed = 11
repeat = 1
parallelism = 1
mrs = ["algebraic", "control_flow", "dead_code"]

[fill]
rng_seed = 0
int_range = [-50, 50]
float_range = [-10.0, 10.0]
float_probability = 0.3
instances_per_sketch = 2

[engine]
cmd = ["node"]
timeout_s = 10.0

[[sources.handwritten]]
path = "sketches"

[[sources.llm]]
count = 4
[sources.llm.provider]
id = "recorded"
kind = "transcript"
model = "gpt-5"
transcript = "{}"

[[matrix]]
tool = "identity"
preset = "default"

[[matrix]]
tool = "flip_plus"
preset = "default"

[[matrix]]
tool = "swallow_errors"
preset = "default"
{extra}
"#,
        fixtures().join("transcripts/campaign_gen.json").display()
    );
    let path = dir.path().join("campaign.toml");
    std::fs::write(&path, toml).unwrap();
    let cfg = CampaignConfig::load(&path).unwrap();
    (dir, cfg)
}

fn count(s: &CampaignSummary, tool: &str, oracle: &str, pass: Option<bool>) -> usize {
    s.counts
        .iter()
        .filter(|r| r.tool == tool && r.oracle == oracle)
        .filter(|r| pass.is_none_or(|p| (r.category == "pass") == p))
        .map(|r| r.count)
        .sum()
}

#[test]
fn campaign_accounts_and_resumes() {
    let (dir, cfg) = setup("");
    let s = run_campaign(&cfg).unwrap();
    assert_eq!(s.sketches, 7);
    assert_eq!(s.valid_sketches, 7);
    assert_eq!(s.programs, 14);
    assert_eq!(s.errors, 0, "{s:#?}");
    assert_eq!(s.ground_executions, s.programs);
    // every (program, config) pair yields a variant or an obfuscation error
    assert_eq!(s.variants + s.obfuscation_errors, s.programs * 3);
    for tool in ["identity", "flip_plus", "swallow_errors"] {
        assert_eq!(count(&s, tool, "differential", None), s.programs, "{tool}");
    }
    assert_eq!(s.verdicts, s.counts.iter().map(|r| r.count).sum::<usize>());
    assert_eq!(
        s.failures,
        s.counts.iter().filter(|r| r.category != "pass").map(|r| r.count).sum::<usize>()
    );
    assert!(s.metamorphic_programs > 0);
    assert_eq!(count(&s, "identity", "metamorphic", None), s.metamorphic_programs);
    // the identity transform never fails either oracle
    assert_eq!(count(&s, "identity", "differential", Some(false)), 0);
    assert_eq!(count(&s, "identity", "metamorphic", Some(false)), 0);
    assert!(count(&s, "flip_plus", "differential", Some(false)) > 0);
    assert!(s.reports.iter().any(|r| r.tool == "flip_plus"));
    assert!(s.reports.iter().all(|r| r.tool != "identity"));

    let root = dir.path().join("out");
    let store = ResultStore::open(&root).unwrap();
    store.check_integrity().unwrap();
    let before = store.counts();
    assert!(root.join("responses").read_dir().unwrap().count() == 1);

    // a second run finds everything in the store
    let again = run_campaign(&cfg).unwrap();
    assert_eq!(again, s);
    let store = ResultStore::open(&root).unwrap();
    assert_eq!(store.counts(), before);

    let json: CampaignSummary = serde_json::from_str(&report(&store, ReportFormat::Json)).unwrap();
    assert_eq!(json.verdicts, s.verdicts);
    assert_eq!(json.reports, s.reports);
}

#[test]
fn empty_matrix_runs_ground_only() {
    let (_dir, mut cfg) = setup("");
    cfg.matrix.clear();
    let s = run_campaign(&cfg).unwrap();
    assert_eq!(s.programs, 14);
    assert_eq!(s.ground_executions, 14);
    assert_eq!((s.variants, s.verdicts, s.failures), (0, 0, 0));
    assert!(s.reports.is_empty());
}

#[test]
fn only_mr_skips_differential_verdicts() {
    let (_dir, mut cfg) = setup("");
    cfg.only = Some(Only::Mr);
    cfg.sources.llm.clear();
    cfg.matrix.truncate(2);
    cfg.mrs = vec![MrId::DeadCode];
    let s = run_campaign(&cfg).unwrap();
    assert_eq!(s.programs, 6);
    assert!(s.verdicts > 0);
    assert!(s.counts.iter().all(|r| r.oracle == "metamorphic"), "{:?}", s.counts);
}

#[test]
fn feedback_round_adds_refined_sketches() {
    let extra = format!(
        r#"
[feedback]
enabled = true
rounds = 1
sketches_per_brief = 3

[feedback.analysis_provider]
id = "analyst"
kind = "transcript"
transcript = "{}"

[feedback.refine_provider]
id = "refiner"
kind = "transcript"
transcript = "{}"
"#,
        fixtures().join("transcripts/analysis_eval.json").display(),
        fixtures().join("transcripts/refine_eval.json").display()
    );
    let (dir, mut cfg) = setup(&extra);
    cfg.sources.handwritten.clear();
    cfg.mrs.clear();
    cfg.matrix.remove(2);
    let s = run_campaign(&cfg).unwrap();
    let store = ResultStore::open(&dir.path().join("out")).unwrap();
    let refined: Vec<_> = store.sketches().filter(|k| k.round == 1).collect();
    assert!(!refined.is_empty());
    assert!(refined.iter().all(|k| k.source == "feedback:refiner" && k.valid));
    let texts: Vec<String> = refined.iter().map(|k| store.artifact(&k.id).unwrap()).collect();
    assert!(texts.iter().all(|t| t.contains("eval(")));
    assert!(store.verdicts().any(|v| v.round == 1));
    assert_eq!(s.sketches, 4 + refined.len());
    // rerun replays the stored round instead of asking again
    assert_eq!(run_campaign(&cfg).unwrap(), s);
    store.check_integrity().unwrap();
}

#[test]
fn readme_config_parses_and_validates() {
    let readme = include_str!("../../../README.md");
    let block = readme.split("```toml\n").nth(1).unwrap().split("```").next().unwrap();
    let dir = tempfile::tempdir().unwrap();
    for d in ["sketches", "corpus"] {
        std::fs::create_dir(dir.path().join(d)).unwrap();
    }
    let path = dir.path().join("campaign.toml");
    std::fs::write(&path, block).unwrap();
    let cfg = CampaignConfig::load(&path).unwrap();
    assert_eq!(cfg.sources.corpus[0].sample, Some(50));
    assert_eq!(cfg.output_root, dir.path().join("out"));
    let matrix = cfg.validate().unwrap();
    assert_eq!(matrix.len(), 1);
}
