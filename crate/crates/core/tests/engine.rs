//! Execution harness and enhancer behavior under the real engine.

use sketchprobe::enhancer::{self, strip_instrumentation_lines, GLOBAL_ERROR_MARKER};
use sketchprobe::exec::{self, Engine, EngineConfig, ExecCache, ExecError, TIMEOUT_STATUS};

const FIG1_FILLED: &str = "let x = 10;\nlet y = 20;\nlet text = \"x*y\";\nconsole.log(x)\nconsole.log(text)\nlet result = eval(text);\nconsole.log(result + x);\nconsole.log(text + y);\n";

fn engine(timeout_s: f64) -> Engine {
    Engine::new(EngineConfig {
        timeout_s,
        ..Default::default()
    })
    .with_cache(ExecCache::shared())
}

#[test]
fn figure_one_ground_output() {
    let r = engine(10.0).execute_source(FIG1_FILLED).unwrap();
    // frozen from one reference run (node 20); Fig. 1 has no `console.log(result)`
    assert_eq!(r.stdout_lines, ["10", "x*y", "210", "x*y20"]);
    assert_eq!(r.exit_status, 0);
    assert!(r.error.is_none());
    assert!(r.peak_rss_kb > 0.0);
}

#[test]
fn renamed_eval_program_raises_reference_error() {
    // what a renaming obfuscator makes of Fig. 1: eval text still names `x`
    let src = "let a = 10;\nlet b = 20;\nlet c = \"x*y\";\nconsole.log(a);\nconsole.log(c);\nlet d = eval(c);\n";
    let r = engine(10.0).execute_source(src).unwrap();
    let e = r.error.unwrap();
    assert_eq!(e.error_type, "ReferenceError");
    assert!(e.message.contains("x is not defined"));
    assert_eq!(r.exit_status, 1);
}

#[test]
fn infinite_loop_times_out() {
    let r = Engine::new(EngineConfig {
        timeout_s: 2.0,
        ..Default::default()
    })
    .execute_source("console.log('start'); while(true){}")
    .unwrap();
    assert!(r.timed_out);
    assert_eq!(r.exit_status, TIMEOUT_STATUS);
    assert!(r.wall_ms >= 2000.0 && r.wall_ms < 6000.0, "{}", r.wall_ms);
}

#[test]
fn missing_engine_is_an_error() {
    let e = Engine::new(EngineConfig {
        cmd: vec!["definitely-not-an-engine-xyz".into()],
        ..Default::default()
    });
    assert!(matches!(e.execute_source("1"), Err(ExecError::EngineNotFound(_))));
}

#[test]
fn global_catch_reports_and_exits_one() {
    let q = enhancer::enhance("console.log('before'); throw new Error('boom');").unwrap();
    let r = engine(10.0).execute_source(&q.source_text).unwrap();
    assert_eq!(r.exit_status, 1);
    assert!(r.stdout_lines.iter().any(|l| l == GLOBAL_ERROR_MARKER));
    assert!(r.stdout_lines.iter().any(|l| l.contains("boom")));
    let e = r.error.unwrap();
    assert_eq!((e.error_type.as_str(), e.message.as_str()), ("Error", "boom"));
}

#[test]
fn enhanced_output_filters_back_to_direct_output() {
    let programs = [
        FIG1_FILLED,
        "function f(a, b) { if (a > b) { return a - b; } return b - a; }\nconsole.log(f(3, 9));\nfor (let i = 0; i < 3; i++) { console.log(i * 2); }",
        "class P { constructor(v) { this.v = v; } get d() { return this.v * 2; } }\nconst p = new P(4);\nconsole.log(p.d, [1, 2].map(x => x + p.v));",
        "let o = { a: [1, { b: 'q' }], n: null }; o.self = o; { let z = -0; console.log(Object.is(z, -0)); }",
    ];
    let e = engine(10.0);
    for src in programs {
        let direct = e.execute_source(src).unwrap();
        let q = enhancer::enhance(src).unwrap();
        let enhanced = e.execute_source(&q.source_text).unwrap();
        assert_eq!(enhanced.exit_status, direct.exit_status, "{src}");
        let filtered = strip_instrumentation_lines(&(enhanced.stdout_lines.join("\n") + "\n"));
        let direct_text = if direct.stdout_lines.is_empty() {
            String::new()
        } else {
            direct.stdout_lines.join("\n") + "\n"
        };
        assert_eq!(filtered, direct_text, "{}", q.source_text);
        // checksums are stable across runs
        let again = Engine::new(EngineConfig::default()).execute_source(&q.source_text).unwrap();
        assert_eq!(exec::normalize(&again), exec::normalize(&enhanced));
    }
}

#[test]
fn checksum_serialization() {
    let src = "let n = -0; let s = 'a\"b'; let arr = [1, , 3]; let o = { k: { d: { e: { f: 1 } } } }; let big = 10n; function g() {}\n{ let inner = undefined; }";
    let q = enhancer::enhance(src).unwrap();
    let r = engine(10.0).execute_source(&q.source_text).unwrap();
    let line = r
        .stdout_lines
        .iter()
        .find(|l| l.starts_with(" --- Checksum for Block@2:0"))
        .unwrap();
    assert_eq!(
        line,
        " --- Checksum for Block@2:0 --- n: -0, s: \"a\\\"b\", arr: [1, <empty>, 3], o: {k: {d: {e: [Object]}}}, big: 10n, g: [function g], inner: undefined"
    );
}

#[test]
fn tdz_reads_are_reported_not_thrown() {
    let src = "{ console.log('in'); }\nlet late = 1;";
    let q = enhancer::enhance(src).unwrap();
    let r = engine(10.0).execute_source(&q.source_text).unwrap();
    assert_eq!(r.exit_status, 0);
    assert!(r.stdout_lines.iter().any(|l| l.ends_with("--- ")), "{:?}", r.stdout_lines);
    let src = "f();\nlet late = 1;\nfunction f() { let k = 1; }";
    let q = enhancer::enhance(src).unwrap();
    let r = engine(10.0).execute_source(&q.source_text).unwrap();
    assert_eq!(r.exit_status, 0);
    assert!(
        r.stdout_lines.iter().any(|l| l.ends_with("late: <tdz>, f: [function f], k: 1")),
        "{:?}",
        r.stdout_lines
    );
}

#[test]
fn parallel_execution_preserves_order() {
    let srcs: Vec<String> = (0..6).map(|i| format!("console.log({i} * 7)")).collect();
    let rs = engine(10.0).execute_many(&srcs, 3);
    for (i, r) in rs.into_iter().enumerate() {
        assert_eq!(r.unwrap().stdout_lines, vec![(i * 7).to_string()]);
    }
}

#[test]
fn measure_averages_and_sizes() {
    let e = Engine::new(EngineConfig::default());
    let one = e.measure_source("console.log(1)", 1).unwrap();
    assert_eq!(one.file_size_bytes, 14);
    assert!(one.avg_wall_ms > 0.0 && one.avg_peak_rss_kb > 0.0);
    let empty = e.measure_source("", 2).unwrap();
    assert_eq!(empty.file_size_bytes, 0);
}

#[test]
fn golden_enhancement() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/golden/");
    let read = |f: &str| std::fs::read_to_string(format!("{dir}{f}")).unwrap();
    let q = enhancer::enhance(&read("enhance_input.js")).unwrap();
    assert_eq!(q.source_text, read("enhance_output.js"));
    let r = engine(10.0).execute_source(&q.source_text).unwrap();
    assert_eq!(r.stdout_lines.join("\n") + "\n", read("enhance_stdout.txt"));
    // loops and calls trace their blocks; function blocks end in `return`,
    // so only the loop body reaches its exit log
    assert_eq!(r.stdout_lines.iter().filter(|l| l.starts_with("<- Exiting")).count(), 2);
}
