//! Verdicts over normalized execution results, and bug-report dedupe.
//!
//! A comparison checks, in order: termination (both timed out is a pass),
//! exceptions (type and message, exact), stdout lines, exit status.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::enhancer::{self, BLOCK_ENTER, BLOCK_EXIT, CHECKSUM, FN_ENTER, GLOBAL_ERROR_MARKER};
use crate::exec::NormalizedResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailCategory {
    StdoutMismatch,
    ExceptionMismatch,
    SilentFix,
    SuppressedError,
    TerminationMismatch,
    ObfuscationError,
}

impl FailCategory {
    pub const ALL: [FailCategory; 6] = [
        FailCategory::StdoutMismatch,
        FailCategory::ExceptionMismatch,
        FailCategory::SilentFix,
        FailCategory::SuppressedError,
        FailCategory::TerminationMismatch,
        FailCategory::ObfuscationError,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FailCategory::StdoutMismatch => "stdout_mismatch",
            FailCategory::ExceptionMismatch => "exception_mismatch",
            FailCategory::SilentFix => "silent_fix",
            FailCategory::SuppressedError => "suppressed_error",
            FailCategory::TerminationMismatch => "termination_mismatch",
            FailCategory::ObfuscationError => "obfuscation_error",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Differential,
    Metamorphic,
}

/// First differing stdout line. `None` on a side means the line is absent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Divergence {
    pub line: usize,
    pub expected: Option<String>,
    pub actual: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VerdictContext {
    /// Program compared against (ground truth or O(P)).
    pub program_id: String,
    /// The variant's id (obfuscated program, or O(Pi)).
    pub variant_id: String,
    pub tool: String,
    pub preset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mr: Option<String>,
    /// Stored program the variant was obfuscated from, when it is not
    /// `program_id` (the follow-up program Pi of a metamorphic verdict).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_program: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub oracle: OracleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<FailCategory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_divergence: Option<Divergence>,
    /// Dedupe shape, filled on failures.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub shape: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(default)]
    pub nondeterministic: bool,
    pub context: VerdictContext,
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        self.kind == VerdictKind::Pass
    }

    fn pass(oracle: OracleKind, context: VerdictContext) -> Self {
        Verdict {
            kind: VerdictKind::Pass,
            oracle,
            category: None,
            first_divergence: None,
            shape: String::new(),
            detail: None,
            nondeterministic: false,
            context,
        }
    }

    fn fail(oracle: OracleKind, context: VerdictContext, category: FailCategory, shape: String) -> Self {
        Verdict {
            kind: VerdictKind::Fail,
            category: Some(category),
            shape,
            ..Self::pass(oracle, context)
        }
    }

    /// The tool rejected or crashed on a valid input.
    pub fn obfuscation_error(context: VerdictContext, message: &str) -> Self {
        let mut v = Self::fail(
            OracleKind::Differential,
            context,
            FailCategory::ObfuscationError,
            error_shape(message),
        );
        v.detail = Some(message.to_string());
        v
    }
}

/// Tool messages with positions and numbers blanked.
fn error_shape(message: &str) -> String {
    let first = message.lines().next().unwrap_or("").trim();
    let mut out = String::with_capacity(first.len());
    let mut prev_digit = false;
    for c in first.chars() {
        if c.is_ascii_digit() {
            if !prev_digit {
                out.push('#');
            }
            prev_digit = true;
        } else {
            out.push(c);
            prev_digit = false;
        }
    }
    out
}

fn error_type(r: &NormalizedResult) -> &str {
    r.error.as_ref().map(|e| e.error_type.as_str()).unwrap_or("none")
}

/// Kind of a stdout line, used as divergence shape.
pub fn line_kind(line: Option<&str>) -> &'static str {
    match line {
        None => "missing",
        Some(l) if l.starts_with(BLOCK_ENTER) || l.starts_with(BLOCK_EXIT) => "block",
        Some(l) if l.starts_with(CHECKSUM) => "checksum",
        Some(l) if l.starts_with(FN_ENTER) => "function",
        Some(l) if l == GLOBAL_ERROR_MARKER => "global_error",
        Some(_) => "plain",
    }
}

pub fn first_divergence(expected: &[String], actual: &[String]) -> Option<Divergence> {
    let n = expected.len().max(actual.len());
    (0..n)
        .find(|&i| expected.get(i) != actual.get(i))
        .map(|i| Divergence {
            line: i,
            expected: expected.get(i).cloned(),
            actual: actual.get(i).cloned(),
        })
}

fn compare(oracle: OracleKind, a: &NormalizedResult, b: &NormalizedResult, ctx: VerdictContext) -> Verdict {
    use FailCategory::*;
    if a.timed_out && b.timed_out {
        return Verdict::pass(oracle, ctx);
    }
    if a.timed_out != b.timed_out {
        let side = if a.timed_out { "expected_timeout" } else { "actual_timeout" };
        return Verdict::fail(oracle, ctx, TerminationMismatch, side.into());
    }
    let mut v = match (&a.error, &b.error) {
        (Some(e), None) => {
            let cat = if b.exit_status == 0 { SilentFix } else { SuppressedError };
            Some(Verdict::fail(oracle, ctx.clone(), cat, e.error_type.clone()))
        }
        (None, Some(_)) => Some(Verdict::fail(oracle, ctx.clone(), ExceptionMismatch, format!("none->{}", error_type(b)))),
        (Some(e1), Some(e2)) if e1 != e2 => Some(Verdict::fail(
            oracle,
            ctx.clone(),
            ExceptionMismatch,
            format!("{}->{}", e1.error_type, e2.error_type),
        )),
        _ => None,
    };
    let div = first_divergence(&a.stdout_lines, &b.stdout_lines);
    if v.is_none() {
        if let Some(d) = &div {
            // a line dropped or added is told apart from a line that changed
            let shape = match (&d.expected, &d.actual) {
                (Some(e), Some(_)) => line_kind(Some(e)),
                (Some(_), None) => "missing",
                (None, _) => "extra",
            };
            v = Some(Verdict::fail(oracle, ctx.clone(), StdoutMismatch, shape.into()));
        } else if a.exit_status != b.exit_status {
            v = Some(Verdict::fail(oracle, ctx.clone(), TerminationMismatch, "exit_status".into()));
        }
    }
    match v {
        Some(mut v) => {
            v.first_divergence = div;
            v
        }
        None => Verdict::pass(oracle, ctx),
    }
}

/// Original program as ground truth against an obfuscated variant.
pub fn compare_differential(ground: &NormalizedResult, variant: &NormalizedResult, ctx: VerdictContext) -> Verdict {
    compare(OracleKind::Differential, ground, variant, ctx)
}

/// O(P) against O(Pi). Tracing lines are dropped first: P and Pi differ in
/// block structure, so their traces legitimately differ.
pub fn compare_metamorphic(obf_p: &NormalizedResult, obf_pi: &NormalizedResult, ctx: VerdictContext) -> Verdict {
    compare(OracleKind::Metamorphic, &untraced(obf_p), &untraced(obf_pi), ctx)
}

fn untraced(r: &NormalizedResult) -> NormalizedResult {
    let mut r = r.clone();
    r.stdout_lines.retain(|l| !enhancer::INSTRUMENTATION_PREFIXES.iter().any(|p| l.starts_with(p)));
    r
}

/// Strict-majority result of repeated runs.
pub fn majority(runs: &[NormalizedResult]) -> Option<&NormalizedResult> {
    let mut counts: Vec<(&NormalizedResult, usize)> = Vec::new();
    for r in runs {
        match counts.iter_mut().find(|(c, _)| *c == r) {
            Some((_, n)) => *n += 1,
            None => counts.push((r, 1)),
        }
    }
    counts.into_iter().find(|(_, n)| 2 * n > runs.len()).map(|(r, _)| r)
}

/// Differential verdict over repeated runs of each side. Without a majority
/// on either side the verdict is flagged nondeterministic.
pub fn compare_repeated(ground: &[NormalizedResult], variant: &[NormalizedResult], ctx: VerdictContext) -> Verdict {
    assert!(!ground.is_empty() && !variant.is_empty(), "at least one run per side");
    match (majority(ground), majority(variant)) {
        (Some(g), Some(v)) => compare_differential(g, v, ctx),
        _ => {
            let mut v = compare_differential(&ground[0], &variant[0], ctx);
            v.nondeterministic = true;
            v
        }
    }
}

/// What a fingerprint is made of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FingerprintPolicy {
    pub shape: bool,
    pub preset: bool,
    pub oracle: bool,
}

impl Default for FingerprintPolicy {
    fn default() -> Self {
        FingerprintPolicy {
            shape: true,
            preset: true,
            oracle: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugReport {
    pub fingerprint: String,
    pub category: FailCategory,
    pub shape: String,
    pub tool: String,
    pub preset: String,
    /// Lexicographically smallest program id in the group.
    pub exemplar_program: String,
    pub exemplar_variant: String,
    pub occurrences: usize,
    pub reproduction: String,
}

pub fn fingerprint(v: &Verdict, policy: FingerprintPolicy) -> Option<String> {
    let cat = v.category?;
    let mut parts = vec![cat.label().to_string(), v.context.tool.clone()];
    if policy.preset {
        parts.push(v.context.preset.clone());
    }
    if policy.shape {
        parts.push(v.shape.clone());
    }
    if policy.oracle {
        parts.push(match v.oracle {
            OracleKind::Differential => "diff".into(),
            OracleKind::Metamorphic => "mr".into(),
        });
    }
    Some(parts.join("|"))
}

pub fn reproduction_command(v: &Verdict) -> String {
    let c = &v.context;
    let obf = |input: &str, out: &str| {
        format!(
            "sketchprobe obfuscate --tool {} --preset {} --in artifacts/{input}.js --out {out}",
            c.tool, c.preset
        )
    };
    match &c.source_program {
        Some(pi) => format!(
            "{} && {} && sketchprobe run --program op.js && sketchprobe run --program opi.js",
            obf(&c.program_id, "op.js"),
            obf(pi, "opi.js")
        ),
        None => format!(
            "{} && sketchprobe run --program artifacts/{}.js && sketchprobe run --program variant.js",
            obf(&c.program_id, "variant.js"),
            c.program_id
        ),
    }
}

/// Groups failing, deterministic verdicts by fingerprint. Output is sorted
/// by fingerprint, so the result does not depend on input order.
pub fn dedupe(verdicts: &[Verdict]) -> Vec<BugReport> {
    dedupe_with(verdicts, FingerprintPolicy::default())
}

pub fn dedupe_with(verdicts: &[Verdict], policy: FingerprintPolicy) -> Vec<BugReport> {
    let mut groups: BTreeMap<String, Vec<&Verdict>> = BTreeMap::new();
    for v in verdicts.iter().filter(|v| !v.is_pass() && !v.nondeterministic) {
        if let Some(fp) = fingerprint(v, policy) {
            groups.entry(fp).or_default().push(v);
        }
    }
    groups
        .into_iter()
        .map(|(fp, vs)| {
            let ex = vs
                .iter()
                .min_by(|a, b| {
                    (&a.context.program_id, &a.context.variant_id).cmp(&(&b.context.program_id, &b.context.variant_id))
                })
                .unwrap();
            BugReport {
                fingerprint: fp,
                category: ex.category.unwrap(),
                shape: ex.shape.clone(),
                tool: ex.context.tool.clone(),
                preset: ex.context.preset.clone(),
                exemplar_program: ex.context.program_id.clone(),
                exemplar_variant: ex.context.variant_id.clone(),
                occurrences: vs.len(),
                reproduction: reproduction_command(ex),
            }
        })
        .collect()
}

/// Reports as a deduplicated set, merged with earlier reports.
pub fn merge_reports(existing: &[BugReport], fresh: &[BugReport]) -> Vec<BugReport> {
    let mut by_fp: BTreeMap<String, BugReport> = BTreeMap::new();
    for r in existing.iter().chain(fresh) {
        by_fp
            .entry(r.fingerprint.clone())
            .and_modify(|cur| {
                cur.occurrences += r.occurrences;
                if (&r.exemplar_program, &r.exemplar_variant) < (&cur.exemplar_program, &cur.exemplar_variant) {
                    cur.exemplar_program = r.exemplar_program.clone();
                    cur.exemplar_variant = r.exemplar_variant.clone();
                    cur.reproduction = r.reproduction.clone();
                }
            })
            .or_insert_with(|| r.clone());
    }
    by_fp.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::ErrorInfo;
    use proptest::collection::vec;
    use proptest::prelude::{any, prop_oneof, Just, Strategy};
    use proptest::{prop_assert, prop_assert_eq, proptest};

    fn ok(lines: &[&str]) -> NormalizedResult {
        NormalizedResult {
            stdout_lines: lines.iter().map(|s| s.to_string()).collect(),
            error: None,
            exit_status: 0,
            timed_out: false,
        }
    }

    fn err(lines: &[&str], ty: &str, msg: &str) -> NormalizedResult {
        NormalizedResult {
            error: Some(ErrorInfo {
                error_type: ty.into(),
                message: msg.into(),
            }),
            exit_status: 1,
            ..ok(lines)
        }
    }

    fn timeout() -> NormalizedResult {
        NormalizedResult {
            timed_out: true,
            exit_status: crate::exec::TIMEOUT_STATUS,
            ..ok(&[])
        }
    }

    fn ctx(p: &str, tool: &str, preset: &str) -> VerdictContext {
        VerdictContext {
            program_id: p.into(),
            variant_id: format!("{p}-v"),
            tool: tool.into(),
            preset: preset.into(),
            mr: None,
            source_program: None,
        }
    }

    fn diff(a: &NormalizedResult, b: &NormalizedResult) -> Verdict {
        compare_differential(a, b, ctx("p", "t", "low"))
    }

    #[test]
    fn figure_one_variant_is_exception_mismatch() {
        let ground = ok(&["10", "x*y", "210", "x*y20"]);
        let variant = err(&["10", "x*y"], "ReferenceError", "x is not defined");
        let v = diff(&ground, &variant);
        assert_eq!(v.category, Some(FailCategory::ExceptionMismatch));
        assert_eq!(v.shape, "none->ReferenceError");
        assert_eq!(v.first_divergence.unwrap().line, 2);
    }

    #[test]
    fn silent_fix_and_suppressed_error() {
        let ground = err(&[], "TypeError", "x is not a function");
        assert_eq!(diff(&ground, &ok(&[])).category, Some(FailCategory::SilentFix));
        let mut quiet_fail = ok(&[]);
        quiet_fail.exit_status = 3;
        assert_eq!(diff(&ground, &quiet_fail).category, Some(FailCategory::SuppressedError));
    }

    #[test]
    fn metamorphic_divergence_line() {
        let a = ok(&["-> Entering Block@1:0", "1", "2", "3"]);
        let b = ok(&["1", "-> Entering Block@4:2", "2", "4"]);
        let v = compare_metamorphic(&a, &b, ctx("p", "t", "low"));
        assert_eq!(v.category, Some(FailCategory::StdoutMismatch));
        assert_eq!(
            v.first_divergence,
            Some(Divergence {
                line: 2,
                expected: Some("3".into()),
                actual: Some("4".into())
            })
        );
        assert!(compare_metamorphic(&timeout(), &timeout(), ctx("p", "t", "low")).is_pass());
    }

    #[test]
    fn timeout_rule() {
        assert!(diff(&timeout(), &timeout()).is_pass());
        let v = diff(&timeout(), &ok(&["done"]));
        assert_eq!(v.category, Some(FailCategory::TerminationMismatch));
        assert_eq!(diff(&ok(&[]), &timeout()).category, Some(FailCategory::TerminationMismatch));
    }

    #[test]
    fn dropped_and_added_lines_have_their_own_shape() {
        let g = ok(&["0", "1", "2"]);
        assert_eq!(diff(&g, &ok(&["0", "1"])).shape, "missing");
        assert_eq!(diff(&g, &ok(&["0", "1", "2", "3"])).shape, "extra");
        assert_eq!(diff(&g, &ok(&["0", "1", "9"])).shape, "plain");
    }

    #[test]
    fn exit_status_only() {
        let mut b = ok(&["a"]);
        b.exit_status = 2;
        assert_eq!(diff(&ok(&["a"]), &b).category, Some(FailCategory::TerminationMismatch));
    }

    #[test]
    fn dedupe_groups() {
        let g = ok(&["1"]);
        let b = ok(&["2"]);
        let v1 = compare_differential(&g, &b, ctx("b", "js_confuser", "low"));
        let v2 = compare_differential(&g, &b, ctx("a", "js_confuser", "low"));
        let v3 = compare_differential(&g, &b, ctx("c", "obfuscator_io", "low"));
        let r = dedupe(&[v1.clone(), v2.clone()]);
        assert_eq!(r.len(), 1);
        assert_eq!((r[0].exemplar_program.as_str(), r[0].occurrences), ("a", 2));
        assert_eq!(dedupe(&[v1, v2, v3]).len(), 2);
    }

    #[test]
    fn nondeterministic_excluded() {
        let runs = [ok(&["1"]), ok(&["2"]), ok(&["3"])];
        let v = compare_repeated(&runs, &[ok(&["1"])], ctx("p", "t", "low"));
        assert!(v.nondeterministic);
        assert!(dedupe(&[v]).is_empty());
        let runs = [ok(&["1"]), ok(&["2"]), ok(&["1"])];
        assert_eq!(majority(&runs), Some(&ok(&["1"])));
    }

    #[test]
    fn obfuscation_error_shape_ignores_positions() {
        let a = Verdict::obfuscation_error(ctx("a", "obfuscator_io", "default"), "Unexpected token (1:24)");
        let b = Verdict::obfuscation_error(ctx("b", "obfuscator_io", "default"), "Unexpected token (3:7)");
        assert_eq!(dedupe(&[a, b]).len(), 1);
    }

    fn result() -> impl Strategy<Value = NormalizedResult> {
        let lines = vec(prop_oneof![Just("1".to_string()), Just("x".to_string()), Just("-> Entering Block@1:0".to_string())], 0..4);
        let error = prop_oneof![
            Just(None),
            Just(Some(ErrorInfo {
                error_type: "TypeError".into(),
                message: "m".into()
            })),
            Just(Some(ErrorInfo {
                error_type: "ReferenceError".into(),
                message: "m".into()
            })),
        ];
        (lines, error, 0i32..3, any::<bool>()).prop_map(|(stdout_lines, error, exit_status, timed_out)| NormalizedResult {
            stdout_lines,
            error,
            exit_status,
            timed_out,
        })
    }

    fn verdict(p: &str, a: &NormalizedResult, b: &NormalizedResult) -> Verdict {
        compare_differential(a, b, ctx(p, "t", "low"))
    }

    proptest! {
        #[test]
        fn reflexive(r in result()) {
            prop_assert!(diff(&r, &r).is_pass());
            prop_assert!(compare_metamorphic(&r, &r, ctx("p", "t", "low")).is_pass());
        }

        #[test]
        fn pass_set_symmetric(a in result(), b in result()) {
            prop_assert_eq!(diff(&a, &b).is_pass(), diff(&b, &a).is_pass());
        }

        #[test]
        fn timeout_absorbs(mut a in result(), mut b in result()) {
            a.timed_out = true;
            b.timed_out = true;
            prop_assert!(diff(&a, &b).is_pass());
        }

        #[test]
        fn dedupe_idempotent_and_order_invariant(rs in vec((result(), result()), 0..12), rot in 0usize..12) {
            let vs: Vec<Verdict> = rs.iter().enumerate().map(|(i, (a, b))| verdict(&format!("p{i}"), a, b)).collect();
            let once = dedupe(&vs);
            let mut rotated = vs.clone();
            if !rotated.is_empty() {
                let k = rot % rotated.len();
                rotated.rotate_left(k);
            }
            prop_assert_eq!(&once, &dedupe(&rotated));
            prop_assert_eq!(merge_reports(&once, &[]), once.clone());
        }
    }
}
