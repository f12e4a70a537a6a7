//! Sketch filling.
//!
//! Every placeholder is replaced in one post-order pass over a clone of the
//! sketch AST: operand 1, operand 2, then the operator draw. Decisions go
//! through a [`Chooser`], so the same pass runs randomly (seeded) or replays
//! recorded values (identity refill of extracted sketches).

use serde::{Deserialize, Serialize};
use swc_common::DUMMY_SP;
use swc_ecma_ast::*;
use swc_ecma_visit::{Visit, VisitMut, VisitMutWith, VisitWith};
use thiserror::Error;

use crate::js::{self, Location};
use crate::rng::{derive_seed, Rng};
use crate::scope::{Candidate, ScopeEnv, TypeTag};
use crate::sketch::{
    self, classify_operator, operator_token, DslViolation, OperatorClass, PlaceholderKind, Sketch,
    UnaryToken,
};

/// Operators drawn when an expression placeholder lists none. `in` and
/// `instanceof` are left out: over number and boolean operands they always throw.
pub const NO_OP_OPERATORS: &[&str] = &[
    "==", "!=", "===", "!==", "<", "<=", ">", ">=", "<<", ">>", ">>>", "+", "-", "*", "/", "%",
    "|", "^", "&", "**",
];

#[derive(Debug, Error)]
pub enum FillError {
    #[error("sketch has unrecoverable violations: {}", summarize(.0))]
    UnrecoverableViolation(Vec<DslViolation>),
    #[error("invalid fill config: {0}")]
    InvalidConfig(String),
    #[error("placeholder left unfilled at {0}")]
    Residual(Location),
    #[error("replay mismatch at {location}: {message}")]
    Replay { location: Location, message: String },
}

fn summarize(vs: &[DslViolation]) -> String {
    vs.iter()
        .filter(|v| !v.recoverable)
        .map(|v| format!("{} at {}", v.category.label(), v.location))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FillConfig {
    pub rng_seed: u64,
    pub int_range: (i64, i64),
    pub float_range: (f64, f64),
    pub float_probability: f64,
    pub instances_per_sketch: usize,
}

impl Default for FillConfig {
    fn default() -> Self {
        FillConfig {
            rng_seed: 0,
            int_range: (-1000, 1000),
            float_range: (-1000.0, 1000.0),
            float_probability: 0.5,
            instances_per_sketch: 5,
        }
    }
}

impl FillConfig {
    pub fn validate(&self) -> Result<(), FillError> {
        let bad = |m: &str| Err(FillError::InvalidConfig(m.to_string()));
        if self.int_range.0 > self.int_range.1 {
            return bad("int_range is empty");
        }
        if !(self.float_range.0 <= self.float_range.1) || !self.float_range.0.is_finite() || !self.float_range.1.is_finite() {
            return bad("float_range is empty or not finite");
        }
        if !(0.0..=1.0).contains(&self.float_probability) {
            return bad("float_probability outside [0, 1]");
        }
        if self.instances_per_sketch == 0 {
            return bad("instances_per_sketch must be positive");
        }
        Ok(())
    }
}

/// One recorded decision. Serialized form of a substitution value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum FillValue {
    Number(f64),
    Boolean(bool),
    Reference(String),
    Operator(String),
}

impl std::fmt::Display for FillValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FillValue::Number(v) => write!(f, "{}", js::print_expr(&js::num_expr(*v))),
            FillValue::Boolean(b) => write!(f, "{b}"),
            FillValue::Reference(r) | FillValue::Operator(r) => f.write_str(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Substitution {
    pub location: Location,
    pub placeholder_kind: PlaceholderKind,
    /// Chosen literal, reference text, or operator for expressions.
    pub value: FillValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilledProgram {
    pub source_text: String,
    pub sketch_id: String,
    pub seed_used: u64,
    pub substitutions: Vec<Substitution>,
}

/// Source of fill decisions.
pub trait Chooser {
    fn number(&mut self, at: Location) -> Result<f64, FillError>;
    fn boolean(&mut self, at: Location) -> Result<bool, FillError>;
    /// Index into `candidates`, or `None` for the literal fallback.
    fn reference(&mut self, at: Location, candidates: &[Candidate]) -> Result<Option<usize>, FillError>;
    fn operator(&mut self, at: Location, operators: &[String]) -> Result<usize, FillError>;
}

/// Seeded random decisions.
pub struct RandomChooser<'a> {
    rng: Rng,
    cfg: &'a FillConfig,
}

impl<'a> RandomChooser<'a> {
    pub fn new(seed: u64, cfg: &'a FillConfig) -> Self {
        RandomChooser { rng: Rng::new(seed), cfg }
    }
}

impl RandomChooser<'_> {
    fn draw_number(&mut self) -> f64 {
        if self.rng.bernoulli(self.cfg.float_probability) {
            let (lo, hi) = self.cfg.float_range;
            round_significant(self.rng.uniform(lo, hi), 6)
        } else {
            let (lo, hi) = self.cfg.int_range;
            self.rng.range_i64(lo, hi) as f64
        }
    }
}

/// Rounds to `digits` significant decimal digits.
pub fn round_significant(v: f64, digits: usize) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{:.*e}", digits.saturating_sub(1), v).parse().unwrap_or(v)
}

impl Chooser for RandomChooser<'_> {
    fn number(&mut self, _: Location) -> Result<f64, FillError> {
        Ok(self.draw_number())
    }

    fn boolean(&mut self, _: Location) -> Result<bool, FillError> {
        Ok(self.rng.coin())
    }

    fn reference(&mut self, _: Location, candidates: &[Candidate]) -> Result<Option<usize>, FillError> {
        if candidates.is_empty() {
            return Ok(None);
        }
        Ok(Some(self.rng.index(candidates.len())))
    }

    fn operator(&mut self, _: Location, operators: &[String]) -> Result<usize, FillError> {
        Ok(self.rng.index(operators.len()))
    }
}

/// Replays recorded values in traversal order.
pub struct ReplayChooser {
    values: std::vec::IntoIter<FillValue>,
}

impl ReplayChooser {
    pub fn new(values: Vec<FillValue>) -> Self {
        ReplayChooser {
            values: values.into_iter(),
        }
    }

    fn next(&mut self, at: Location) -> Result<FillValue, FillError> {
        self.values.next().ok_or(FillError::Replay {
            location: at,
            message: "ran out of recorded values".into(),
        })
    }

    fn peek(&self) -> Option<&FillValue> {
        self.values.as_slice().first()
    }

    pub fn exhausted(&self) -> bool {
        self.values.as_slice().is_empty()
    }
}

fn mismatch(at: Location, want: &str, got: &FillValue) -> FillError {
    FillError::Replay {
        location: at,
        message: format!("expected {want}, recorded {got:?}"),
    }
}

impl Chooser for ReplayChooser {
    fn number(&mut self, at: Location) -> Result<f64, FillError> {
        match self.next(at)? {
            FillValue::Number(v) => Ok(v),
            other => Err(mismatch(at, "number", &other)),
        }
    }

    fn boolean(&mut self, at: Location) -> Result<bool, FillError> {
        match self.next(at)? {
            FillValue::Boolean(b) => Ok(b),
            other => Err(mismatch(at, "boolean", &other)),
        }
    }

    fn reference(&mut self, at: Location, candidates: &[Candidate]) -> Result<Option<usize>, FillError> {
        match self.peek() {
            Some(FillValue::Reference(_)) => {
                let Some(FillValue::Reference(name)) = self.next(at).ok() else { unreachable!() };
                candidates
                    .iter()
                    .position(|c| c.text() == name)
                    .map(Some)
                    .ok_or(FillError::Replay {
                        location: at,
                        message: format!("`{name}` is not a candidate here"),
                    })
            }
            _ => Ok(None),
        }
    }

    fn operator(&mut self, at: Location, operators: &[String]) -> Result<usize, FillError> {
        match self.next(at)? {
            FillValue::Operator(op) => {
                let op = sketch::normalize_operator(&op);
                operators.iter().position(|o| *o == op).ok_or(FillError::Replay {
                    location: at,
                    message: format!("operator `{op}` not offered"),
                })
            }
            other => Err(mismatch(at, "operator", &other)),
        }
    }
}

/// Fills `cfg.instances_per_sketch` programs. Instance `i` uses the seed
/// `derive_seed(cfg.rng_seed, i)`.
pub fn fill(s: &Sketch, cfg: &FillConfig) -> Result<Vec<FilledProgram>, FillError> {
    cfg.validate()?;
    check_fillable(s)?;
    let env = ScopeEnv::analyze(s.ast());
    (0..cfg.instances_per_sketch as u64)
        .map(|i| {
            let seed = derive_seed(cfg.rng_seed, i);
            let mut chooser = RandomChooser::new(seed, cfg);
            fill_with_env(s, &env, &mut chooser, seed)
        })
        .collect()
}

/// Fills one program from an explicit seed (no derivation).
pub fn fill_one(s: &Sketch, cfg: &FillConfig, seed: u64) -> Result<FilledProgram, FillError> {
    cfg.validate()?;
    check_fillable(s)?;
    let env = ScopeEnv::analyze(s.ast());
    fill_with_env(s, &env, &mut RandomChooser::new(seed, cfg), seed)
}

/// Fills with arbitrary decisions.
pub fn fill_with(s: &Sketch, chooser: &mut dyn Chooser) -> Result<FilledProgram, FillError> {
    check_fillable(s)?;
    let env = ScopeEnv::analyze(s.ast());
    fill_with_env(s, &env, chooser, 0)
}

fn check_fillable(s: &Sketch) -> Result<(), FillError> {
    let vs = sketch::validate_sketch(s);
    if sketch::is_fillable(&vs) {
        Ok(())
    } else {
        Err(FillError::UnrecoverableViolation(vs))
    }
}

fn fill_with_env(s: &Sketch, env: &ScopeEnv, chooser: &mut dyn Chooser, seed: u64) -> Result<FilledProgram, FillError> {
    let mut program = s.ast().clone();
    let mut pass = FillPass {
        sketch: s,
        env,
        chooser,
        subs: Vec::new(),
        err: None,
    };
    program.visit_mut_with(&mut pass);
    if let Some(e) = pass.err {
        return Err(e);
    }
    let subs = pass.subs;
    let mut residual = ResidualFinder(None);
    program.visit_with(&mut residual);
    if let Some(span) = residual.0 {
        return Err(FillError::Residual(s.location(span.lo)));
    }
    Ok(FilledProgram {
        source_text: js::print(&program),
        sketch_id: s.id(),
        seed_used: seed,
        substitutions: subs,
    })
}

struct ResidualFinder(Option<swc_common::Span>);

impl Visit for ResidualFinder {
    fn visit_ident(&mut self, id: &Ident) {
        if self.0.is_none() && sketch::ident_placeholder(&id.sym).is_some() {
            self.0 = Some(id.span);
        }
    }

    fn visit_call_expr(&mut self, c: &CallExpr) {
        if self.0.is_none() && sketch::placeholder_call(c).is_some() {
            self.0 = Some(c.span);
        }
        c.visit_children_with(self);
    }
}

struct FillPass<'a> {
    sketch: &'a Sketch,
    env: &'a ScopeEnv,
    chooser: &'a mut dyn Chooser,
    subs: Vec<Substitution>,
    err: Option<FillError>,
}

impl FillPass<'_> {
    fn record(&mut self, at: Location, kind: PlaceholderKind, value: FillValue) {
        self.subs.push(Substitution {
            location: at,
            placeholder_kind: kind,
            value,
        });
    }

    fn fail<T>(&mut self, r: Result<T, FillError>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                if self.err.is_none() {
                    self.err = Some(e);
                }
                None
            }
        }
    }

    fn literal(&mut self, at: Location, number: bool) -> Option<(Expr, FillValue)> {
        if number {
            let v = self.chooser.number(at);
            let v = self.fail(v)?;
            Some((js::num_expr(v), FillValue::Number(v)))
        } else {
            let b = self.chooser.boolean(at);
            let b = self.fail(b)?;
            Some((js::bool_expr(b), FillValue::Boolean(b)))
        }
    }

    /// Replacement for a placeholder identifier.
    fn ident(&mut self, id: &Ident, kind: PlaceholderKind, lhs: bool) -> Option<Expr> {
        if self.err.is_some() {
            return None;
        }
        let at = self.sketch.location(id.span.lo);
        let (expr, value) = match kind {
            PlaceholderKind::NumberLiteral => self.literal(at, true)?,
            PlaceholderKind::BooleanLiteral => self.literal(at, false)?,
            PlaceholderKind::NumberReference | PlaceholderKind::BooleanReference => {
                let number = kind == PlaceholderKind::NumberReference;
                let want = if number { TypeTag::Number } else { TypeTag::Boolean };
                let cands = self.env.candidates(id.span.lo.0, &want, lhs);
                let pick = self.chooser.reference(at, &cands);
                match self.fail(pick)? {
                    Some(i) => {
                        let c = &cands[i];
                        let base = Expr::Ident(Ident::new_no_ctxt(c.name.as_str().into(), id.span));
                        let e = match c.index {
                            Some(k) => js::index(base, k),
                            None => base,
                        };
                        (e, FillValue::Reference(c.text()))
                    }
                    None => {
                        let (lit, v) = self.literal(at, number)?;
                        // `[lit][0]` keeps an assignment target assignable
                        let e = if lhs {
                            js::index(
                                Expr::Array(ArrayLit {
                                    span: DUMMY_SP,
                                    elems: vec![Some(ExprOrSpread {
                                        spread: None,
                                        expr: Box::new(lit),
                                    })],
                                }),
                                0,
                            )
                        } else {
                            lit
                        };
                        (e, v)
                    }
                }
            }
            PlaceholderKind::Expression(_) => unreachable!("expression placeholders are calls"),
        };
        self.record(at, kind, value);
        Some(expr)
    }

    fn expression(&mut self, call: &mut CallExpr, kind: sketch::ExprKind) -> Option<Expr> {
        let at = self.sketch.location(call.span.lo);
        if call.args.len() < 2 || call.args.iter().any(|a| a.spread.is_some()) {
            self.err.get_or_insert(FillError::Residual(at));
            return None;
        }
        let operators: Vec<String> = if call.args.len() == 2 {
            NO_OP_OPERATORS.iter().map(|s| s.to_string()).collect()
        } else {
            call.args[2..].iter().map(operator_token).collect()
        };
        let mut left = (*call.args[0].expr).clone();
        left.visit_mut_with(self);
        let mut right = (*call.args[1].expr).clone();
        right.visit_mut_with(self);
        if self.err.is_some() {
            return None;
        }
        let pick = self.chooser.operator(at, &operators);
        let i = self.fail(pick)?;
        let op = operators[i].clone();
        let expr = match classify_operator(&op) {
            OperatorClass::Binary(b) => js::bin(b, left, right),
            OperatorClass::Unary(UnaryToken::Increment) => js::paren(js::bin(BinaryOp::Add, left, js::num_expr(1.0))),
            OperatorClass::Unary(UnaryToken::Decrement) => js::paren(js::bin(BinaryOp::Sub, left, js::num_expr(1.0))),
            OperatorClass::Unary(UnaryToken::Op(UnaryOp::Delete)) if matches!(js::unparen(&left), Expr::Ident(_)) => {
                // `delete x` is an early error in strict code
                js::unary(
                    UnaryOp::Delete,
                    js::paren(Expr::Seq(SeqExpr {
                        span: DUMMY_SP,
                        exprs: vec![Box::new(js::num_expr(0.0)), Box::new(left)],
                    })),
                )
            }
            OperatorClass::Unary(UnaryToken::Op(u)) => js::unary(u, left),
            OperatorClass::Ternary | OperatorClass::Unknown => {
                self.err.get_or_insert(FillError::Residual(at));
                return None;
            }
        };
        self.record(at, PlaceholderKind::Expression(kind), FillValue::Operator(op));
        Some(js::paren(expr))
    }

    fn lhs_target(&mut self, t: &mut SimpleAssignTarget) {
        if let SimpleAssignTarget::Ident(b) = t {
            if let Some(kind) = sketch::ident_placeholder(&b.id.sym) {
                let id = b.id.clone();
                if let Some(e) = self.ident(&id, kind, true) {
                    *t = match e {
                        Expr::Ident(i) => SimpleAssignTarget::Ident(BindingIdent { id: i, type_ann: None }),
                        Expr::Member(m) => SimpleAssignTarget::Member(m),
                        other => SimpleAssignTarget::Paren(ParenExpr {
                            span: DUMMY_SP,
                            expr: Box::new(other),
                        }),
                    };
                }
                return;
            }
        }
        t.visit_mut_children_with(self);
    }
}

impl VisitMut for FillPass<'_> {
    fn visit_mut_expr(&mut self, e: &mut Expr) {
        if self.err.is_some() {
            return;
        }
        match e {
            Expr::Ident(id) => {
                if let Some(kind) = sketch::ident_placeholder(&id.sym) {
                    let id = id.clone();
                    if let Some(new) = self.ident(&id, kind, false) {
                        *e = new;
                    }
                }
            }
            Expr::Call(c) if sketch::placeholder_call(c).is_some() => {
                let kind = sketch::placeholder_call(c).unwrap();
                if let Some(new) = self.expression(c, kind) {
                    *e = new;
                }
            }
            Expr::Update(u) => {
                if let Expr::Ident(id) = &*u.arg {
                    if let Some(kind) = sketch::ident_placeholder(&id.sym) {
                        let id = id.clone();
                        if let Some(new) = self.ident(&id, kind, true) {
                            *u.arg = new;
                        }
                        return;
                    }
                }
                e.visit_mut_children_with(self);
            }
            _ => e.visit_mut_children_with(self),
        }
    }

    fn visit_mut_assign_expr(&mut self, a: &mut AssignExpr) {
        match &mut a.left {
            AssignTarget::Simple(t) => self.lhs_target(t),
            other => other.visit_mut_with(self),
        }
        a.right.visit_mut_with(self);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::parse_sketch;
    use proptest::prelude::*;

    const FIG1: &str = "let x = NumberLiteral;\nlet y = NumberLiteral;\nlet text = \"x*y\";\nconsole.log(NumberReference)\nconsole.log(text)\nlet result = eval(text);\nconsole.log(result + \nNumberReference);\nconsole.log(text + \nNumberReference);\n";

    fn one(src: &str, seed: u64) -> FilledProgram {
        let s = parse_sketch(src).unwrap();
        fill_one(&s, &FillConfig::default(), seed).unwrap()
    }

    #[test]
    fn no_placeholders_is_identity() {
        let src = "let a = 1;\nif (a > 0) { console.log(a); }\n";
        for seed in 0..5 {
            assert!(js::ast_eq_text(&one(src, seed).source_text, src).unwrap());
        }
    }

    #[test]
    fn degenerate_int_range() {
        let s = parse_sketch("let a = numberLiteral;").unwrap();
        let cfg = FillConfig {
            int_range: (5, 5),
            float_probability: 0.0,
            ..Default::default()
        };
        for p in fill(&s, &cfg).unwrap() {
            assert!(js::ast_eq_text(&p.source_text, "let a = 5;").unwrap());
        }
    }

    #[test]
    fn single_operator_expression() {
        let p = one("let a = arithmetic(3, 4, '+');", 1);
        assert!(js::ast_eq_text(&p.source_text, "let a = 3 + 4;").unwrap());
        let p = one("let a = arithmetic(3, 4, +);", 1);
        assert!(js::ast_eq_text(&p.source_text, "let a = 3 + 4;").unwrap());
    }

    #[test]
    fn nested_expressions_resolve_inside_out() {
        let s = parse_sketch("let a = 1, b = 2, c = 3, d = 4;\nlet r = logic(relation(a, b, <=), relation(c, d, <=), &&, ||);").unwrap();
        let values = vec![
            FillValue::Operator("<=".into()),
            FillValue::Operator("<=".into()),
            FillValue::Operator("&&".into()),
        ];
        let p = fill_with(&s, &mut ReplayChooser::new(values)).unwrap();
        assert!(js::ast_eq_text(&p.source_text, "let a = 1, b = 2, c = 3, d = 4; let r = a <= b && c <= d;").unwrap());
        assert_eq!(p.substitutions.len(), 3);
    }

    #[test]
    fn unary_repair_drops_second_operand() {
        let s = parse_sketch("let a = true, b = false;\nlet r = logic(a, b, !);").unwrap();
        let p = fill_with(&s, &mut ReplayChooser::new(vec![FillValue::Operator("!".into())])).unwrap();
        assert!(js::ast_eq_text(&p.source_text, "let a = true, b = false; let r = !a;").unwrap());
        let s = parse_sketch("let a = 1;\nlet r = arithmetic(a, 2, ++);").unwrap();
        let p = fill_with(&s, &mut ReplayChooser::new(vec![FillValue::Operator("++".into())])).unwrap();
        assert!(js::ast_eq_text(&p.source_text, "let a = 1; let r = a + 1;").unwrap());
        let s = parse_sketch("'use strict'; let a = 1;\nlet r = logic(a, 2, delete);").unwrap();
        let p = fill_with(&s, &mut ReplayChooser::new(vec![FillValue::Operator("delete".into())])).unwrap();
        assert!(js::parse(&p.source_text).is_ok());
        assert!(p.source_text.contains("delete (0, a)"), "{}", p.source_text);
    }

    #[test]
    fn no_op_repair_draws_from_binary_set() {
        let s = parse_sketch("let r = arithmetic(1, 2);").unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..400 {
            let p = fill_one(&s, &FillConfig::default(), seed).unwrap();
            let FillValue::Operator(op) = &p.substitutions[0].value else { panic!() };
            seen.insert(op.clone());
        }
        let want: std::collections::BTreeSet<String> = NO_OP_OPERATORS.iter().map(|s| s.to_string()).collect();
        assert_eq!(seen, want);
    }

    #[test]
    fn unrecoverable_is_rejected() {
        let s = parse_sketch("let r = relation(a ? 1 : 2, 3, <);").unwrap();
        assert!(matches!(fill(&s, &FillConfig::default()), Err(FillError::UnrecoverableViolation(_))));
    }

    #[test]
    fn reference_fallback_and_lhs() {
        let p = one("let b = booleanReference;", 3);
        assert!(p.source_text.contains("true") || p.source_text.contains("false"));
        let p = one("const k = 1;\nnumberReference = 5;", 3);
        assert!(p.source_text.contains("][0] = 5"), "{}", p.source_text);
        let p = one("const k = 1;\nlet v = 2;\nnumberReference += 5;\nnumberReference++;", 3);
        assert!(js::ast_eq_text(&p.source_text, "const k = 1; let v = 2; v += 5; v++;").unwrap());
    }

    #[test]
    fn array_element_references() {
        let s = parse_sketch("let arr = [true, 3.14, \"s\", 1];\nlet n = numberReference;\nlet b = booleanReference;").unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..50 {
            let p = fill_one(&s, &FillConfig::default(), seed).unwrap();
            for sub in p.substitutions {
                seen.insert(sub.value.to_string());
            }
        }
        let want: std::collections::BTreeSet<String> =
            ["arr[0]", "arr[1]", "arr[3]"].iter().map(|s| s.to_string()).collect();
        assert_eq!(seen, want);
    }

    #[test]
    fn substitutions_locate_placeholders() {
        let p = one(FIG1, 9);
        let locs: Vec<String> = p.substitutions.iter().map(|s| s.location.to_string()).collect();
        assert_eq!(locs, vec!["1:8", "2:8", "4:12", "8:0", "10:0"]);
        assert_eq!(p.substitutions[2].placeholder_kind, PlaceholderKind::NumberReference);
    }

    #[test]
    fn boolean_literal_frequency() {
        let s = parse_sketch("let b = booleanLiteral;").unwrap();
        let n = 1000;
        let trues = (0..n)
            .filter(|&seed| {
                let p = fill_one(&s, &FillConfig::default(), seed).unwrap();
                p.substitutions[0].value == FillValue::Boolean(true)
            })
            .count() as f64;
        // 3 sigma at n = 1000 is about 47.4
        assert!((trues - 500.0).abs() < 47.5, "{trues}");
    }

    #[test]
    fn integral_frequency() {
        let s = parse_sketch("let a = numberLiteral;").unwrap();
        let env = ScopeEnv::analyze(s.ast());
        let cfg = FillConfig::default();
        let n = 10_000;
        let mut ints = 0usize;
        for seed in 0..n {
            let p = fill_with_env(&s, &env, &mut RandomChooser::new(seed, &cfg), seed).unwrap();
            if let FillValue::Number(v) = p.substitutions[0].value {
                if v.fract() == 0.0 {
                    ints += 1;
                }
            }
        }
        // floats are integral with negligible probability; 3 sigma = 150
        assert!((ints as f64 - 5000.0).abs() < 150.0, "{ints}");
    }

    #[test]
    fn relation_operator_frequency() {
        let s = parse_sketch("let r = relation(numberLiteral, numberLiteral, <, >);").unwrap();
        let env = ScopeEnv::analyze(s.ast());
        let cfg = FillConfig::default();
        let n = 10_000u64;
        let lt = (0..n)
            .filter(|&seed| {
                let p = fill_with_env(&s, &env, &mut RandomChooser::new(seed, &cfg), seed).unwrap();
                p.substitutions[2].value == FillValue::Operator("<".into())
            })
            .count() as f64;
        assert!((lt - 5000.0).abs() < 150.0, "{lt}");
    }

    #[test]
    fn instances_are_distinct() {
        let s = parse_sketch("let a = numberLiteral;\nlet b = numberLiteral;").unwrap();
        let ps = fill(&s, &FillConfig { rng_seed: 11, ..Default::default() }).unwrap();
        let texts: std::collections::BTreeSet<_> = ps.iter().map(|p| p.source_text.clone()).collect();
        assert_eq!(texts.len(), 5);
    }

    #[test]
    fn invalid_config() {
        let s = parse_sketch("1;").unwrap();
        for cfg in [
            FillConfig { int_range: (2, 1), ..Default::default() },
            FillConfig { float_probability: 1.5, ..Default::default() },
            FillConfig { instances_per_sketch: 0, ..Default::default() },
        ] {
            assert!(matches!(fill(&s, &cfg), Err(FillError::InvalidConfig(_))));
        }
    }

    #[test]
    fn rounding() {
        assert_eq!(round_significant(3.14159265, 6), 3.14159);
        assert_eq!(round_significant(-123456.789, 6), -123457.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn fill_is_deterministic_and_complete(seed: u64) {
            let a = one(FIG1, seed);
            let b = one(FIG1, seed);
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.substitutions.len(), 5);
            let s = parse_sketch(&a.source_text).unwrap();
            prop_assert!(!s.has_placeholders());
            prop_assert!(sketch::validate_sketch(&s).is_empty());
        }

        #[test]
        fn references_are_typed(seed: u64) {
            let src = "let f = true; let n = 3; let m = n * 2; let g = f && false;\nlet r = arithmetic(numberReference, numberReference, +);\nlet q = logic(booleanReference, booleanReference, &&);";
            let p = one(src, seed);
            for sub in &p.substitutions {
                if let FillValue::Reference(name) = &sub.value {
                    match sub.placeholder_kind {
                        PlaceholderKind::NumberReference => prop_assert!(name == "n" || name == "m"),
                        _ => prop_assert!(name == "f" || name == "g"),
                    }
                }
            }
        }
    }
}
