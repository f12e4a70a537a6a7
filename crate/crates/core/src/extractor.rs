//! Sketch extraction from concrete programs.
//!
//! Step 1 types every variable from its declarations and assignments (the
//! scope analysis). Step 2 rewrites a clone of the AST: number and boolean
//! literals become literal placeholders, reads of number/boolean variables
//! become reference placeholders, and binary expressions over typed operands
//! become expression placeholders offering only their original operator.
//!
//! Every record is checked by an identity refill. References the refill
//! cannot reproduce (the sketch-side scope analysis disagrees) are put back
//! as concrete identifiers, one at a time, until the round trip holds.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use swc_common::{Spanned, DUMMY_SP};
use swc_ecma_ast::*;
use swc_ecma_visit::{Visit, VisitMut, VisitMutWith, VisitWith};
use thiserror::Error;

use crate::filler::{self, Chooser, FillError, FillValue, ReplayChooser, Substitution};
use crate::js::{self, Location};
use crate::rng::Rng;
use crate::scope::{self, Candidate, ScopeEnv, TypeTag};
use crate::sketch::{self, ExprKind, Origin, PlaceholderKind, Sketch};

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("parse error: {0}")]
    Parse(#[from] js::SyntaxError),
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl ExtractError {
    /// Short reason used for skip counts.
    pub fn reason(&self) -> String {
        match self {
            ExtractError::Parse(_) => "parse_error".into(),
            ExtractError::Unsupported(m) => m.split(':').next().unwrap_or(m).trim().replace(' ', "_"),
            ExtractError::Io { .. } => "io_error".into(),
        }
    }
}

/// Which kinds of sites are abstracted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractOptions {
    pub literals: bool,
    pub references: bool,
    /// Binary expressions whose two operands are both number/boolean typed.
    pub expressions: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            literals: true,
            references: true,
            expressions: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExtractionRecord {
    pub source_path: String,
    pub sketch: Sketch,
    /// Values in fill order; replaying them reproduces the source.
    pub original_values: Vec<Substitution>,
    /// Reference sites left concrete after the round-trip check.
    pub demoted_references: usize,
}

impl ExtractionRecord {
    pub fn values(&self) -> Vec<FillValue> {
        self.original_values.iter().map(|s| s.value.clone()).collect()
    }

    /// Identity refill through the filler's replay path.
    pub fn refill(&self) -> Result<String, FillError> {
        let mut chooser = ReplayChooser::new(self.values());
        let out = filler::fill_with(&self.sketch, &mut chooser)?;
        if !chooser.exhausted() {
            return Err(FillError::Replay {
                location: Location { line: 0, column: 0 },
                message: "recorded values left over".into(),
            });
        }
        Ok(out.source_text)
    }
}

pub fn extract(source: &str) -> Result<ExtractionRecord, ExtractError> {
    extract_with(source, "", ExtractOptions::default())
}

pub fn extract_with(source: &str, path: &str, opts: ExtractOptions) -> Result<ExtractionRecord, ExtractError> {
    let parsed = js::parse(source)?;
    check_supported(&parsed.program)?;
    let env = ScopeEnv::analyze(&parsed.program);
    let mut demoted = HashSet::new();
    let mut opts = opts;
    let mut last_err = String::new();
    for _ in 0..64 {
        let built = abstract_program(&parsed.program, &env, opts, &demoted);
        match round_trip(&parsed.program, &built, path) {
            Ok(record) => {
                return Ok(ExtractionRecord {
                    demoted_references: demoted.len(),
                    ..record
                })
            }
            Err(Failure::Reference(ord)) if !demoted.contains(&ord) => {
                demoted.insert(ord);
            }
            Err(f) => {
                last_err = f.to_string();
                if opts.references {
                    // fall back to literal and expression sites only
                    opts.references = false;
                    demoted.clear();
                } else if opts.expressions {
                    opts.expressions = false;
                } else {
                    break;
                }
            }
        }
    }
    Err(ExtractError::Unsupported(format!("round trip: {last_err}")))
}

pub fn extract_file(path: &Path, opts: ExtractOptions) -> Result<ExtractionRecord, ExtractError> {
    let text = std::fs::read_to_string(path).map_err(|source| ExtractError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    extract_with(&text, &path.to_string_lossy(), opts)
}

fn check_supported(p: &Program) -> Result<(), ExtractError> {
    if let Program::Module(m) = p {
        if m.body.iter().any(|i| matches!(i, ModuleItem::ModuleDecl(_))) {
            return Err(ExtractError::Unsupported("module syntax".into()));
        }
    }
    struct Names(Option<String>);
    impl Visit for Names {
        fn visit_ident(&mut self, id: &Ident) {
            let n = &*id.sym;
            if self.0.is_none()
                && (sketch::ident_placeholder(n).is_some()
                    || sketch::expression_callee(n).is_some()
                    || sketch::is_unsupported_placeholder_name(n))
            {
                self.0 = Some(n.to_string());
            }
        }
    }
    let mut names = Names(None);
    p.visit_with(&mut names);
    match names.0 {
        Some(n) => Err(ExtractError::Unsupported(format!("placeholder named identifier: `{n}`"))),
        None => Ok(()),
    }
}

/// One abstracted site, in plain pre-order.
#[derive(Debug, Clone)]
struct Site {
    kind: PlaceholderKind,
    value: FillValue,
    /// Ordinal among reference sites, stable across rebuilds.
    reference: Option<usize>,
}

struct Built {
    program: Program,
    sites: Vec<Site>,
}

fn abstract_program(p: &Program, env: &ScopeEnv, opts: ExtractOptions, demoted: &HashSet<usize>) -> Built {
    let mut program = p.clone();
    let mut pass = Abstractor {
        env,
        opts,
        demoted,
        frozen: 0,
        concat_operand: false,
        next_reference: 0,
    };
    program.visit_mut_with(&mut pass);
    let mut sites = SiteCollector(Vec::new());
    program.visit_with(&mut sites);
    Built {
        sites: sites.0,
        program: strip_tags(program),
    }
}

// Abstracted nodes carry their value in a tag identifier so collection can
// read it back in plain pre-order. Tags are removed before printing.
const TAG_PREFIX: &str = "\u{0}obs";

struct Abstractor<'a> {
    env: &'a ScopeEnv,
    opts: ExtractOptions,
    demoted: &'a HashSet<usize>,
    frozen: usize,
    concat_operand: bool,
    next_reference: usize,
}

fn is_typed(t: &TypeTag) -> bool {
    matches!(t, TypeTag::Number | TypeTag::Boolean)
}

fn contains_cond(e: &Expr) -> bool {
    struct F(bool);
    impl Visit for F {
        fn visit_cond_expr(&mut self, _: &CondExpr) {
            self.0 = true;
        }
    }
    let mut f = F(false);
    e.visit_with(&mut f);
    f.0
}

fn expression_kind(op: BinaryOp, lt: &TypeTag, rt: &TypeTag) -> Option<ExprKind> {
    if scope::is_relational(op) {
        (is_typed(lt) && is_typed(rt)).then_some(ExprKind::Relation)
    } else if scope::is_logical(op) {
        (is_typed(lt) && lt == rt).then_some(ExprKind::Logic)
    } else if scope::is_arith(op) {
        (*lt == TypeTag::Number && *rt == TypeTag::Number).then_some(ExprKind::Arithmetic)
    } else {
        None
    }
}

fn tagged_ident(kind: PlaceholderKind, span: swc_common::Span, value: &FillValue, reference: Option<usize>) -> Ident {
    let payload = serde_json::to_string(&(value, reference)).expect("serializable");
    Ident::new_no_ctxt(format!("{TAG_PREFIX}{}|{payload}", kind.name()).into(), span)
}

impl Abstractor<'_> {
    fn freeze<T: VisitMutWith<Self> + ?Sized>(&mut self, node: &mut T) {
        self.frozen += 1;
        node.visit_mut_with(self);
        self.frozen -= 1;
    }

    fn literal(&mut self, e: &Expr) -> Option<Expr> {
        if !self.opts.literals || self.frozen > 0 || self.concat_operand {
            return None;
        }
        let (kind, value) = match e {
            Expr::Lit(Lit::Num(n)) => (PlaceholderKind::NumberLiteral, FillValue::Number(n.value)),
            Expr::Lit(Lit::Bool(b)) => (PlaceholderKind::BooleanLiteral, FillValue::Boolean(b.value)),
            _ => return None,
        };
        Some(Expr::Ident(tagged_ident(kind, e.span(), &value, None)))
    }

    fn reference(&mut self, id: &Ident) -> Option<Expr> {
        if !self.opts.references || self.frozen > 0 || self.concat_operand {
            return None;
        }
        let pos = id.span.lo.0;
        let b = self.env.resolve(pos, &id.sym)?;
        let ty = self.env.binding(b).ty.clone();
        let kind = match ty {
            TypeTag::Number => PlaceholderKind::NumberReference,
            TypeTag::Boolean => PlaceholderKind::BooleanReference,
            _ => return None,
        };
        let visible = self
            .env
            .candidates(pos, &ty, false)
            .iter()
            .any(|c: &Candidate| c.binding == b && c.index.is_none());
        if !visible {
            return None;
        }
        let ord = self.next_reference;
        self.next_reference += 1;
        if self.demoted.contains(&ord) {
            return None;
        }
        let value = FillValue::Reference(id.sym.to_string());
        Some(Expr::Ident(tagged_ident(kind, id.span, &value, Some(ord))))
    }

    /// Binary expression to placeholder call; operands already rewritten.
    fn expression(&mut self, b: &mut BinExpr) -> Option<Expr> {
        let lt = self.env.expr_type(&b.left);
        let rt = self.env.expr_type(&b.right);
        let eligible = self.opts.expressions
            && self.frozen == 0
            && !contains_cond(&b.left)
            && !contains_cond(&b.right);
        let kind = if eligible { expression_kind(b.op, &lt, &rt) } else { None };
        let concat = b.op == BinaryOp::Add && !(lt == TypeTag::Number && rt == TypeTag::Number);
        let was = self.concat_operand;
        for side in [&mut b.left, &mut b.right] {
            self.concat_operand = concat && matches!(&**side, Expr::Lit(_) | Expr::Ident(_));
            side.visit_mut_with(self);
        }
        self.concat_operand = was;
        let kind = kind?;
        let op = b.op.as_str().to_string();
        let tag = tagged_ident(
            PlaceholderKind::Expression(kind),
            DUMMY_SP,
            &FillValue::Operator(op.clone()),
            None,
        );
        Some(Expr::Call(CallExpr {
            span: b.span,
            callee: Callee::Expr(Box::new(Expr::Ident(tag))),
            args: [(*b.left).clone(), (*b.right).clone(), js::str_expr(&op)]
                .into_iter()
                .map(|e| ExprOrSpread {
                    spread: None,
                    expr: Box::new(e),
                })
                .collect(),
            ..Default::default()
        }))
    }
}

impl VisitMut for Abstractor<'_> {
    fn visit_mut_expr(&mut self, e: &mut Expr) {
        match e {
            Expr::Lit(_) => {
                if let Some(new) = self.literal(e) {
                    *e = new;
                }
            }
            Expr::Ident(id) => {
                let id = id.clone();
                if let Some(new) = self.reference(&id) {
                    *e = new;
                }
            }
            Expr::Bin(b) => {
                if let Some(new) = self.expression(b) {
                    *e = new;
                }
            }
            Expr::Cond(c) => self.freeze(c),
            Expr::Update(_) => {}
            Expr::Unary(u) if u.op == UnaryOp::Delete => {}
            Expr::Tpl(t) => self.freeze(t),
            Expr::TaggedTpl(_) => {}
            Expr::New(n) => {
                n.callee.visit_mut_with(self);
                if let Some(args) = &mut n.args {
                    self.freeze(args);
                }
            }
            Expr::Call(c) => {
                c.callee.visit_mut_with(self);
                let method = matches!(&c.callee, Callee::Expr(x) if matches!(&**x, Expr::Member(_) | Expr::SuperProp(_)));
                if method {
                    self.freeze(&mut c.args);
                } else {
                    c.args.visit_mut_with(self);
                }
            }
            _ => {
                let was = self.concat_operand;
                self.concat_operand = false;
                e.visit_mut_children_with(self);
                self.concat_operand = was;
            }
        }
    }

    fn visit_mut_member_prop(&mut self, p: &mut MemberProp) {
        if let MemberProp::Computed(c) = p {
            self.freeze(c);
        }
    }

    fn visit_mut_super_prop(&mut self, p: &mut SuperProp) {
        if let SuperProp::Computed(c) = p {
            self.freeze(c);
        }
    }

    fn visit_mut_prop_name(&mut self, _: &mut PropName) {}

    fn visit_mut_assign_expr(&mut self, a: &mut AssignExpr) {
        // targets stay concrete; `+=` may be string concatenation
        if let AssignTarget::Simple(SimpleAssignTarget::Member(m)) = &mut a.left {
            m.obj.visit_mut_with(self);
            m.prop.visit_mut_with(self);
        }
        let was = self.concat_operand;
        self.concat_operand = a.op == AssignOp::AddAssign && matches!(&*a.right, Expr::Lit(_) | Expr::Ident(_));
        if a.op == AssignOp::AddAssign {
            // the placeholder would be typed from an unknown target
            self.freeze(&mut a.right);
        } else {
            a.right.visit_mut_with(self);
        }
        self.concat_operand = was;
    }

    fn visit_mut_for_stmt(&mut self, f: &mut ForStmt) {
        self.freeze(&mut f.init);
        self.freeze(&mut f.test);
        self.freeze(&mut f.update);
        f.body.visit_mut_with(self);
    }

    fn visit_mut_while_stmt(&mut self, w: &mut WhileStmt) {
        self.freeze(&mut w.test);
        w.body.visit_mut_with(self);
    }

    fn visit_mut_do_while_stmt(&mut self, d: &mut DoWhileStmt) {
        d.body.visit_mut_with(self);
        self.freeze(&mut d.test);
    }

    fn visit_mut_for_in_stmt(&mut self, f: &mut ForInStmt) {
        self.freeze(&mut f.right);
        f.body.visit_mut_with(self);
    }

    fn visit_mut_for_of_stmt(&mut self, f: &mut ForOfStmt) {
        self.freeze(&mut f.right);
        f.body.visit_mut_with(self);
    }

    fn visit_mut_switch_case(&mut self, c: &mut SwitchCase) {
        // duplicate case values change dispatch
        self.freeze(&mut c.test);
        c.cons.visit_mut_with(self);
    }
}

fn parse_tag(sym: &str) -> Option<(PlaceholderKind, FillValue, Option<usize>)> {
    let rest = sym.strip_prefix(TAG_PREFIX)?;
    let (name, payload) = rest.split_once('|')?;
    let kind = sketch::ident_placeholder(name).or_else(|| sketch::expression_callee(name).map(PlaceholderKind::Expression))?;
    let (value, reference): (FillValue, Option<usize>) = serde_json::from_str(payload).ok()?;
    Some((kind, value, reference))
}

struct SiteCollector(Vec<Site>);

impl Visit for SiteCollector {
    fn visit_ident(&mut self, id: &Ident) {
        if let Some((kind, value, reference)) = parse_tag(&id.sym) {
            self.0.push(Site { kind, value, reference });
        }
    }
}

fn strip_tags(mut p: Program) -> Program {
    struct Strip;
    impl VisitMut for Strip {
        fn visit_mut_ident(&mut self, id: &mut Ident) {
            if let Some((kind, _, _)) = parse_tag(&id.sym) {
                id.sym = kind.name().into();
            }
        }
    }
    p.visit_mut_with(&mut Strip);
    p
}

/// Placeholder positions of a parsed sketch in plain pre-order.
fn sketch_sites(s: &Sketch) -> Vec<(PlaceholderKind, Location, bool)> {
    struct C<'a>(&'a Sketch, Vec<(PlaceholderKind, Location, bool)>);
    impl Visit for C<'_> {
        fn visit_ident(&mut self, id: &Ident) {
            if let Some(k) = sketch::ident_placeholder(&id.sym) {
                self.1.push((k, self.0.location(id.span.lo), false));
            }
        }
        fn visit_call_expr(&mut self, c: &CallExpr) {
            match sketch::placeholder_call(c) {
                Some(k) => {
                    self.1.push((PlaceholderKind::Expression(k), self.0.location(c.span.lo), true));
                    // the callee ident is not a placeholder
                    c.args.visit_with(self);
                }
                None => c.visit_children_with(self),
            }
        }
    }
    let mut c = C(s, Vec::new());
    s.ast().visit_with(&mut c);
    c.1
}

#[derive(Debug, Error)]
enum Failure {
    #[error("reference site {0} not reproducible")]
    Reference(usize),
    #[error("{0}")]
    Other(String),
}

/// Answers fill decisions from the recorded site values.
struct MapChooser {
    map: HashMap<(Location, bool), Site>,
    failed_reference: Option<usize>,
}

impl MapChooser {
    fn get(&self, at: Location, op: bool) -> Result<&Site, FillError> {
        self.map.get(&(at, op)).ok_or(FillError::Replay {
            location: at,
            message: "no recorded site".into(),
        })
    }
}

impl Chooser for MapChooser {
    fn number(&mut self, at: Location) -> Result<f64, FillError> {
        match &self.get(at, false)?.value {
            FillValue::Number(v) => Ok(*v),
            _ => Err(FillError::Replay {
                location: at,
                message: "expected number".into(),
            }),
        }
    }

    fn boolean(&mut self, at: Location) -> Result<bool, FillError> {
        match &self.get(at, false)?.value {
            FillValue::Boolean(b) => Ok(*b),
            _ => Err(FillError::Replay {
                location: at,
                message: "expected boolean".into(),
            }),
        }
    }

    fn reference(&mut self, at: Location, candidates: &[Candidate]) -> Result<Option<usize>, FillError> {
        let site = self.get(at, false)?.clone();
        let FillValue::Reference(name) = &site.value else {
            return Ok(None);
        };
        match candidates.iter().position(|c| c.index.is_none() && &c.name == name) {
            Some(i) => Ok(Some(i)),
            None => {
                self.failed_reference = site.reference;
                Err(FillError::Replay {
                    location: at,
                    message: format!("`{name}` is not a candidate here"),
                })
            }
        }
    }

    fn operator(&mut self, at: Location, operators: &[String]) -> Result<usize, FillError> {
        match &self.get(at, true)?.value {
            FillValue::Operator(op) => operators.iter().position(|o| o == op).ok_or(FillError::Replay {
                location: at,
                message: format!("operator `{op}` not offered"),
            }),
            _ => Err(FillError::Replay {
                location: at,
                message: "expected operator".into(),
            }),
        }
    }
}

fn round_trip(source: &Program, built: &Built, path: &str) -> Result<ExtractionRecord, Failure> {
    let text = js::print(&built.program);
    let origin = Origin::Extracted(path.to_string());
    let sketch = sketch::parse_sketch_with_origin(&text, origin).map_err(|e| Failure::Other(format!("sketch reparse: {e}")))?;
    let at = sketch_sites(&sketch);
    if at.len() != built.sites.len() || at.iter().zip(&built.sites).any(|(a, s)| a.0 != s.kind) {
        return Err(Failure::Other("placeholder layout changed on reparse".into()));
    }
    let map = at
        .iter()
        .zip(&built.sites)
        .map(|((_, loc, op), site)| ((*loc, *op), site.clone()))
        .collect();
    let mut chooser = MapChooser {
        map,
        failed_reference: None,
    };
    let filled = match filler::fill_with(&sketch, &mut chooser) {
        Ok(f) => f,
        Err(e) => {
            return Err(match chooser.failed_reference {
                Some(ord) => Failure::Reference(ord),
                None => Failure::Other(e.to_string()),
            })
        }
    };
    let refilled = js::parse(&filled.source_text).map_err(|e| Failure::Other(format!("refill reparse: {e}")))?;
    if !js::ast_eq(&refilled.program, source) {
        return Err(Failure::Other("refill differs from source".into()));
    }
    let record = ExtractionRecord {
        source_path: path.to_string(),
        sketch,
        original_values: filled.substitutions,
        demoted_references: 0,
    };
    // the recorded values must also replay through the public path
    match record.refill() {
        Ok(t) if t == filled.source_text => Ok(record),
        Ok(_) => Err(Failure::Other("replay output differs".into())),
        Err(e) => Err(Failure::Other(format!("replay: {e}"))),
    }
}

/// Corpus run summary.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub files: usize,
    pub extracted: usize,
    pub skipped: BTreeMap<String, usize>,
    pub placeholders: usize,
    pub demoted_references: usize,
}

impl CorpusSummary {
    pub fn skipped_total(&self) -> usize {
        self.skipped.values().sum()
    }
}

/// `.js` files under `dir`, sorted, optionally sampled without replacement.
pub fn corpus_files(dir: &Path, sample: Option<usize>, seed: u64) -> std::io::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "js") {
                files.push(p);
            }
        }
    }
    files.sort();
    if let Some(n) = sample {
        let mut rng = Rng::new(seed);
        // partial Fisher-Yates
        let n = n.min(files.len());
        for i in 0..n {
            let j = i + rng.index(files.len() - i);
            files.swap(i, j);
        }
        files.truncate(n);
        files.sort();
    }
    Ok(files)
}

/// Extracts every file; results keep the input order.
pub fn extract_corpus(
    files: &[PathBuf],
    opts: ExtractOptions,
) -> (Vec<(PathBuf, Result<ExtractionRecord, ExtractError>)>, CorpusSummary) {
    let results: Vec<_> = files
        .par_iter()
        .map(|f| (f.clone(), extract_file(f, opts)))
        .collect();
    let mut summary = CorpusSummary {
        files: files.len(),
        ..Default::default()
    };
    for (_, r) in &results {
        match r {
            Ok(rec) => {
                summary.extracted += 1;
                summary.placeholders += rec.sketch.placeholders.len();
                summary.demoted_references += rec.demoted_references;
            }
            Err(e) => *summary.skipped.entry(e.reason()).or_default() += 1,
        }
    }
    (results, summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sketch_text(src: &str) -> String {
        extract(src).unwrap().sketch.source_text
    }

    fn same(a: &str, b: &str) -> bool {
        let a = sketch::parse_sketch(a).unwrap();
        let b = sketch::parse_sketch(b).unwrap();
        js::ast_eq(a.ast(), b.ast())
    }

    #[test]
    fn three_line_example() {
        let got = sketch_text("let x=10; let y=20; let z=x+y;");
        assert!(
            same(
                &got,
                "let x=numberLiteral; let y=numberLiteral; let z=arithmetic(numberReference, numberReference, +);"
            ),
            "{got}"
        );
        let rec = extract("let x=10; let y=20; let z=x+y;").unwrap();
        assert_eq!(
            rec.values(),
            [
                FillValue::Number(10.0),
                FillValue::Number(20.0),
                FillValue::Reference("x".into()),
                FillValue::Reference("y".into()),
                FillValue::Operator("+".into()),
            ]
        );
    }

    #[test]
    fn no_sites_is_unchanged() {
        let rec = extract("console.log('hi')").unwrap();
        assert!(rec.original_values.is_empty());
        assert!(!rec.sketch.has_placeholders());
        assert!(js::ast_eq_text(&rec.sketch.source_text, "console.log('hi')").unwrap());
    }

    #[test]
    fn refill_reproduces_source() {
        let src = "let a = 3, ok = true;\nfunction f(n) { if (ok && n > a) { return n * 2; } return -a; }\nconsole.log(f(5), a - 1 < 7);";
        let rec = extract(src).unwrap();
        assert!(js::ast_eq_text(&rec.refill().unwrap(), src).unwrap());
        assert!(rec.sketch.source_text.contains("logic("));
    }

    #[test]
    fn string_concat_left_concrete() {
        let got = sketch_text("let n = 2; console.log('n=' + n + 1);");
        assert!(got.contains("+ n + 1") || got.contains("+n+1"), "{got}");
        assert!(got.contains("numberLiteral"), "{got}");
    }

    #[test]
    fn skipped_positions() {
        let src = "let arr = [1, 2];\nfor (let i = 0; i < 2; i++) { console.log(arr[0], arr.slice(1)); }\nlet t = i2 => i2 ? 1 : 0;\nswitch (3) { case 3: break; }\nnew Array(4);";
        let rec = extract(src).unwrap();
        let kinds: Vec<_> = rec.original_values.iter().map(|s| s.value.clone()).collect();
        // array elements and the switch discriminant only
        assert_eq!(kinds, [FillValue::Number(1.0), FillValue::Number(2.0), FillValue::Number(3.0)]);
    }

    #[test]
    fn unsupported_inputs() {
        assert!(matches!(extract("export const a = 1;"), Err(ExtractError::Unsupported(_))));
        assert!(matches!(extract("let numberLiteral = 1;"), Err(ExtractError::Unsupported(_))));
        assert!(matches!(extract("let = ;"), Err(ExtractError::Parse(_))));
    }

    #[test]
    fn sketch_is_valid() {
        let src = "var b = false; let k = 1.5; k = k * 2; if (!b) { console.log(k >= 3 || b); }";
        let rec = extract(src).unwrap();
        assert!(sketch::is_fillable(&sketch::validate_sketch(&rec.sketch)));
        assert!(js::ast_eq_text(&rec.refill().unwrap(), src).unwrap());
    }

    #[test]
    fn no_new_identifiers() {
        let src = "let p = 1; { let q = p + 2; console.log(q > p); }";
        let rec = extract(src).unwrap();
        let ids = |t: &str| -> std::collections::BTreeSet<String> {
            let mut out = Default::default();
            struct C<'a>(&'a mut std::collections::BTreeSet<String>);
            impl Visit for C<'_> {
                fn visit_ident(&mut self, i: &Ident) {
                    self.0.insert(i.sym.to_string());
                }
            }
            js::parse(t).unwrap().program.visit_with(&mut C(&mut out));
            out
        };
        let src_ids = ids(src);
        for i in ids(&rec.sketch.source_text) {
            let placeholder = sketch::ident_placeholder(&i).is_some() || sketch::expression_callee(&i).is_some();
            assert!(placeholder || src_ids.contains(&i), "{i}");
        }
    }
}
