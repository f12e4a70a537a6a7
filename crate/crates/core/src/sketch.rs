//! The sketch language: placeholder recognition, DSL validation and the
//! violation taxonomy used to score generated sketches.
//!
//! A sketch is ordinary JavaScript in which placeholders appear as plain
//! identifiers (`numberLiteral`, `booleanReference`, ...) or as calls to the
//! expression generators `arithmetic`, `relation` and `logic`.

mod preprocess;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use swc_common::{BytePos, Span, Spanned};
use swc_ecma_ast::*;
use swc_ecma_visit::{Visit, VisitWith};

use crate::js::{self, Location, Parsed};

pub use crate::js::SyntaxError as ParseError;
pub use preprocess::Preprocessed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Origin {
    Llm(String),
    Extracted(String),
    Handwritten,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExprKind {
    Arithmetic,
    Relation,
    Logic,
}

impl ExprKind {
    pub fn callee(self) -> &'static str {
        match self {
            ExprKind::Arithmetic => "arithmetic",
            ExprKind::Relation => "relation",
            ExprKind::Logic => "logic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaceholderKind {
    NumberLiteral,
    BooleanLiteral,
    NumberReference,
    BooleanReference,
    Expression(ExprKind),
}

impl PlaceholderKind {
    /// Canonical spelling used when printing sketches.
    pub fn name(self) -> &'static str {
        match self {
            PlaceholderKind::NumberLiteral => "numberLiteral",
            PlaceholderKind::BooleanLiteral => "booleanLiteral",
            PlaceholderKind::NumberReference => "numberReference",
            PlaceholderKind::BooleanReference => "booleanReference",
            PlaceholderKind::Expression(k) => k.callee(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PlaceholderKind::NumberLiteral => "number_literal",
            PlaceholderKind::BooleanLiteral => "boolean_literal",
            PlaceholderKind::NumberReference => "number_reference",
            PlaceholderKind::BooleanReference => "boolean_reference",
            PlaceholderKind::Expression(ExprKind::Arithmetic) => "arithmetic",
            PlaceholderKind::Expression(ExprKind::Relation) => "relation",
            PlaceholderKind::Expression(ExprKind::Logic) => "logic",
        }
    }
}

/// Identifier placeholder kind for `name`, matched case-insensitively.
pub fn ident_placeholder(name: &str) -> Option<PlaceholderKind> {
    match name.to_ascii_lowercase().as_str() {
        "numberliteral" => Some(PlaceholderKind::NumberLiteral),
        "booleanliteral" => Some(PlaceholderKind::BooleanLiteral),
        "numberreference" => Some(PlaceholderKind::NumberReference),
        "booleanreference" => Some(PlaceholderKind::BooleanReference),
        _ => None,
    }
}

/// Expression generator kind for a callee name, matched case-insensitively.
pub fn expression_callee(name: &str) -> Option<ExprKind> {
    match name.to_ascii_lowercase().as_str() {
        "arithmetic" => Some(ExprKind::Arithmetic),
        "relation" => Some(ExprKind::Relation),
        "logic" => Some(ExprKind::Logic),
        _ => None,
    }
}

/// Expression generator kind when `call` is a placeholder call.
pub fn placeholder_call(call: &CallExpr) -> Option<ExprKind> {
    match &call.callee {
        Callee::Expr(e) => match &**e {
            Expr::Ident(id) => expression_callee(&id.sym),
            _ => None,
        },
        _ => None,
    }
}

fn unsupported_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?i)^((string|object|array|null|undefined|bigint|symbol|regexp?|function|char|date|template|float|int|integer)(literal|reference|expression)|(number|boolean)expression)$",
        )
        .unwrap()
    })
}

/// True for identifiers shaped like placeholders the DSL does not support.
pub fn is_unsupported_placeholder_name(name: &str) -> bool {
    unsupported_re().is_match(name)
}

pub const BINARY_OPERATORS: &[&str] = &[
    "==", "!=", "===", "!==", "<", "<=", ">", ">=", "<<", ">>", ">>>", "+", "-", "*", "/", "%",
    "|", "^", "&", "in", "instanceof", "**",
];
pub const LOGICAL_OPERATORS: &[&str] = &["&&", "||", "??"];
pub const UNARY_OPERATORS: &[&str] = &["!", "~", "typeof", "void", "delete", "++", "--"];
const TERNARY_TOKENS: &[&str] = &["?", ":", "?:"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorClass {
    Binary(BinaryOp),
    Unary(UnaryToken),
    Ternary,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryToken {
    Op(UnaryOp),
    Increment,
    Decrement,
}

/// Canonical form of an operator token: aliases resolved, whitespace removed.
pub fn normalize_operator(tok: &str) -> String {
    let t: String = tok.chars().filter(|c| !c.is_whitespace()).collect();
    match t.to_ascii_lowercase().as_str() {
        "and" => "&&".into(),
        "or" => "||".into(),
        "not" => "!".into(),
        "typeof" | "void" | "delete" | "in" | "instanceof" => t.to_ascii_lowercase(),
        _ => t,
    }
}

pub fn binary_op_from_str(t: &str) -> Option<BinaryOp> {
    use BinaryOp::*;
    Some(match t {
        "==" => EqEq,
        "!=" => NotEq,
        "===" => EqEqEq,
        "!==" => NotEqEq,
        "<" => Lt,
        "<=" => LtEq,
        ">" => Gt,
        ">=" => GtEq,
        "<<" => LShift,
        ">>" => RShift,
        ">>>" => ZeroFillRShift,
        "+" => Add,
        "-" => Sub,
        "*" => Mul,
        "/" => Div,
        "%" => Mod,
        "|" => BitOr,
        "^" => BitXor,
        "&" => BitAnd,
        "in" => In,
        "instanceof" => InstanceOf,
        "**" => Exp,
        "&&" => LogicalAnd,
        "||" => LogicalOr,
        "??" => NullishCoalescing,
        _ => return None,
    })
}

pub fn classify_operator(tok: &str) -> OperatorClass {
    let t = normalize_operator(tok);
    if let Some(op) = binary_op_from_str(&t) {
        return OperatorClass::Binary(op);
    }
    if TERNARY_TOKENS.contains(&t.as_str()) {
        return OperatorClass::Ternary;
    }
    match t.as_str() {
        "!" => OperatorClass::Unary(UnaryToken::Op(UnaryOp::Bang)),
        "~" => OperatorClass::Unary(UnaryToken::Op(UnaryOp::Tilde)),
        "typeof" => OperatorClass::Unary(UnaryToken::Op(UnaryOp::TypeOf)),
        "void" => OperatorClass::Unary(UnaryToken::Op(UnaryOp::Void)),
        "delete" => OperatorClass::Unary(UnaryToken::Op(UnaryOp::Delete)),
        "++" => OperatorClass::Unary(UnaryToken::Increment),
        "--" => OperatorClass::Unary(UnaryToken::Decrement),
        _ => OperatorClass::Unknown,
    }
}

/// The operator token text of a placeholder-call argument in operator
/// position: string literal contents, or the identifier name for word aliases.
pub fn operator_token(arg: &ExprOrSpread) -> String {
    match js::unparen(&arg.expr) {
        Expr::Lit(Lit::Str(s)) => normalize_operator(&s.value.to_string_lossy()),
        Expr::Ident(id) => normalize_operator(&id.sym),
        other => js::print_expr(other),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", content = "value", rename_all = "snake_case")]
pub enum Operand {
    Placeholder(Box<Placeholder>),
    Identifier(String),
    Literal(String),
    NestedExpression(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placeholder {
    pub kind: PlaceholderKind,
    pub operands: Vec<Operand>,
    pub operators: Vec<String>,
    pub location: Location,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCategory {
    NoOp,
    TernaryOp,
    UnaryOp,
    UnsupportedPlaceholder,
    SelfDefinedOp,
}

impl ViolationCategory {
    pub const ALL: [ViolationCategory; 5] = [
        ViolationCategory::NoOp,
        ViolationCategory::TernaryOp,
        ViolationCategory::UnaryOp,
        ViolationCategory::UnsupportedPlaceholder,
        ViolationCategory::SelfDefinedOp,
    ];

    pub fn recoverable(self) -> bool {
        matches!(self, ViolationCategory::NoOp | ViolationCategory::UnaryOp)
    }

    pub fn label(self) -> &'static str {
        match self {
            ViolationCategory::NoOp => "no_op",
            ViolationCategory::TernaryOp => "ternary_op",
            ViolationCategory::UnaryOp => "unary_op",
            ViolationCategory::UnsupportedPlaceholder => "unsupported_placeholder",
            ViolationCategory::SelfDefinedOp => "self_defined_op",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DslViolation {
    pub category: ViolationCategory,
    pub location: Location,
    pub excerpt: String,
    pub recoverable: bool,
}

/// A parsed sketch. The AST is built from the pre-processed text; every
/// location reported by this type refers to the original `source_text`.
#[derive(Debug, Clone)]
pub struct Sketch {
    pub source_text: String,
    pub origin: Origin,
    pub placeholders: Vec<Placeholder>,
    parsed: Parsed,
    pre: Preprocessed,
    original_lines: js::LineIndex,
}

impl Sketch {
    pub fn ast(&self) -> &Program {
        &self.parsed.program
    }

    /// Content hash of the source text, hex.
    pub fn id(&self) -> String {
        content_id(&self.source_text)
    }

    /// Location in the original text of a byte position from [`Sketch::ast`].
    pub fn location(&self, pos: BytePos) -> Location {
        let off = self.pre.to_original(self.parsed.offset(pos));
        self.original_lines.location(off)
    }

    pub fn span_excerpt(&self, span: Span) -> String {
        let lo = self.pre.to_original(self.parsed.offset(span.lo));
        let hi = self.pre.to_original(self.parsed.offset(span.hi)).max(lo);
        let text = self.source_text.get(lo..hi).unwrap_or("");
        let mut out: String = text.split_whitespace().collect::<Vec<_>>().join(" ");
        if out.chars().count() > 80 {
            out = out.chars().take(77).collect::<String>() + "...";
        }
        out
    }

    /// Rewrites applied by the lexical sanitizer before parsing.
    pub fn sanitizer_repairs(&self) -> &[String] {
        &self.pre.repairs
    }

    /// Text actually handed to the parser.
    pub fn preprocessed_text(&self) -> &str {
        &self.pre.text
    }

    pub fn has_placeholders(&self) -> bool {
        !self.placeholders.is_empty()
    }
}

/// Short content hash used as a record id throughout the crate.
pub fn content_id(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(&digest[..8])
}

/// Parses sketch text. Fails only when the text is not valid ECMAScript once
/// bare operator tokens are quoted.
pub fn parse_sketch(text: &str) -> Result<Sketch, ParseError> {
    parse_sketch_with_origin(text, Origin::Handwritten)
}

pub fn parse_sketch_with_origin(text: &str, origin: Origin) -> Result<Sketch, ParseError> {
    let pre = preprocess::preprocess(text);
    let original_lines = js::LineIndex::new(text);
    let parsed = match js::parse(&pre.text) {
        Ok(p) => p,
        Err(mut e) => {
            let pre_lines = js::LineIndex::new(&pre.text);
            let off = offset_of(&pre_lines, &pre.text, e.location);
            e.location = original_lines.location(pre.to_original(off));
            return Err(e);
        }
    };
    let mut sketch = Sketch {
        source_text: text.to_string(),
        origin,
        placeholders: Vec::new(),
        parsed,
        pre,
        original_lines,
    };
    let mut c = Collector {
        sketch: &sketch,
        out: Vec::new(),
    };
    sketch.parsed.program.visit_with(&mut c);
    sketch.placeholders = c.out;
    Ok(sketch)
}

fn offset_of(lines: &js::LineIndex, text: &str, loc: Location) -> usize {
    // inverse of LineIndex::location, used only for error remapping
    let mut line = 1u32;
    let mut start = 0usize;
    for (i, b) in text.bytes().enumerate() {
        if line == loc.line {
            break;
        }
        if b == b'\n' {
            line += 1;
            start = i + 1;
        }
    }
    let off = text[start..]
        .char_indices()
        .nth(loc.column as usize)
        .map(|(i, _)| start + i)
        .unwrap_or(text.len());
    debug_assert!(lines.location(off).line == loc.line || off == text.len());
    off
}

struct Collector<'a> {
    sketch: &'a Sketch,
    out: Vec<Placeholder>,
}

impl Collector<'_> {
    fn build_call(&self, call: &CallExpr, kind: ExprKind) -> Placeholder {
        let mut operands = Vec::new();
        for arg in call.args.iter().take(2) {
            operands.push(self.operand(&arg.expr));
        }
        let operators = call.args.iter().skip(2).map(operator_token).collect();
        Placeholder {
            kind: PlaceholderKind::Expression(kind),
            operands,
            operators,
            location: self.sketch.location(call.span.lo),
        }
    }

    fn operand(&self, e: &Expr) -> Operand {
        match js::unparen(e) {
            Expr::Ident(id) => match ident_placeholder(&id.sym) {
                Some(kind) => Operand::Placeholder(Box::new(Placeholder {
                    kind,
                    operands: Vec::new(),
                    operators: Vec::new(),
                    location: self.sketch.location(id.span.lo),
                })),
                None => Operand::Identifier(id.sym.to_string()),
            },
            Expr::Call(c) => match placeholder_call(c) {
                Some(k) => Operand::Placeholder(Box::new(self.build_call(c, k))),
                None => Operand::NestedExpression(js::print_expr(e)),
            },
            Expr::Lit(_) => Operand::Literal(js::print_expr(e)),
            Expr::Unary(u) if u.op == UnaryOp::Minus && matches!(&*u.arg, Expr::Lit(Lit::Num(_))) => {
                Operand::Literal(js::print_expr(e))
            }
            other => Operand::NestedExpression(js::print_expr(other)),
        }
    }
}

impl Visit for Collector<'_> {
    fn visit_ident(&mut self, id: &Ident) {
        if let Some(kind) = ident_placeholder(&id.sym) {
            self.out.push(Placeholder {
                kind,
                operands: Vec::new(),
                operators: Vec::new(),
                location: self.sketch.location(id.span.lo),
            });
        }
    }

    // property names such as `obj.numberLiteral` are not placeholders
    fn visit_ident_name(&mut self, _: &IdentName) {}

    fn visit_call_expr(&mut self, call: &CallExpr) {
        if let Some(kind) = placeholder_call(call) {
            self.out.push(self.build_call(call, kind));
            for arg in call.args.iter().take(2) {
                arg.visit_with(self);
            }
            return;
        }
        call.visit_children_with(self);
    }
}

/// Checks DSL conformance. Never fails on a parsed sketch.
pub fn validate_sketch(s: &Sketch) -> Vec<DslViolation> {
    let mut declared = BTreeSet::new();
    s.ast().visit_with(&mut DeclaredNames(&mut declared));
    let mut v = Validator {
        sketch: s,
        declared,
        placeholder_depth: 0,
        in_reported_ternary: false,
        out: Vec::new(),
    };
    s.ast().visit_with(&mut v);
    v.out.sort_by(|a, b| a.location.cmp(&b.location).then(a.category.cmp(&b.category)));
    v.out
}

struct DeclaredNames<'a>(&'a mut BTreeSet<String>);

impl Visit for DeclaredNames<'_> {
    fn visit_pat(&mut self, p: &Pat) {
        let mut ids = Vec::new();
        js::pat_bindings(p, &mut ids);
        for id in ids {
            self.0.insert(id.sym.to_string());
        }
        p.visit_children_with(self);
    }
    fn visit_fn_decl(&mut self, f: &FnDecl) {
        self.0.insert(f.ident.sym.to_string());
        f.visit_children_with(self);
    }
    fn visit_class_decl(&mut self, c: &ClassDecl) {
        self.0.insert(c.ident.sym.to_string());
        c.visit_children_with(self);
    }
}

struct Validator<'a> {
    sketch: &'a Sketch,
    declared: BTreeSet<String>,
    placeholder_depth: usize,
    in_reported_ternary: bool,
    out: Vec<DslViolation>,
}

impl Validator<'_> {
    fn report(&mut self, category: ViolationCategory, span: Span) {
        self.out.push(DslViolation {
            category,
            location: self.sketch.location(span.lo),
            excerpt: self.sketch.span_excerpt(span),
            recoverable: category.recoverable(),
        });
    }
}

fn contains_placeholder(e: &Expr) -> bool {
    struct Finder(bool);
    impl Visit for Finder {
        fn visit_ident(&mut self, id: &Ident) {
            if ident_placeholder(&id.sym).is_some() {
                self.0 = true;
            }
        }
        fn visit_ident_name(&mut self, _: &IdentName) {}
        fn visit_call_expr(&mut self, c: &CallExpr) {
            if placeholder_call(c).is_some() {
                self.0 = true;
            }
            c.visit_children_with(self);
        }
    }
    let mut f = Finder(false);
    e.visit_with(&mut f);
    f.0
}

impl Visit for Validator<'_> {
    fn visit_call_expr(&mut self, call: &CallExpr) {
        let Some(_) = placeholder_call(call) else {
            call.visit_children_with(self);
            return;
        };
        let args = &call.args;
        if args.len() < 2 || args.iter().any(|a| a.spread.is_some()) {
            self.report(ViolationCategory::UnsupportedPlaceholder, call.span);
        } else if args.len() == 2 {
            self.report(ViolationCategory::NoOp, call.span);
        }
        for arg in args.iter().skip(2) {
            let cat = match classify_operator(&operator_token(arg)) {
                OperatorClass::Binary(_) => continue,
                OperatorClass::Unary(_) => ViolationCategory::UnaryOp,
                OperatorClass::Ternary => ViolationCategory::TernaryOp,
                OperatorClass::Unknown => ViolationCategory::SelfDefinedOp,
            };
            self.report(cat, arg.expr.span());
        }
        self.placeholder_depth += 1;
        for arg in args.iter().take(2) {
            arg.visit_with(self);
        }
        self.placeholder_depth -= 1;
    }

    fn visit_cond_expr(&mut self, c: &CondExpr) {
        let was = self.in_reported_ternary;
        if !was && (self.placeholder_depth > 0 || contains_placeholder(&Expr::Cond(c.clone()))) {
            self.report(ViolationCategory::TernaryOp, c.span);
            self.in_reported_ternary = true;
        }
        c.visit_children_with(self);
        self.in_reported_ternary = was;
    }

    fn visit_ident(&mut self, id: &Ident) {
        if is_unsupported_placeholder_name(&id.sym) && !self.declared.contains(&*id.sym) {
            self.report(ViolationCategory::UnsupportedPlaceholder, id.span);
        }
    }

    fn visit_ident_name(&mut self, _: &IdentName) {}

    fn visit_assign_expr(&mut self, a: &AssignExpr) {
        if let AssignTarget::Simple(SimpleAssignTarget::Ident(b)) = &a.left {
            if matches!(
                ident_placeholder(&b.id.sym),
                Some(PlaceholderKind::NumberLiteral | PlaceholderKind::BooleanLiteral)
            ) {
                self.report(ViolationCategory::UnsupportedPlaceholder, b.id.span);
            }
        }
        a.visit_children_with(self);
    }

    fn visit_update_expr(&mut self, u: &UpdateExpr) {
        if let Expr::Ident(id) = &*u.arg {
            if matches!(
                ident_placeholder(&id.sym),
                Some(PlaceholderKind::NumberLiteral | PlaceholderKind::BooleanLiteral)
            ) {
                self.report(ViolationCategory::UnsupportedPlaceholder, id.span);
            }
        }
        u.visit_children_with(self);
    }
}

/// True when none of the violations blocks filling.
pub fn is_fillable(violations: &[DslViolation]) -> bool {
    violations.iter().all(|v| v.recoverable)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub total: usize,
    pub valid_count: usize,
    pub parse_errors: usize,
    /// Number of sketches exhibiting each category (a sketch counts once per
    /// category no matter how many times it violates it).
    pub per_category_counts: BTreeMap<ViolationCategory, usize>,
}

impl ValidityReport {
    pub fn count(&self, c: ViolationCategory) -> usize {
        self.per_category_counts.get(&c).copied().unwrap_or(0)
    }
}

/// Outcome of checking one sketch text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchCheck {
    pub parse_error: Option<ParseError>,
    pub violations: Vec<DslViolation>,
    pub valid: bool,
}

pub fn check_sketch_text(text: &str) -> SketchCheck {
    match parse_sketch(text) {
        Ok(s) => {
            let violations = validate_sketch(&s);
            let valid = is_fillable(&violations);
            SketchCheck {
                parse_error: None,
                violations,
                valid,
            }
        }
        Err(e) => SketchCheck {
            parse_error: Some(e),
            violations: Vec::new(),
            valid: false,
        },
    }
}

/// Scores a batch of sketch texts.
pub fn classify_model_output<S: AsRef<str>>(batch: &[S]) -> ValidityReport {
    let mut report = ValidityReport {
        total: batch.len(),
        per_category_counts: ViolationCategory::ALL.iter().map(|c| (*c, 0)).collect(),
        ..Default::default()
    };
    for text in batch {
        let check = check_sketch_text(text.as_ref());
        if check.parse_error.is_some() {
            report.parse_errors += 1;
        }
        if check.valid {
            report.valid_count += 1;
        }
        let cats: BTreeSet<_> = check.violations.iter().map(|v| v.category).collect();
        for c in cats {
            *report.per_category_counts.entry(c).or_default() += 1;
        }
    }
    report
}

/// One JSON object per line.
pub fn violations_to_jsonl(vs: &[DslViolation]) -> String {
    vs.iter()
        .map(|v| serde_json::to_string(v).expect("violation serializes") + "\n")
        .collect()
}
