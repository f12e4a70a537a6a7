//! Thin layer over the swc parser and code generator.
//!
//! Everything else in the crate talks to JavaScript through this module.
//! Parse errors carry line and column; printing inserts the parentheses swc
//! codegen leaves out. Node builders and span-free AST comparison live here too.

use serde::{Deserialize, Serialize};
use swc_common::{sync::Lrc, BytePos, EqIgnoreSpan, FileName, SourceMap, Span, DUMMY_SP};
use swc_ecma_ast::*;
use swc_ecma_parser::{parse_file_as_program, EsSyntax, Syntax};
use swc_ecma_transforms_base::fixer::fixer;
use swc_ecma_visit::{VisitMut, VisitMutWith};
use thiserror::Error;

pub use swc_ecma_ast as ast;

/// A 1-based line and 0-based column (in characters).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub line: u32,
    pub column: u32,
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

/// Maps byte offsets of a source text to [`Location`]s.
#[derive(Debug, Clone)]
pub struct LineIndex {
    src: String,
    line_starts: Vec<usize>,
}

impl LineIndex {
    pub fn new(src: &str) -> Self {
        let mut line_starts = vec![0];
        for (i, b) in src.bytes().enumerate() {
            if b == b'\n' {
                line_starts.push(i + 1);
            }
        }
        LineIndex {
            src: src.to_string(),
            line_starts,
        }
    }

    pub fn location(&self, offset: usize) -> Location {
        let offset = offset.min(self.src.len());
        let line = match self.line_starts.binary_search(&offset) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let start = self.line_starts[line];
        let column = self
            .src
            .get(start..offset)
            .map(|s| s.chars().count())
            .unwrap_or(offset - start);
        Location {
            line: line as u32 + 1,
            column: column as u32,
        }
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize, Deserialize)]
#[error("syntax error at {location}: {message}")]
pub struct SyntaxError {
    pub location: Location,
    pub message: String,
}

/// A parsed program together with what is needed to turn its spans back into
/// source coordinates.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub program: Program,
    base: u32,
    pub lines: LineIndex,
}

impl Parsed {
    /// Byte offset of `pos` into the parsed text.
    pub fn offset(&self, pos: BytePos) -> usize {
        pos.0.saturating_sub(self.base) as usize
    }

    pub fn location(&self, pos: BytePos) -> Location {
        self.lines.location(self.offset(pos))
    }

    /// Whether `span` came from the parsed text (as opposed to a synthesized node).
    pub fn is_source_span(&self, span: Span) -> bool {
        !span.is_dummy() && span.lo.0 >= self.base
    }
}

/// Parses `src` as an ECMAScript script or module. Recovered parser errors are
/// reported as failures: the input must be grammatically valid as written.
pub fn parse(src: &str) -> Result<Parsed, SyntaxError> {
    let cm: Lrc<SourceMap> = Default::default();
    let fm = cm.new_source_file(Lrc::new(FileName::Anon), src.to_string());
    let base = fm.start_pos.0;
    let lines = LineIndex::new(src);
    let syntax = Syntax::Es(EsSyntax {
        allow_return_outside_function: true,
        ..Default::default()
    });
    let mut recovered = Vec::new();
    let to_err = |e: swc_ecma_parser::error::Error| {
        let span = swc_common::Spanned::span(&e);
        SyntaxError {
            location: lines.location(span.lo.0.saturating_sub(base) as usize),
            message: e.kind().msg().to_string(),
        }
    };
    let program = parse_file_as_program(&fm, syntax, EsVersion::latest(), None, &mut recovered)
        .map_err(to_err)?;
    if let Some(e) = recovered.into_iter().next() {
        return Err(to_err(e));
    }
    Ok(Parsed {
        program,
        base,
        lines,
    })
}

/// Prints a program, inserting whatever parentheses precedence requires.
pub fn print(program: &Program) -> String {
    let mut program = program.clone();
    program.visit_mut_with(&mut fixer(None));
    swc_ecma_codegen::to_code(&program)
}

pub fn print_expr(expr: &Expr) -> String {
    let program = Program::Script(Script {
        span: DUMMY_SP,
        body: vec![expr_stmt(expr.clone())],
        shebang: None,
    });
    let s = print(&program);
    s.trim_end().trim_end_matches(';').to_string()
}

struct StripParens;

impl VisitMut for StripParens {
    fn visit_mut_expr(&mut self, e: &mut Expr) {
        while let Expr::Paren(p) = e {
            *e = *p.expr.clone();
        }
        e.visit_mut_children_with(self);
    }
}

/// Structural form used for AST equality: parentheses are dropped, spans and
/// raw literal text are ignored by the comparison itself.
pub fn normalize(program: &Program) -> Program {
    let mut p = program.clone();
    p.visit_mut_with(&mut StripParens);
    p
}

pub fn ast_eq(a: &Program, b: &Program) -> bool {
    program_body(&normalize(a)).eq_ignore_span(&program_body(&normalize(b)))
}

/// Parses both texts and compares them with [`ast_eq`].
pub fn ast_eq_text(a: &str, b: &str) -> Result<bool, SyntaxError> {
    Ok(ast_eq(&parse(a)?.program, &parse(b)?.program))
}

/// Top-level items as module items, so scripts and modules compare uniformly.
fn program_body(p: &Program) -> Vec<ModuleItem> {
    match p {
        Program::Script(s) => s.body.iter().cloned().map(ModuleItem::Stmt).collect(),
        Program::Module(m) => m.body.clone(),
    }
}

pub fn script(body: Vec<Stmt>) -> Program {
    Program::Script(Script {
        span: DUMMY_SP,
        body,
        shebang: None,
    })
}

/// Top-level statements of a program; `None` when the program has module
/// declarations (import/export).
pub fn top_level_stmts(p: &Program) -> Option<Vec<Stmt>> {
    match p {
        Program::Script(s) => Some(s.body.clone()),
        Program::Module(m) => m
            .body
            .iter()
            .map(|item| match item {
                ModuleItem::Stmt(s) => Some(s.clone()),
                ModuleItem::ModuleDecl(_) => None,
            })
            .collect(),
    }
}

pub fn ident(name: &str) -> Ident {
    Ident::new_no_ctxt(name.into(), DUMMY_SP)
}

pub fn ident_expr(name: &str) -> Expr {
    Expr::Ident(ident(name))
}

/// A numeric literal; negative values become a unary minus over the magnitude
/// since literals themselves are unsigned in the grammar.
pub fn num_expr(value: f64) -> Expr {
    if value < 0.0 || (value == 0.0 && value.is_sign_negative()) {
        Expr::Unary(UnaryExpr {
            span: DUMMY_SP,
            op: UnaryOp::Minus,
            arg: Box::new(Expr::Lit(Lit::Num(Number {
                span: DUMMY_SP,
                value: -value,
                raw: None,
            }))),
        })
    } else {
        Expr::Lit(Lit::Num(Number {
            span: DUMMY_SP,
            value,
            raw: None,
        }))
    }
}

pub fn bool_expr(value: bool) -> Expr {
    Expr::Lit(Lit::Bool(Bool {
        span: DUMMY_SP,
        value,
    }))
}

pub fn str_expr(value: &str) -> Expr {
    Expr::Lit(Lit::Str(Str {
        span: DUMMY_SP,
        value: value.into(),
        raw: None,
    }))
}

pub fn paren(e: Expr) -> Expr {
    Expr::Paren(ParenExpr {
        span: DUMMY_SP,
        expr: Box::new(e),
    })
}

pub fn call(callee: Expr, args: Vec<Expr>) -> Expr {
    Expr::Call(CallExpr {
        span: DUMMY_SP,
        ctxt: Default::default(),
        callee: Callee::Expr(Box::new(callee)),
        args: args
            .into_iter()
            .map(|e| ExprOrSpread {
                spread: None,
                expr: Box::new(e),
            })
            .collect(),
        type_args: None,
    })
}

pub fn member(obj: Expr, prop: &str) -> Expr {
    Expr::Member(MemberExpr {
        span: DUMMY_SP,
        obj: Box::new(obj),
        prop: MemberProp::Ident(IdentName::new(prop.into(), DUMMY_SP)),
    })
}

pub fn index(obj: Expr, i: usize) -> Expr {
    Expr::Member(MemberExpr {
        span: DUMMY_SP,
        obj: Box::new(obj),
        prop: MemberProp::Computed(ComputedPropName {
            span: DUMMY_SP,
            expr: Box::new(num_expr(i as f64)),
        }),
    })
}

pub fn bin(op: BinaryOp, left: Expr, right: Expr) -> Expr {
    Expr::Bin(BinExpr {
        span: DUMMY_SP,
        op,
        left: Box::new(left),
        right: Box::new(right),
    })
}

pub fn unary(op: UnaryOp, arg: Expr) -> Expr {
    Expr::Unary(UnaryExpr {
        span: DUMMY_SP,
        op,
        arg: Box::new(arg),
    })
}

pub fn expr_stmt(e: Expr) -> Stmt {
    Stmt::Expr(ExprStmt {
        span: DUMMY_SP,
        expr: Box::new(e),
    })
}

pub fn block(stmts: Vec<Stmt>) -> BlockStmt {
    BlockStmt {
        span: DUMMY_SP,
        ctxt: Default::default(),
        stmts,
    }
}

/// `true` for a directive-prologue statement such as `"use strict";`.
pub fn is_directive(stmt: &Stmt) -> bool {
    matches!(stmt, Stmt::Expr(ExprStmt { expr, .. }) if matches!(&**expr, Expr::Lit(Lit::Str(_))))
}

/// Number of leading directive statements.
pub fn directive_count(stmts: &[Stmt]) -> usize {
    stmts.iter().take_while(|s| is_directive(s)).count()
}

/// Literal numeric value of `e`, looking through parentheses and unary minus.
pub fn numeric_literal_value(e: &Expr) -> Option<f64> {
    match e {
        Expr::Lit(Lit::Num(n)) => Some(n.value),
        Expr::Paren(p) => numeric_literal_value(&p.expr),
        Expr::Unary(UnaryExpr {
            op: UnaryOp::Minus,
            arg,
            ..
        }) => match &**arg {
            Expr::Lit(Lit::Num(n)) => Some(-n.value),
            _ => None,
        },
        _ => None,
    }
}

pub fn unparen(e: &Expr) -> &Expr {
    match e {
        Expr::Paren(p) => unparen(&p.expr),
        _ => e,
    }
}

/// Names bound by a binding pattern, in source order.
pub fn pat_bindings(pat: &Pat, out: &mut Vec<Ident>) {
    match pat {
        Pat::Ident(b) => out.push(b.id.clone()),
        Pat::Array(a) => {
            for p in a.elems.iter().flatten() {
                pat_bindings(p, out);
            }
        }
        Pat::Rest(r) => pat_bindings(&r.arg, out),
        Pat::Object(o) => {
            for prop in &o.props {
                match prop {
                    ObjectPatProp::KeyValue(kv) => pat_bindings(&kv.value, out),
                    ObjectPatProp::Assign(a) => out.push(a.key.id.clone()),
                    ObjectPatProp::Rest(r) => pat_bindings(&r.arg, out),
                }
            }
        }
        Pat::Assign(a) => pat_bindings(&a.left, out),
        Pat::Invalid(_) | Pat::Expr(_) => {}
    }
}
