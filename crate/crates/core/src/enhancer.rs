//! Observability instrumentation.
//!
//! Wraps the top level in a global try/catch, traces entry and exit of every
//! block, logs a checksum of the bindings in scope before each block exit, and
//! logs function arguments on entry. Output line prefixes are a wire format
//! shared with the oracle (see [`INSTRUMENTATION_PREFIXES`]).

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use swc_common::{Span, DUMMY_SP};
use swc_ecma_ast::*;
use swc_ecma_visit::{VisitMut, VisitMutWith};
use thiserror::Error;

use crate::js::{self, Location, Parsed, SyntaxError};
use crate::scope::{ScopeEnv, ScopeId};
use crate::sketch::content_id;

pub const BLOCK_ENTER: &str = "-> Entering Block@";
pub const BLOCK_EXIT: &str = "<- Exiting Block@";
pub const CHECKSUM: &str = " --- Checksum for Block@";
pub const FN_ENTER: &str = "=> Entering function: ";
pub const GLOBAL_ERROR_MARKER: &str = "!!! GLOBAL ERROR Caught!!!";

/// The four line prefixes of the tracing instruments.
pub const INSTRUMENTATION_PREFIXES: [&str; 4] = [BLOCK_ENTER, BLOCK_EXIT, CHECKSUM, FN_ENTER];

const PRELUDE: &str = include_str!("../data/enhance_prelude.js");
const HELPER: &str = "__obs";
const CATCH_PARAM: &str = "__obsError";

#[derive(Debug, Error)]
pub enum EnhanceError {
    #[error("input does not parse: {0}")]
    Parse(#[from] SyntaxError),
    #[error("module programs (import/export) cannot be wrapped in a global try")]
    Module,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectKind {
    Prelude,
    GlobalCatch,
    BlockEnter,
    BlockExit,
    Checksum,
    FnEnter,
    /// An arrow expression body turned into a block.
    ArrowBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Injected {
    pub statement_id: usize,
    pub kind: InjectKind,
    pub anchor: Location,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentedProgram {
    pub source_text: String,
    /// Content id of the base program text.
    pub base: String,
    pub injected: Vec<Injected>,
}

impl InstrumentedProgram {
    pub fn count(&self, kind: InjectKind) -> usize {
        self.injected.iter().filter(|i| i.kind == kind).count()
    }
}

/// Instruments program text.
pub fn enhance(src: &str) -> Result<InstrumentedProgram, EnhanceError> {
    let parsed = js::parse(src)?;
    let Some(_) = js::top_level_stmts(&parsed.program) else {
        return Err(EnhanceError::Module);
    };
    let env = ScopeEnv::analyze(&parsed.program);
    let mut e = Enhancer {
        parsed: &parsed,
        env: &env,
        injected: Vec::new(),
        hint: None,
    };
    let mut program = parsed.program.clone();
    program.visit_mut_with(&mut e);
    let mut stmts = js::top_level_stmts(&program).expect("checked above");
    let directives = js::directive_count(&stmts);
    let body: Vec<Stmt> = stmts.split_off(directives);
    let origin = Location { line: 1, column: 0 };
    e.push(InjectKind::Prelude, origin);
    e.push(InjectKind::GlobalCatch, origin);
    stmts.extend(snippet(PRELUDE));
    stmts.push(Stmt::Try(Box::new(TryStmt {
        span: DUMMY_SP,
        block: js::block(body),
        handler: Some(CatchClause {
            span: DUMMY_SP,
            param: Some(Pat::Ident(BindingIdent {
                id: js::ident(CATCH_PARAM),
                type_ann: None,
            })),
            body: js::block(snippet(&format!("{HELPER}.fail({CATCH_PARAM});"))),
        }),
        finalizer: None,
    })));
    Ok(InstrumentedProgram {
        source_text: js::print(&js::script(stmts)),
        base: content_id(src),
        injected: e.injected,
    })
}

/// Removes everything [`enhance`] added.
pub fn deinstrument(q: &InstrumentedProgram) -> Result<Program, SyntaxError> {
    let parsed = js::parse(&q.source_text)?;
    let arrows: HashSet<String> = q
        .injected
        .iter()
        .filter(|i| i.kind == InjectKind::ArrowBody)
        .map(|i| i.anchor.to_string())
        .collect();
    Ok(strip(parsed.program, &arrows))
}

/// [`deinstrument`] over bare text; converted arrow bodies stay blocks.
pub fn deinstrument_text(src: &str) -> Result<Program, SyntaxError> {
    Ok(strip(js::parse(src)?.program, &HashSet::new()))
}

fn strip(mut program: Program, arrows: &HashSet<String>) -> Program {
    program.visit_mut_with(&mut Stripper { arrows });
    let stmts = js::top_level_stmts(&program).unwrap_or_default();
    let mut out = Vec::new();
    for s in stmts {
        if is_prelude(&s) {
            continue;
        }
        match s {
            Stmt::Try(t) if is_global_try(&t) => out.extend(t.block.stmts),
            other => out.push(other),
        }
    }
    match program {
        Program::Script(_) => js::script(out),
        Program::Module(m) => Program::Module(Module {
            body: out.into_iter().map(ModuleItem::Stmt).collect(),
            ..m
        }),
    }
}

fn is_prelude(s: &Stmt) -> bool {
    matches!(s, Stmt::Decl(Decl::Var(v)) if v.decls.len() == 1
        && matches!(&v.decls[0].name, Pat::Ident(b) if &*b.id.sym == HELPER))
}

fn is_global_try(t: &TryStmt) -> bool {
    t.finalizer.is_none()
        && matches!(&t.handler, Some(CatchClause { param: Some(Pat::Ident(b)), .. }) if &*b.id.sym == CATCH_PARAM)
}

/// Kind of an injected tracing statement, with the block id it carries.
pub fn injected_kind(s: &Stmt) -> Option<(InjectKind, String)> {
    let Stmt::Expr(ExprStmt { expr, .. }) = s else { return None };
    let Expr::Call(c) = &**expr else { return None };
    let Callee::Expr(callee) = &c.callee else { return None };
    if js::print_expr(callee) != "console.log" || c.args.len() != 1 {
        return None;
    }
    let lit = |e: &Expr| match e {
        Expr::Lit(Lit::Str(s)) => Some(s.value.to_string_lossy().into_owned()),
        _ => None,
    };
    let arg = &*c.args[0].expr;
    if let Some(text) = lit(arg) {
        if let Some(id) = text.strip_prefix(BLOCK_ENTER) {
            return Some((InjectKind::BlockEnter, id.to_string()));
        }
        if let Some(id) = text.strip_prefix(BLOCK_EXIT) {
            return Some((InjectKind::BlockExit, id.to_string()));
        }
        return None;
    }
    if let Expr::Bin(BinExpr { op: BinaryOp::Add, left, right, .. }) = arg {
        let helper_call = matches!(&**right, Expr::Call(CallExpr { callee: Callee::Expr(f), .. })
            if js::print_expr(f).starts_with(&format!("{HELPER}.")));
        let text = lit(left)?;
        if !helper_call {
            return None;
        }
        if let Some(rest) = text.strip_prefix(CHECKSUM) {
            let id = rest.trim_end_matches(" --- ").to_string();
            return Some((InjectKind::Checksum, id));
        }
        if let Some(rest) = text.strip_prefix(FN_ENTER) {
            return Some((InjectKind::FnEnter, rest.trim_end_matches(" Arguments: ").to_string()));
        }
    }
    None
}

struct Stripper<'a> {
    arrows: &'a HashSet<String>,
}

impl VisitMut for Stripper<'_> {
    fn visit_mut_stmts(&mut self, stmts: &mut Vec<Stmt>) {
        stmts.retain(|s| injected_kind(s).is_none());
        stmts.visit_mut_children_with(self);
    }

    fn visit_mut_arrow_expr(&mut self, a: &mut ArrowExpr) {
        let converted = match &*a.body {
            ArrowFunctionBody::FunctionBody(b) => b
                .stmts
                .first()
                .and_then(injected_kind)
                .is_some_and(|(k, id)| k == InjectKind::BlockEnter && self.arrows.contains(&id)),
            ArrowFunctionBody::Expr(_) => false,
        };
        a.visit_mut_children_with(self);
        if converted {
            if let ArrowFunctionBody::FunctionBody(b) = &mut *a.body {
                if let [Stmt::Return(ReturnStmt { arg: Some(e), .. })] = b.stmts.as_mut_slice() {
                    let e = std::mem::replace(e, Box::new(js::num_expr(0.0)));
                    *a.body = ArrowFunctionBody::Expr(e);
                }
            }
        }
    }
}

struct ClearSpans;

impl VisitMut for ClearSpans {
    fn visit_mut_span(&mut self, s: &mut Span) {
        *s = DUMMY_SP;
    }
}

fn snippet(src: &str) -> Vec<Stmt> {
    let mut p = js::parse(src).expect("instrumentation snippet parses").program;
    p.visit_mut_with(&mut ClearSpans);
    js::top_level_stmts(&p).expect("snippet is a script")
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

struct Enhancer<'a> {
    parsed: &'a Parsed,
    env: &'a ScopeEnv,
    injected: Vec<Injected>,
    /// Name for the next function node, from its syntactic context.
    hint: Option<String>,
}

struct FnEntry {
    name: String,
    params: Vec<String>,
}

impl Enhancer<'_> {
    fn loc(&self, pos: swc_common::BytePos) -> Location {
        self.parsed.location(pos)
    }

    fn push(&mut self, kind: InjectKind, anchor: Location) {
        let statement_id = self.injected.len();
        self.injected.push(Injected {
            statement_id,
            kind,
            anchor,
        });
    }

    fn checksum_names(&self, scope: Option<ScopeId>, pos: u32) -> Vec<String> {
        let Some(scope) = scope else { return Vec::new() };
        self.env
            .in_scope(scope, pos)
            .into_iter()
            .map(|b| self.env.binding(b).name.clone())
            .filter(|n| !n.starts_with(HELPER))
            .collect()
    }

    /// Adds enter/fn-entry logs at the front and checksum/exit logs at the end.
    fn instrument(&mut self, stmts: &mut Vec<Stmt>, at: Location, scope: Option<ScopeId>, end: u32, entry: Option<FnEntry>) {
        let id = at.to_string();
        let front = if entry.is_some() { js::directive_count(stmts) } else { 0 };
        let mut head = snippet(&format!("console.log({});", quote(&format!("{BLOCK_ENTER}{id}"))));
        self.push(InjectKind::BlockEnter, at);
        if let Some(FnEntry { name, params }) = entry {
            let thunks: Vec<String> = params.iter().map(|p| format!("() => {p}")).collect();
            head.extend(snippet(&format!(
                "console.log({} + {HELPER}.args({}));",
                quote(&format!("{FN_ENTER}{name} Arguments: ")),
                thunks.join(", ")
            )));
            self.push(InjectKind::FnEnter, at);
        }
        stmts.splice(front..front, head);
        let entries: Vec<String> = self
            .checksum_names(scope, end)
            .iter()
            .map(|n| format!("[{}, () => {n}]", quote(n)))
            .collect();
        stmts.extend(snippet(&format!(
            "console.log({} + {HELPER}.cs({}));",
            quote(&format!("{CHECKSUM}{id} --- ")),
            entries.join(", ")
        )));
        self.push(InjectKind::Checksum, at);
        stmts.extend(snippet(&format!("console.log({});", quote(&format!("{BLOCK_EXIT}{id}")))));
        self.push(InjectKind::BlockExit, at);
    }

    fn fn_name(&mut self, start: swc_common::BytePos) -> String {
        self.hint
            .take()
            .unwrap_or_else(|| format!("<anonymous@{}>", self.loc(start)))
    }

    fn param_names<'p>(pats: impl Iterator<Item = &'p Pat>) -> Vec<String> {
        let mut ids = Vec::new();
        for p in pats {
            js::pat_bindings(p, &mut ids);
        }
        ids.into_iter().map(|i| i.sym.to_string()).collect()
    }

    fn with_hint(&mut self, name: Option<String>, f: impl FnOnce(&mut Self)) {
        self.hint = name;
        f(self);
        self.hint = None;
    }
}

fn prop_name(k: &PropName) -> Option<String> {
    match k {
        PropName::Ident(i) => Some(i.sym.to_string()),
        PropName::Str(s) => Some(s.value.to_string_lossy().into_owned()),
        PropName::Num(n) => Some(js::print_expr(&Expr::Lit(Lit::Num(n.clone())))),
        _ => None,
    }
}

fn is_function_expr(e: &Expr) -> bool {
    matches!(js::unparen(e), Expr::Fn(_) | Expr::Arrow(_))
}

impl VisitMut for Enhancer<'_> {
    fn visit_mut_expr(&mut self, e: &mut Expr) {
        if !matches!(e, Expr::Fn(_) | Expr::Arrow(_) | Expr::Paren(_)) {
            self.hint = None;
        }
        e.visit_mut_children_with(self);
    }

    fn visit_mut_block_stmt(&mut self, b: &mut BlockStmt) {
        self.hint = None;
        b.visit_mut_children_with(self);
        let scope = self.env.scope_with_span(b.span.lo.0, b.span.hi.0);
        let at = self.loc(b.span.lo);
        self.instrument(&mut b.stmts, at, scope, b.span.hi.0, None);
    }

    fn visit_mut_fn_decl(&mut self, f: &mut FnDecl) {
        let name = f.ident.sym.to_string();
        self.with_hint(Some(name), |s| f.function.visit_mut_with(s));
    }

    fn visit_mut_fn_expr(&mut self, f: &mut FnExpr) {
        if let Some(id) = &f.ident {
            self.hint = Some(id.sym.to_string());
        }
        f.function.visit_mut_with(self);
    }

    fn visit_mut_function(&mut self, f: &mut Function) {
        let name = self.fn_name(f.span.lo);
        let params = Self::param_names(f.params.iter().map(|p| &p.pat));
        f.params.visit_mut_with(self);
        let scope = self.env.scope_with_span(f.span.lo.0, f.span.hi.0);
        if let Some(body) = &mut f.body {
            body.stmts.visit_mut_with(self);
            let at = self.loc(body.span.lo);
            let end = body.span.hi.0;
            self.instrument(&mut body.stmts, at, scope, end, Some(FnEntry { name, params }));
        }
    }

    fn visit_mut_constructor(&mut self, c: &mut Constructor) {
        self.hint = None;
        let params = Self::param_names(c.params.iter().filter_map(|p| match p {
            ParamOrTsParamProp::Param(p) => Some(&p.pat),
            _ => None,
        }));
        c.params.visit_mut_with(self);
        let scope = self.env.scope_with_span(c.span.lo.0, c.span.hi.0);
        if let Some(body) = &mut c.body {
            body.stmts.visit_mut_with(self);
            let at = self.loc(body.span.lo);
            let end = body.span.hi.0;
            let entry = FnEntry {
                name: "constructor".into(),
                params,
            };
            self.instrument(&mut body.stmts, at, scope, end, Some(entry));
        }
    }

    fn visit_mut_arrow_expr(&mut self, a: &mut ArrowExpr) {
        let name = self.fn_name(a.span.lo);
        let params = Self::param_names(a.params.iter());
        a.params.visit_mut_with(self);
        let scope = self.env.scope_with_span(a.span.lo.0, a.span.hi.0);
        let (at, end, converted) = match &mut *a.body {
            ArrowFunctionBody::FunctionBody(b) => {
                b.stmts.visit_mut_with(self);
                (self.loc(b.span.lo), b.span.hi.0, false)
            }
            ArrowFunctionBody::Expr(e) => {
                e.visit_mut_with(self);
                let lo = e.span_lo();
                (self.loc(lo), a.span.hi.0, true)
            }
        };
        if converted {
            let ArrowFunctionBody::Expr(e) = std::mem::replace(
                &mut *a.body,
                ArrowFunctionBody::FunctionBody(FunctionBody {
                    span: DUMMY_SP,
                    stmts: Vec::new(),
                }),
            ) else {
                unreachable!()
            };
            if let ArrowFunctionBody::FunctionBody(b) = &mut *a.body {
                b.stmts.push(Stmt::Return(ReturnStmt {
                    span: DUMMY_SP,
                    arg: Some(e),
                }));
            }
            self.push(InjectKind::ArrowBody, at);
        }
        if let ArrowFunctionBody::FunctionBody(b) = &mut *a.body {
            self.instrument(&mut b.stmts, at, scope, end, Some(FnEntry { name, params }));
        }
    }

    fn visit_mut_var_declarator(&mut self, d: &mut VarDeclarator) {
        d.name.visit_mut_with(self);
        let hint = match (&d.name, &d.init) {
            (Pat::Ident(b), Some(init)) if is_function_expr(init) => Some(b.id.sym.to_string()),
            _ => None,
        };
        if let Some(init) = &mut d.init {
            self.with_hint(hint, |s| init.visit_mut_with(s));
        }
    }

    fn visit_mut_assign_expr(&mut self, a: &mut AssignExpr) {
        a.left.visit_mut_with(self);
        let hint = match &a.left {
            AssignTarget::Simple(SimpleAssignTarget::Ident(b)) if is_function_expr(&a.right) => Some(b.id.sym.to_string()),
            _ => None,
        };
        self.with_hint(hint, |s| a.right.visit_mut_with(s));
    }

    fn visit_mut_key_value_prop(&mut self, p: &mut KeyValueProp) {
        p.key.visit_mut_with(self);
        let hint = if is_function_expr(&p.value) { prop_name(&p.key) } else { None };
        self.with_hint(hint, |s| p.value.visit_mut_with(s));
    }

    fn visit_mut_method_prop(&mut self, m: &mut MethodProp) {
        m.key.visit_mut_with(self);
        let hint = prop_name(&m.key);
        self.with_hint(hint, |s| m.function.visit_mut_with(s));
    }

    fn visit_mut_getter_prop(&mut self, g: &mut GetterProp) {
        g.key.visit_mut_with(self);
        let hint = prop_name(&g.key);
        self.with_hint(hint, |s| g.function.visit_mut_with(s));
    }

    fn visit_mut_setter_prop(&mut self, g: &mut SetterProp) {
        g.key.visit_mut_with(self);
        let hint = prop_name(&g.key);
        self.with_hint(hint, |s| g.function.visit_mut_with(s));
    }

    fn visit_mut_class_method(&mut self, m: &mut ClassMethod) {
        m.key.visit_mut_with(self);
        let hint = prop_name(&m.key);
        self.with_hint(hint, |s| m.function.visit_mut_with(s));
    }

    fn visit_mut_private_method(&mut self, m: &mut PrivateMethod) {
        let hint = Some(format!("#{}", m.key.name));
        self.with_hint(hint, |s| m.function.visit_mut_with(s));
    }

    fn visit_mut_class_prop(&mut self, p: &mut ClassProp) {
        p.key.visit_mut_with(self);
        let hint = match &p.value {
            Some(v) if is_function_expr(v) => prop_name(&p.key),
            _ => None,
        };
        if let Some(v) = &mut p.value {
            self.with_hint(hint, |s| v.visit_mut_with(s));
        }
    }
}

trait SpanLo {
    fn span_lo(&self) -> swc_common::BytePos;
}

impl SpanLo for Box<Expr> {
    fn span_lo(&self) -> swc_common::BytePos {
        use swc_common::Spanned;
        self.span().lo
    }
}

/// Removes tracing lines (the four prefixes) and the global-catch report
/// from captured stdout.
pub fn strip_instrumentation_lines(stdout: &str) -> String {
    let mut out = Vec::new();
    let mut lines = stdout.lines();
    while let Some(l) = lines.next() {
        if INSTRUMENTATION_PREFIXES.iter().any(|p| l.starts_with(p)) {
            continue;
        }
        if l == GLOBAL_ERROR_MARKER {
            lines.next();
            continue;
        }
        out.push(l);
    }
    let mut s = out.join("\n");
    if !s.is_empty() {
        s.push('\n');
    }
    s
}

/// Removes only the four tracing prefixes.
pub fn strip_trace_lines(stdout: &str) -> String {
    let mut out = String::new();
    for l in stdout.lines() {
        if !INSTRUMENTATION_PREFIXES.iter().any(|p| l.starts_with(p)) {
            out.push_str(l);
            out.push('\n');
        }
    }
    out
}
