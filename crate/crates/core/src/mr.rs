//! Semantics-preserving program rewrites (metamorphic relations).
//!
//! Three relations, each with an inject and a remove direction:
//!
//! * algebraic: `x * 1`, `x - 0`, `x / 1` with `x` numeric; `x + 0` and
//!   `(x + y) - y` only over number literals, since `-0 + 0` is `0` and float
//!   addition does not cancel in general.
//! * control_flow: `if (true) S` and nested `if (a) { if (b) S }` become `S`
//!   and `if (a && b) S`; injection wraps expression statements in `if (true)`.
//! * dead_code: `if (false) { ... }` blocks built from a closed template set,
//!   recognized structurally on removal.
//!
//! Inject picks sites from a seeded draw. Remove rewrites every site, so it
//! is idempotent.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use swc_common::DUMMY_SP;
use swc_ecma_ast::*;
use swc_ecma_visit::{Visit, VisitMut, VisitMutWith, VisitWith};
use thiserror::Error;

use crate::js;
use crate::rng::Rng;
use crate::scope::{ScopeEnv, TypeTag};

#[derive(Debug, Error)]
pub enum MrError {
    #[error("parse error: {0}")]
    Parse(#[from] js::SyntaxError),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MrId {
    Algebraic,
    ControlFlow,
    DeadCode,
}

impl MrId {
    pub const ALL: [MrId; 3] = [MrId::Algebraic, MrId::ControlFlow, MrId::DeadCode];

    pub fn label(self) -> &'static str {
        match self {
            MrId::Algebraic => "algebraic",
            MrId::ControlFlow => "control_flow",
            MrId::DeadCode => "dead_code",
        }
    }
}

impl std::str::FromStr for MrId {
    type Err = MrError;
    fn from_str(s: &str) -> Result<Self, MrError> {
        match s.replace('-', "_").as_str() {
            "algebraic" => Ok(MrId::Algebraic),
            "control_flow" => Ok(MrId::ControlFlow),
            "dead_code" => Ok(MrId::DeadCode),
            _ => Err(MrError::UnknownRelation(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Inject,
    Remove,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetamorphicRelation {
    pub id: MrId,
    pub direction: Direction,
    #[serde(default)]
    pub rng_seed: u64,
}

impl MetamorphicRelation {
    pub fn new(id: MrId, direction: Direction, rng_seed: u64) -> Self {
        MetamorphicRelation { id, direction, rng_seed }
    }

    /// The direction applied to freshly filled programs, which rarely
    /// contain removable sites.
    pub fn injecting(id: MrId, rng_seed: u64) -> Self {
        Self::new(id, Direction::Inject, rng_seed)
    }

    pub fn label(&self) -> String {
        let d = match self.direction {
            Direction::Inject => "inject",
            Direction::Remove => "remove",
        };
        format!("{}:{d}", self.id.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MrOutcome {
    pub source_text: String,
    /// Rewritten sites; zero means the input came back unchanged.
    pub applied: usize,
}

pub fn apply_mr(p: &str, mr: MetamorphicRelation) -> Result<MrOutcome, MrError> {
    let parsed = js::parse(p)?;
    let mut program = parsed.program.clone();
    let mut rng = Rng::new(mr.rng_seed);
    let applied = match (mr.id, mr.direction) {
        (MrId::Algebraic, dir) => {
            let env = ScopeEnv::analyze(&parsed.program);
            let mut pass = Algebraic {
                env: &env,
                inject: dir == Direction::Inject,
                seen: 0,
                chosen: None,
                applied: 0,
            };
            if pass.inject {
                // first pass counts sites, second rewrites the chosen ones
                program.clone().visit_mut_with(&mut pass);
                let sites = choose(&mut rng, pass.seen);
                let mut sites: Vec<usize> = sites.into_iter().collect();
                sites.sort_unstable();
                pass.chosen = Some(sites.into_iter().map(|i| (i, rng.next_u64())).collect());
                pass.seen = 0;
            }
            program.visit_mut_with(&mut pass);
            pass.applied
        }
        (MrId::ControlFlow, Direction::Remove) => {
            let mut pass = ControlFlowRemove { applied: 0 };
            program.visit_mut_with(&mut pass);
            pass.applied
        }
        (MrId::ControlFlow, Direction::Inject) => {
            let mut count = WrapSites { n: 0, chosen: None, applied: 0 };
            program.clone().visit_mut_with(&mut count);
            count.chosen = Some(choose(&mut rng, count.n));
            count.n = 0;
            program.visit_mut_with(&mut count);
            count.applied
        }
        (MrId::DeadCode, Direction::Inject) => inject_dead_code(&mut program, &mut rng),
        (MrId::DeadCode, Direction::Remove) => {
            let mut pass = DeadCodeRemove { applied: 0 };
            program.visit_mut_with(&mut pass);
            pass.applied
        }
    };
    if applied == 0 {
        return Ok(MrOutcome {
            source_text: p.to_string(),
            applied: 0,
        });
    }
    Ok(MrOutcome {
        source_text: js::print(&program),
        applied,
    })
}

/// Seeded subset of `0..n`: each site with probability 1/2, never empty
/// when `n > 0`.
fn choose(rng: &mut Rng, n: usize) -> HashSet<usize> {
    let mut out: HashSet<usize> = (0..n).filter(|_| rng.coin()).collect();
    if out.is_empty() && n > 0 {
        out.insert(rng.index(n));
    }
    out
}

fn lit_num(e: &Expr) -> Option<f64> {
    match js::unparen(e) {
        Expr::Lit(Lit::Num(n)) => Some(n.value),
        Expr::Unary(UnaryExpr {
            op: UnaryOp::Minus,
            arg,
            ..
        }) => match js::unparen(arg) {
            Expr::Lit(Lit::Num(n)) => Some(-n.value),
            _ => None,
        },
        _ => None,
    }
}

fn is_exactly(e: &Expr, v: f64) -> bool {
    lit_num(e).is_some_and(|x| x == v && x.is_sign_positive() == v.is_sign_positive())
}

/// Same value, sign of zero included.
fn same_number(a: f64, b: f64) -> bool {
    a == b && a.is_sign_positive() == b.is_sign_positive()
}

struct Algebraic<'a> {
    env: &'a ScopeEnv,
    inject: bool,
    /// Injection sites seen so far, in pre-order.
    seen: usize,
    /// Chosen site index to rewrite-form draw.
    chosen: Option<HashMap<usize, u64>>,
    applied: usize,
}

impl Algebraic<'_> {
    fn numeric(&self, e: &Expr) -> bool {
        self.env.expr_type(e) == TypeTag::Number
    }

    fn simplify(&self, b: &BinExpr) -> Option<Expr> {
        let (l, r) = (&*b.left, &*b.right);
        match b.op {
            BinaryOp::Mul if is_exactly(r, 1.0) && self.numeric(l) => Some(l.clone()),
            BinaryOp::Mul if is_exactly(l, 1.0) && self.numeric(r) => Some(r.clone()),
            BinaryOp::Div if is_exactly(r, 1.0) && self.numeric(l) => Some(l.clone()),
            BinaryOp::Sub if is_exactly(r, 0.0) && self.numeric(l) => Some(l.clone()),
            BinaryOp::Add => {
                let not_neg_zero = |e: &Expr| lit_num(e).is_some_and(|v| v != 0.0 || v.is_sign_positive());
                if is_exactly(r, 0.0) && not_neg_zero(l) {
                    Some(l.clone())
                } else if is_exactly(l, 0.0) && not_neg_zero(r) {
                    Some(r.clone())
                } else {
                    None
                }
            }
            BinaryOp::Sub => {
                // (x + y) - y over literals, only when it cancels exactly
                let Expr::Bin(inner) = js::unparen(l) else { return None };
                if inner.op != BinaryOp::Add {
                    return None;
                }
                let (x, y, y2) = (lit_num(&inner.left)?, lit_num(&inner.right)?, lit_num(r)?);
                (same_number(y, y2) && same_number((x + y) - y, x)).then(|| (*inner.left).clone())
            }
            _ => None,
        }
    }

    /// Equivalent longer form of numeric `e`, drawn from `which`.
    fn expand(e: Expr, which: u64) -> Expr {
        let lit = lit_num(&e);
        let form = match lit {
            // a zero literal would make the inner `0 + y` itself a removal site
            Some(v) if v.fract() == 0.0 && v.abs() < 1e6 && v != 0.0 => which % 4,
            Some(v) if v == 0.0 && v.is_sign_positive() => which % 3,
            _ => which % 2,
        };
        let wrapped = match form {
            0 => js::bin(BinaryOp::Mul, e, js::num_expr(1.0)),
            1 => js::bin(BinaryOp::Sub, e, js::num_expr(0.0)),
            2 => js::bin(BinaryOp::Add, e, js::num_expr(0.0)),
            _ => {
                let y = 7.0;
                js::bin(BinaryOp::Sub, js::paren(js::bin(BinaryOp::Add, e, js::num_expr(y))), js::num_expr(y))
            }
        };
        js::paren(wrapped)
    }
}

impl VisitMut for Algebraic<'_> {
    fn visit_mut_expr(&mut self, e: &mut Expr) {
        match e {
            // operands of these must stay references
            Expr::Update(_) => return,
            Expr::Unary(u) if u.op == UnaryOp::Delete => return,
            _ => {}
        }
        if self.inject {
            let site = matches!(e, Expr::Ident(_) | Expr::Lit(Lit::Num(_)) | Expr::Bin(_)) && self.numeric(e);
            let idx = self.seen;
            if site {
                self.seen += 1;
            }
            e.visit_mut_children_with(self);
            let which = self.chosen.as_ref().and_then(|c| c.get(&idx)).copied();
            if let (true, Some(which)) = (site, which) {
                *e = Self::expand(e.clone(), which);
                self.applied += 1;
            }
            return;
        }
        e.visit_mut_children_with(self);
        if let Expr::Bin(b) = e {
            if let Some(simple) = self.simplify(b) {
                *e = simple;
                self.applied += 1;
            }
        }
    }

    // keep `x` as the target of `x.p = ...` and computed keys untouched
    fn visit_mut_simple_assign_target(&mut self, t: &mut SimpleAssignTarget) {
        if let SimpleAssignTarget::Member(m) = t {
            if let MemberProp::Computed(c) = &mut m.prop {
                c.visit_mut_with(self);
            }
        }
    }

    fn visit_mut_pat(&mut self, p: &mut Pat) {
        // defaults in patterns are visited, names are not expressions
        if let Pat::Assign(a) = p {
            a.right.visit_mut_with(self);
        } else {
            p.visit_mut_children_with(self);
        }
    }
}

/// Lexical declarations at the top of a block would change scope if the
/// block were spliced into its parent.
fn block_has_scoped_decls(stmts: &[Stmt]) -> bool {
    stmts.iter().any(|s| match s {
        Stmt::Decl(Decl::Var(v)) => v.kind != VarDeclKind::Var,
        Stmt::Decl(_) => true,
        _ => false,
    })
}

/// `var` or function declarations reachable without entering a function;
/// deleting such a statement changes what its scope declares.
fn declares_hoisted(s: &Stmt) -> bool {
    struct F(bool);
    impl Visit for F {
        fn visit_var_decl(&mut self, v: &VarDecl) {
            self.0 |= v.kind == VarDeclKind::Var;
            v.visit_children_with(self);
        }
        fn visit_fn_decl(&mut self, _: &FnDecl) {
            self.0 = true;
        }
        fn visit_function(&mut self, _: &Function) {}
        fn visit_arrow_expr(&mut self, _: &ArrowExpr) {}
        fn visit_class(&mut self, _: &Class) {}
    }
    let mut f = F(false);
    s.visit_with(&mut f);
    f.0
}

fn is_lit_bool(e: &Expr, v: bool) -> bool {
    matches!(js::unparen(e), Expr::Lit(Lit::Bool(b)) if b.value == v)
}

struct ControlFlowRemove {
    applied: usize,
}

impl ControlFlowRemove {
    /// Replacement statements for `s`, or `None` to keep it.
    fn rewrite(&mut self, s: &mut Stmt) -> Option<Vec<Stmt>> {
        let Stmt::If(i) = s else { return None };
        if is_lit_bool(&i.test, true) && !i.alt.as_deref().is_some_and(declares_hoisted) {
            self.applied += 1;
            return Some(match *i.cons.clone() {
                Stmt::Block(b) if !block_has_scoped_decls(&b.stmts) => b.stmts,
                Stmt::Block(b) => vec![Stmt::Block(b)],
                other @ Stmt::Decl(_) => vec![Stmt::Block(js::block(vec![other]))],
                other => vec![other],
            });
        }
        if i.alt.is_none() {
            let inner = match &*i.cons {
                Stmt::If(inner) => Some(inner.clone()),
                Stmt::Block(b) if b.stmts.len() == 1 => match &b.stmts[0] {
                    Stmt::If(inner) => Some(inner.clone()),
                    _ => None,
                },
                _ => None,
            };
            if let Some(inner) = inner.filter(|n| n.alt.is_none()) {
                self.applied += 1;
                i.test = Box::new(js::bin(BinaryOp::LogicalAnd, *i.test.clone(), *inner.test));
                i.cons = inner.cons;
                // the merged `if` may flatten again
                return self.rewrite(s).or_else(|| Some(vec![s.clone()]));
            }
        }
        None
    }
}

impl VisitMut for ControlFlowRemove {
    fn visit_mut_stmts(&mut self, stmts: &mut Vec<Stmt>) {
        let mut out = Vec::with_capacity(stmts.len());
        for mut s in std::mem::take(stmts) {
            s.visit_mut_children_with(self);
            match self.rewrite(&mut s) {
                Some(mut replacement) => {
                    // spliced statements may expose further sites
                    replacement.visit_mut_with(self);
                    out.extend(replacement)
                }
                None => out.push(s),
            }
        }
        *stmts = out;
    }

    fn visit_mut_stmt(&mut self, s: &mut Stmt) {
        s.visit_mut_children_with(self);
        // single-statement positions such as `if (c) if (true) f();`
        if matches!(s, Stmt::If(_)) {
            if let Some(mut r) = self.rewrite(s) {
                *s = if r.len() == 1 && !matches!(r[0], Stmt::Decl(_)) {
                    r.pop().unwrap()
                } else {
                    Stmt::Block(js::block(r))
                };
            }
        }
    }
}

struct WrapSites {
    n: usize,
    chosen: Option<HashSet<usize>>,
    applied: usize,
}

impl VisitMut for WrapSites {
    fn visit_mut_stmts(&mut self, stmts: &mut Vec<Stmt>) {
        let skip = js::directive_count(stmts);
        for (k, s) in stmts.iter_mut().enumerate() {
            s.visit_mut_children_with(self);
            if k < skip || !matches!(s, Stmt::Expr(_)) {
                continue;
            }
            let idx = self.n;
            self.n += 1;
            if self.chosen.as_ref().is_some_and(|c| c.contains(&idx)) {
                let inner = std::mem::replace(s, Stmt::Empty(EmptyStmt { span: DUMMY_SP }));
                *s = Stmt::If(IfStmt {
                    span: DUMMY_SP,
                    test: Box::new(js::bool_expr(true)),
                    cons: Box::new(Stmt::Block(js::block(vec![inner]))),
                    alt: None,
                });
                self.applied += 1;
            }
        }
    }
}

const DEAD_PREFIX: &str = "__dead";

fn all_names(p: &Program) -> HashSet<String> {
    struct C(HashSet<String>);
    impl Visit for C {
        fn visit_ident(&mut self, i: &Ident) {
            self.0.insert(i.sym.to_string());
        }
    }
    let mut c = C(HashSet::new());
    p.visit_with(&mut c);
    c.0
}

fn dead_block(name: &str, rng: &mut Rng) -> Stmt {
    let n = || js::ident_expr(name);
    let mut stmts = vec![Stmt::Decl(Decl::Var(Box::new(VarDecl {
        span: DUMMY_SP,
        ctxt: Default::default(),
        kind: VarDeclKind::Let,
        declare: false,
        decls: vec![VarDeclarator {
            span: DUMMY_SP,
            name: Pat::Ident(BindingIdent {
                id: js::ident(name),
                type_ann: None,
            }),
            init: Some(Box::new(js::num_expr(rng.range_i64(0, 99) as f64))),
            definite: false,
        }],
    })))];
    for _ in 0..rng.below(3) {
        let op = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul][rng.index(3)];
        stmts.push(js::expr_stmt(Expr::Assign(AssignExpr {
            span: DUMMY_SP,
            op: AssignOp::Assign,
            left: AssignTarget::Simple(SimpleAssignTarget::Ident(BindingIdent {
                id: js::ident(name),
                type_ann: None,
            })),
            right: Box::new(js::bin(op, n(), js::num_expr(rng.range_i64(1, 9) as f64))),
        })));
    }
    if rng.coin() {
        stmts.push(js::expr_stmt(js::call(js::member(js::ident_expr("console"), "log"), vec![n()])));
    }
    Stmt::If(IfStmt {
        span: DUMMY_SP,
        test: Box::new(js::bool_expr(false)),
        cons: Box::new(Stmt::Block(js::block(stmts))),
        alt: None,
    })
}

/// True for blocks produced by [`dead_block`].
fn is_dead_template(s: &Stmt) -> bool {
    let Stmt::If(i) = s else { return false };
    if !is_lit_bool(&i.test, false) || i.alt.is_some() {
        return false;
    }
    let Stmt::Block(b) = &*i.cons else { return false };
    let Some((first, rest)) = b.stmts.split_first() else { return false };
    let name = match first {
        Stmt::Decl(Decl::Var(v)) if v.kind == VarDeclKind::Let && v.decls.len() == 1 => match (&v.decls[0].name, &v.decls[0].init) {
            (Pat::Ident(id), Some(init)) if id.id.sym.starts_with(DEAD_PREFIX) && matches!(**init, Expr::Lit(Lit::Num(_))) => {
                id.id.sym.to_string()
            }
            _ => return false,
        },
        _ => return false,
    };
    let is_name = |e: &Expr| matches!(e, Expr::Ident(id) if *id.sym == *name);
    rest.iter().all(|s| match s {
        Stmt::Expr(ExprStmt { expr, .. }) => match &**expr {
            Expr::Assign(AssignExpr {
                op: AssignOp::Assign,
                left: AssignTarget::Simple(SimpleAssignTarget::Ident(t)),
                right,
                ..
            }) if *t.id.sym == *name => matches!(&**right, Expr::Bin(b)
                if matches!(b.op, BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul)
                    && is_name(&b.left)
                    && matches!(*b.right, Expr::Lit(Lit::Num(_)))),
            Expr::Call(c) => {
                c.args.len() == 1
                    && is_name(&c.args[0].expr)
                    && matches!(&c.callee, Callee::Expr(e) if js::print_expr(e) == "console.log")
            }
            _ => false,
        },
        _ => false,
    })
}

/// Statement lists in pre-order, counted by `CountLists`, filled by `Insert`.
struct Insert<'a> {
    list: usize,
    plan: &'a [(usize, usize, Stmt)],
}

impl VisitMut for Insert<'_> {
    fn visit_mut_stmts(&mut self, stmts: &mut Vec<Stmt>) {
        let me = self.list;
        self.list += 1;
        stmts.visit_mut_children_with(self);
        let skip = js::directive_count(stmts);
        // insert back to front so earlier offsets stay valid
        let mut here: Vec<_> = self.plan.iter().filter(|(l, _, _)| *l == me).collect();
        here.sort_by_key(|(_, at, _)| std::cmp::Reverse(*at));
        for (_, at, s) in here {
            stmts.insert(skip + at.min(&(stmts.len() - skip)), s.clone());
        }
    }
}

struct CountLists(Vec<usize>);

impl Visit for CountLists {
    fn visit_stmts(&mut self, stmts: &[Stmt]) {
        self.0.push(stmts.len() - js::directive_count(stmts));
        stmts.visit_children_with(self);
    }
}

fn inject_dead_code(program: &mut Program, rng: &mut Rng) -> usize {
    let Program::Script(_) = program else {
        // module bodies are module items; keep them out of the template set
        return inject_module(program, rng);
    };
    let mut lists = CountLists(Vec::new());
    program.visit_with(&mut lists);
    if lists.0.is_empty() {
        return 0;
    }
    let names = all_names(program);
    let mut fresh = (0..).map(|k| format!("{DEAD_PREFIX}{k}")).filter(|n| !names.contains(n));
    let count = 1 + rng.below(3) as usize;
    let mut plan = Vec::new();
    for _ in 0..count {
        let l = rng.index(lists.0.len());
        let at = rng.index(lists.0[l] + 1);
        let name = fresh.next().unwrap();
        plan.push((l, at, dead_block(&name, rng)));
    }
    program.visit_mut_with(&mut Insert { list: 0, plan: &plan });
    count
}

fn inject_module(program: &mut Program, rng: &mut Rng) -> usize {
    let names = all_names(program);
    let name = (0..).map(|k| format!("{DEAD_PREFIX}{k}")).find(|n| !names.contains(n)).unwrap();
    let Program::Module(m) = program else { return 0 };
    let at = rng.index(m.body.len() + 1);
    m.body.insert(at, ModuleItem::Stmt(dead_block(&name, rng)));
    1
}

struct DeadCodeRemove {
    applied: usize,
}

impl VisitMut for DeadCodeRemove {
    fn visit_mut_stmts(&mut self, stmts: &mut Vec<Stmt>) {
        let before = stmts.len();
        stmts.retain(|s| !is_dead_template(s));
        self.applied += before - stmts.len();
        stmts.visit_mut_children_with(self);
    }

    fn visit_mut_module_items(&mut self, items: &mut Vec<ModuleItem>) {
        let before = items.len();
        items.retain(|i| !matches!(i, ModuleItem::Stmt(s) if is_dead_template(s)));
        self.applied += before - items.len();
        items.visit_mut_children_with(self);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::{prop_assert, prop_assert_eq, proptest};

    fn run(src: &str, id: MrId, dir: Direction, seed: u64) -> MrOutcome {
        apply_mr(src, MetamorphicRelation::new(id, dir, seed)).unwrap()
    }

    fn eq(a: &str, b: &str) -> bool {
        js::ast_eq_text(a, b).unwrap()
    }

    #[test]
    fn algebraic_examples() {
        let o = run("let a=5+0;", MrId::Algebraic, Direction::Remove, 0);
        assert!(eq(&o.source_text, "let a=5;"), "{}", o.source_text);
        let o = run("let x = 3; let b = x * 1 - 0; let c = (2 + 7) - 7;", MrId::Algebraic, Direction::Remove, 0);
        assert!(eq(&o.source_text, "let x = 3; let b = x; let c = 2;"), "{}", o.source_text);
        assert_eq!(o.applied, 3);
    }

    #[test]
    fn algebraic_skips_unsound_sites() {
        // string concatenation, -0 and inexact float cancellation
        for src in ["let s = 'a'; let t = s + 0;", "let z = -0 + 0;", "let q = (0.1 + 0.2) - 0.2;", "let u = o.k * 1;"] {
            assert_eq!(run(src, MrId::Algebraic, Direction::Remove, 0).applied, 0, "{src}");
        }
    }

    #[test]
    fn control_flow_examples() {
        let o = run("if(true){f()}", MrId::ControlFlow, Direction::Remove, 0);
        assert!(eq(&o.source_text, "f()"), "{}", o.source_text);
        let o = run("if (a) { if (b) { g(); } }", MrId::ControlFlow, Direction::Remove, 0);
        assert!(eq(&o.source_text, "if (a && b) { g(); }"), "{}", o.source_text);
        // an inner else blocks flattening
        assert_eq!(run("if (a) { if (b) g(); else h(); }", MrId::ControlFlow, Direction::Remove, 0).applied, 0);
        // lexical declarations keep their block
        let o = run("let x = 1; if (true) { let x = 2; log(x); }", MrId::ControlFlow, Direction::Remove, 0);
        assert!(eq(&o.source_text, "let x = 1; { let x = 2; log(x); }"), "{}", o.source_text);
    }

    #[test]
    fn no_sites_returns_input() {
        let src = "console.log( 'hi' )";
        for id in MrId::ALL {
            let o = run(src, id, Direction::Remove, 3);
            assert_eq!((o.source_text.as_str(), o.applied), (src, 0));
        }
    }

    #[test]
    fn dead_code_names_are_fresh() {
        let src = "let __dead0 = 1; console.log(__dead0);";
        let o = run(src, MrId::DeadCode, Direction::Inject, 9);
        assert!(o.applied >= 1);
        let p = js::parse(&o.source_text).unwrap().program;
        assert!(all_names(&p).iter().any(|n| n.starts_with("__dead") && n != "__dead0"));
    }

    #[test]
    fn injected_blocks_are_recognized() {
        let mut rng = Rng::new(4);
        for k in 0..50 {
            assert!(is_dead_template(&dead_block(&format!("__dead{k}"), &mut rng)));
        }
        let user = js::parse("if (false) { let __dead1 = 3; alert(__dead1); }").unwrap().program;
        let Program::Script(s) = user else { panic!() };
        assert!(!is_dead_template(&s.body[0]));
    }

    const PROGRAMS: &[&str] = &[
        "let a = 4; let b = true;\nfunction f(n) { if (b) { return n * a; } return n; }\nconsole.log(f(3) + 1);",
        "'use strict';\nlet s = 0;\nfor (let i = 0; i < 4; i++) { s = s + i; }\nconsole.log(s, s > 3);",
        "let o = { v: 2 };\nclass K { m(x = 1) { return x - o.v; } }\nconsole.log(new K().m(), [1, 2].map(y => y * 2));",
    ];

    proptest! {
        #[test]
        fn dead_code_inject_then_remove_is_identity(seed: u64, k in 0usize..3) {
            let p = PROGRAMS[k];
            let injected = run(p, MrId::DeadCode, Direction::Inject, seed);
            prop_assert!(injected.applied >= 1);
            let removed = run(&injected.source_text, MrId::DeadCode, Direction::Remove, seed);
            prop_assert!(eq(&removed.source_text, p));
            let again = run(&removed.source_text, MrId::DeadCode, Direction::Remove, seed);
            prop_assert_eq!(again.applied, 0);
        }

        #[test]
        fn deterministic(seed: u64, k in 0usize..3, m in 0usize..3, inject: bool) {
            let dir = if inject { Direction::Inject } else { Direction::Remove };
            let a = run(PROGRAMS[k], MrId::ALL[m], dir, seed);
            let b = run(PROGRAMS[k], MrId::ALL[m], dir, seed);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn injections_reparse_and_reverse(seed: u64, k in 0usize..3) {
            let p = PROGRAMS[k];
            let a = run(p, MrId::Algebraic, Direction::Inject, seed);
            prop_assert!(a.applied >= 1);
            let back = run(&a.source_text, MrId::Algebraic, Direction::Remove, seed);
            prop_assert!(eq(&back.source_text, p), "{}", back.source_text);
            let c = run(p, MrId::ControlFlow, Direction::Inject, seed);
            let back = run(&c.source_text, MrId::ControlFlow, Direction::Remove, seed);
            prop_assert!(eq(&back.source_text, p), "{}", back.source_text);
        }
    }
}
