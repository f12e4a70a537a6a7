//! Lexical scope and binding-type analysis.
//!
//! Builds the scope tree of a program, resolves identifier references to
//! bindings, and infers a flow-insensitive type tag per binding (the join over
//! its initializer and every assignment). Visibility follows a conservative
//! reading of JavaScript hoisting: `var`, functions and parameters are visible
//! throughout their scope except inside their own initializer, while `let`,
//! `const` and `class` become visible only after their declaration ends.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use swc_ecma_ast::*;
use swc_ecma_visit::{Visit, VisitWith};

use crate::sketch::{self, ExprKind, OperatorClass, PlaceholderKind};

pub type ScopeId = usize;
pub type BindingId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeTag {
    Number,
    Boolean,
    Array(Vec<TypeTag>),
    Other,
}

impl TypeTag {
    pub fn join(a: Option<TypeTag>, b: Option<TypeTag>) -> Option<TypeTag> {
        match (a, b) {
            (None, x) | (x, None) => x,
            (Some(x), Some(y)) if x == y => Some(x),
            _ => Some(TypeTag::Other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingKind {
    Var,
    Let,
    Const,
    Function,
    Param,
    Class,
    CatchParam,
}

impl BindingKind {
    fn hoisted(self) -> bool {
        matches!(
            self,
            BindingKind::Var | BindingKind::Function | BindingKind::Param | BindingKind::CatchParam
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScopeKind {
    Program,
    Function,
    Block,
}

#[derive(Debug, Clone)]
pub struct Scope {
    pub parent: Option<ScopeId>,
    pub kind: ScopeKind,
    pub lo: u32,
    pub hi: u32,
    pub bindings: Vec<BindingId>,
    children: Vec<ScopeId>,
    /// For the body of a hoisted function declaration: the earliest source
    /// position from which it may be invoked.
    callable_from: Option<u32>,
    decl_of: Option<BindingId>,
}

#[derive(Debug, Clone)]
pub struct Binding {
    pub name: String,
    pub kind: BindingKind,
    pub scope: ScopeId,
    pub decl_pos: u32,
    /// For lexical bindings, the first position at which they are visible.
    pub visible_from: u32,
    /// Lexical bindings of a `switch` case are not offered in other cases.
    pub visible_until: u32,
    /// Positions where the binding is not offered (its own initializer).
    pub hidden: Option<(u32, u32)>,
    pub ty: TypeTag,
    /// Declared in a `for` head.
    pub loop_head: bool,
    /// Element types of a never-mutated array literal binding.
    pub static_array: Option<Vec<TypeTag>>,
}

impl Binding {
    pub fn visible_at(&self, pos: u32) -> bool {
        if let Some((lo, hi)) = self.hidden {
            if pos >= lo && pos < hi {
                return false;
            }
        }
        self.kind.hoisted() || (pos >= self.visible_from && pos < self.visible_until)
    }

    pub fn assignable(&self) -> bool {
        !matches!(self.kind, BindingKind::Const | BindingKind::Class) && !self.loop_head
    }
}

/// A resolution candidate for a reference placeholder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub binding: BindingId,
    pub name: String,
    pub index: Option<usize>,
}

impl Candidate {
    pub fn text(&self) -> String {
        match self.index {
            Some(i) => format!("{}[{i}]", self.name),
            None => self.name.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Decl,
    Read,
    SafeRead,
    Write,
    MemberMutate,
}

#[derive(Debug, Clone)]
struct RawRef {
    name: String,
    scope: ScopeId,
    pos: u32,
    role: Role,
}

#[derive(Debug, Clone)]
enum DefValue {
    Init(Box<Expr>),
    Assign(AssignOp, Box<Expr>),
    Update,
    Unknown,
}

#[derive(Debug, Clone)]
struct RawDef {
    name: String,
    scope: ScopeId,
    value: DefValue,
}

/// Result of analysing one program.
#[derive(Debug, Clone)]
pub struct ScopeEnv {
    pub scopes: Vec<Scope>,
    pub bindings: Vec<Binding>,
    resolved: HashMap<(u32, String), BindingId>,
}

impl ScopeEnv {
    pub fn analyze(program: &Program) -> ScopeEnv {
        let mut b = Builder::new();
        b.push_scope(ScopeKind::Program, 0, u32::MAX);
        b.fn_stack.push(0);
        program.visit_with(&mut b);
        b.finish()
    }

    /// Innermost scope whose source range contains `pos`.
    pub fn scope_at(&self, pos: u32) -> ScopeId {
        let mut cur = 0;
        'descend: loop {
            for &c in &self.scopes[cur].children {
                let s = &self.scopes[c];
                if s.lo <= pos && pos < s.hi {
                    cur = c;
                    continue 'descend;
                }
            }
            return cur;
        }
    }

    /// Bindings visible at `pos`, innermost shadowing outer, in declaration order.
    pub fn visible_at(&self, pos: u32) -> Vec<BindingId> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut cutoff = u32::MAX;
        let mut s = Some(self.scope_at(pos));
        while let Some(id) = s {
            let scope = &self.scopes[id];
            let mut names_here = Vec::new();
            for &bid in &scope.bindings {
                let b = &self.bindings[bid];
                if seen.contains(&b.name) {
                    continue;
                }
                names_here.push(b.name.clone());
                if b.visible_at(pos) && (b.kind.hoisted() || b.visible_from <= cutoff) {
                    out.push(bid);
                }
            }
            seen.extend(names_here);
            if let Some(c) = scope.callable_from {
                cutoff = cutoff.min(c);
            }
            s = scope.parent;
        }
        out.sort_by_key(|&b| (self.bindings[b].decl_pos, b));
        out
    }

    /// Scope created for the node with exactly this source range.
    pub fn scope_with_span(&self, lo: u32, hi: u32) -> Option<ScopeId> {
        self.scopes.iter().position(|s| s.lo == lo && s.hi == hi)
    }

    /// Bindings reachable from `scope` at `pos`: every hoisted binding of the
    /// chain plus lexical ones declared before `pos`. Inner names shadow outer
    /// ones; the result is in declaration order. Unlike [`ScopeEnv::visible_at`]
    /// this ignores temporal-dead-zone hazards at run time.
    pub fn in_scope(&self, scope: ScopeId, pos: u32) -> Vec<BindingId> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut s = Some(scope);
        while let Some(id) = s {
            for &bid in &self.scopes[id].bindings {
                let b = &self.bindings[bid];
                if !seen.insert(b.name.clone()) {
                    continue;
                }
                if b.kind.hoisted() || b.visible_from <= pos {
                    out.push(bid);
                }
            }
            s = self.scopes[id].parent;
        }
        out.sort_by_key(|&b| (self.bindings[b].decl_pos, b));
        out
    }

    /// Candidates of type `want` (number or boolean) at `pos`. Assignment
    /// targets exclude constants, loop counters and array elements.
    pub fn candidates(&self, pos: u32, want: &TypeTag, lhs: bool) -> Vec<Candidate> {
        let mut out = Vec::new();
        for bid in self.visible_at(pos) {
            let b = &self.bindings[bid];
            if lhs && !b.assignable() {
                continue;
            }
            if &b.ty == want {
                out.push(Candidate {
                    binding: bid,
                    name: b.name.clone(),
                    index: None,
                });
            }
            if lhs {
                continue;
            }
            if let Some(elems) = &b.static_array {
                for (i, t) in elems.iter().enumerate() {
                    if t == want {
                        out.push(Candidate {
                            binding: bid,
                            name: b.name.clone(),
                            index: Some(i),
                        });
                    }
                }
            }
        }
        out
    }

    /// Binding an identifier occurrence refers to.
    pub fn resolve(&self, pos: u32, name: &str) -> Option<BindingId> {
        self.resolved.get(&(pos, name.to_string())).copied()
    }

    pub fn binding(&self, id: BindingId) -> &Binding {
        &self.bindings[id]
    }

    /// Type of an expression of the analysed program.
    pub fn expr_type(&self, e: &Expr) -> TypeTag {
        expr_type(e, &|pos, name| {
            self.resolve(pos, name).map(|b| Some(self.bindings[b].ty.clone()))
        })
        .unwrap_or(TypeTag::Other)
    }
}

const NON_MUTATING_METHODS: &[&str] = &[
    "slice", "indexOf", "lastIndexOf", "includes", "join", "concat", "map", "filter", "reduce",
    "reduceRight", "some", "every", "find", "findIndex", "findLast", "findLastIndex", "forEach",
    "toString", "at", "keys", "values", "entries", "flat", "flatMap",
];

#[derive(Default)]
struct Builder {
    scopes: Vec<Scope>,
    bindings: Vec<Binding>,
    stack: Vec<ScopeId>,
    fn_stack: Vec<ScopeId>,
    refs: Vec<RawRef>,
    defs: Vec<RawDef>,
    loop_head: bool,
    case_end: u32,
    pending_decl: Option<BindingId>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            case_end: u32::MAX,
            ..Default::default()
        }
    }

    fn cur(&self) -> ScopeId {
        *self.stack.last().expect("scope stack")
    }

    fn push_scope(&mut self, kind: ScopeKind, lo: u32, hi: u32) -> ScopeId {
        let id = self.scopes.len();
        let parent = self.stack.last().copied();
        self.scopes.push(Scope {
            parent,
            kind,
            lo,
            hi,
            bindings: Vec::new(),
            children: Vec::new(),
            callable_from: None,
            decl_of: None,
        });
        if let Some(p) = parent {
            self.scopes[p].children.push(id);
        }
        self.stack.push(id);
        id
    }

    fn pop_scope(&mut self) {
        self.stack.pop();
    }

    fn declare(&mut self, scope: ScopeId, id: &Ident, kind: BindingKind, visible_from: u32, hidden: Option<(u32, u32)>) {
        let name = id.sym.to_string();
        if let Some(&existing) = self.scopes[scope]
            .bindings
            .iter()
            .find(|&&b| self.bindings[b].name == name)
        {
            // redeclaration (`var x` twice, function overriding var)
            let b = &mut self.bindings[existing];
            if kind == BindingKind::Function {
                b.kind = BindingKind::Function;
            }
            return;
        }
        let bid = self.bindings.len();
        self.bindings.push(Binding {
            name,
            kind,
            scope,
            decl_pos: id.span.lo.0,
            visible_from,
            visible_until: self.case_end,
            hidden,
            ty: TypeTag::Other,
            loop_head: self.loop_head,
            static_array: None,
        });
        self.scopes[scope].bindings.push(bid);
    }

    fn record(&mut self, id: &Ident, role: Role) {
        self.refs.push(RawRef {
            name: id.sym.to_string(),
            scope: self.cur(),
            pos: id.span.lo.0,
            role,
        });
    }

    fn def(&mut self, id: &Ident, value: DefValue) {
        self.defs.push(RawDef {
            name: id.sym.to_string(),
            scope: self.cur(),
            value,
        });
    }

    fn declare_params(&mut self, scope: ScopeId, pats: &[&Pat]) {
        for p in pats {
            let mut ids = Vec::new();
            crate::js::pat_bindings(p, &mut ids);
            for id in ids {
                self.declare(scope, &id, BindingKind::Param, 0, None);
                self.with_scope(scope, |b| b.def(&id, DefValue::Unknown));
            }
        }
    }

    fn with_scope(&mut self, scope: ScopeId, f: impl FnOnce(&mut Self)) {
        self.stack.push(scope);
        f(self);
        self.stack.pop();
    }

    fn visit_operand(&mut self, e: &Expr) {
        match e {
            Expr::Ident(id) => self.record(id, Role::SafeRead),
            _ => e.visit_with(self),
        }
    }

    fn finish(self) -> ScopeEnv {
        let Builder {
            mut scopes,
            mut bindings,
            refs,
            defs,
            ..
        } = self;
        let mut resolved = HashMap::new();
        let mut mutated = vec![false; bindings.len()];
        for r in &refs {
            if let Some(b) = lookup(&scopes, &bindings, r.scope, &r.name) {
                resolved.insert((r.pos, r.name.clone()), b);
                if matches!(r.role, Role::Read | Role::MemberMutate) {
                    mutated[b] = true;
                }
            }
        }
        // earliest invocation point of each hoisted function declaration:
        // a reference at p inside other hoisted functions counts from their
        // own earliest invocation
        let mut earliest = vec![u32::MAX; bindings.len()];
        let decl_scope: HashMap<BindingId, ScopeId> = scopes
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.decl_of.map(|b| (b, i)))
            .collect();
        loop {
            let mut changed = false;
            for r in refs.iter().filter(|r| r.role != Role::Decl) {
                let Some(&target) = resolved.get(&(r.pos, r.name.clone())) else { continue };
                if !decl_scope.contains_key(&target) {
                    continue;
                }
                let mut eff = r.pos;
                let mut s = Some(r.scope);
                while let Some(id) = s {
                    if let Some(d) = scopes[id].decl_of {
                        if d != target {
                            eff = eff.min(earliest[d]);
                        }
                    }
                    s = scopes[id].parent;
                }
                if eff < earliest[target] {
                    earliest[target] = eff;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for (b, s) in decl_scope {
            scopes[s].callable_from = Some(earliest[b]);
        }

        let mut per_binding: Vec<Vec<DefValue>> = vec![Vec::new(); bindings.len()];
        for d in defs {
            if let Some(b) = lookup(&scopes, &bindings, d.scope, &d.name) {
                per_binding[b].push(d.value);
            }
        }

        for (i, b) in bindings.iter_mut().enumerate() {
            if matches!(
                b.kind,
                BindingKind::Function | BindingKind::Class | BindingKind::Param | BindingKind::CatchParam
            ) {
                per_binding[i].push(DefValue::Unknown);
            }
        }

        let mut types: Vec<Option<TypeTag>> = vec![None; bindings.len()];
        for _ in 0..64 {
            let mut changed = false;
            for i in 0..bindings.len() {
                let mut t: Option<TypeTag> = None;
                for d in &per_binding[i] {
                    let resolve = |pos: u32, name: &str| {
                        resolved
                            .get(&(pos, name.to_string()))
                            .map(|&b: &BindingId| types[b].clone())
                    };
                    let dt = match d {
                        DefValue::Init(e) => expr_type(e, &resolve),
                        DefValue::Assign(AssignOp::Assign, e) => expr_type(e, &resolve),
                        DefValue::Assign(op, e) => compound_type(*op, types[i].clone(), expr_type(e, &resolve)),
                        DefValue::Update => match &types[i] {
                            Some(TypeTag::Number) | None => Some(TypeTag::Number),
                            _ => Some(TypeTag::Other),
                        },
                        DefValue::Unknown => Some(TypeTag::Other),
                    };
                    // `let x;` and friends contribute `undefined`
                    t = TypeTag::join(t, dt.or(None));
                }
                if per_binding[i].is_empty() {
                    t = Some(TypeTag::Other);
                }
                if t != types[i] {
                    let widened = match (&types[i], &t) {
                        (Some(TypeTag::Other), _) => Some(TypeTag::Other),
                        _ => t,
                    };
                    if widened != types[i] {
                        types[i] = widened;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }

        for (i, b) in bindings.iter_mut().enumerate() {
            let t = types[i].clone().unwrap_or(TypeTag::Other);
            let single_init = per_binding[i].len() == 1 && matches!(per_binding[i][0], DefValue::Init(_));
            if let TypeTag::Array(elems) = &t {
                if single_init && !mutated[i] {
                    b.static_array = Some(elems.clone());
                }
            }
            b.ty = t;
        }
        ScopeEnv {
            scopes,
            bindings,
            resolved,
        }
    }
}

fn lookup(scopes: &[Scope], bindings: &[Binding], scope: ScopeId, name: &str) -> Option<BindingId> {
    let mut s = Some(scope);
    while let Some(id) = s {
        for &b in &scopes[id].bindings {
            if bindings[b].name == name {
                return Some(b);
            }
        }
        s = scopes[id].parent;
    }
    None
}

fn compound_type(op: AssignOp, cur: Option<TypeTag>, rhs: Option<TypeTag>) -> Option<TypeTag> {
    use AssignOp::*;
    let num = |t: &Option<TypeTag>| matches!(t, Some(TypeTag::Number) | None);
    match op {
        AndAssign | OrAssign | NullishAssign => TypeTag::join(cur, rhs),
        _ if num(&cur) && num(&rhs) => Some(TypeTag::Number),
        _ => Some(TypeTag::Other),
    }
}

fn placeholder_call_type(
    kind: ExprKind,
    call: &CallExpr,
    resolve: &Resolver,
) -> Option<TypeTag> {
    if call.args.len() < 3 {
        return Some(TypeTag::Other);
    }
    let classes: Vec<OperatorClass> = call
        .args
        .iter()
        .skip(2)
        .map(|a| sketch::classify_operator(&sketch::operator_token(a)))
        .collect();
    let lt = expr_type(&call.args[0].expr, resolve);
    let rt = expr_type(&call.args[1].expr, resolve);
    let all = |f: &dyn Fn(BinaryOp) -> bool| {
        classes
            .iter()
            .all(|c| matches!(c, OperatorClass::Binary(op) if f(*op)))
    };
    match kind {
        ExprKind::Arithmetic if all(&is_arith) => numeric_pair(lt, rt),
        ExprKind::Relation if all(&is_relational) => Some(TypeTag::Boolean),
        ExprKind::Logic if all(&is_logical) => TypeTag::join(lt, rt),
        _ => Some(TypeTag::Other),
    }
}

pub(crate) fn is_arith(op: BinaryOp) -> bool {
    use BinaryOp::*;
    matches!(
        op,
        Add | Sub | Mul | Div | Mod | Exp | LShift | RShift | ZeroFillRShift | BitOr | BitXor | BitAnd
    )
}

pub(crate) fn is_relational(op: BinaryOp) -> bool {
    use BinaryOp::*;
    matches!(op, EqEq | NotEq | EqEqEq | NotEqEq | Lt | LtEq | Gt | GtEq | In | InstanceOf)
}

pub(crate) fn is_logical(op: BinaryOp) -> bool {
    matches!(op, BinaryOp::LogicalAnd | BinaryOp::LogicalOr | BinaryOp::NullishCoalescing)
}

fn numeric_pair(l: Option<TypeTag>, r: Option<TypeTag>) -> Option<TypeTag> {
    match (l, r) {
        (None, _) | (_, None) => None,
        (Some(TypeTag::Number), Some(TypeTag::Number)) => Some(TypeTag::Number),
        _ => Some(TypeTag::Other),
    }
}

/// Resolves an identifier occurrence: `None` when it names no binding
/// (a global), `Some(None)` while the binding's type is still unknown.
pub(crate) type Resolver<'a> = dyn Fn(u32, &str) -> Option<Option<TypeTag>> + 'a;

/// Type of `e` given a resolver for identifier occurrences. `None` means
/// "not yet known" during fixpoint iteration.
pub(crate) fn expr_type(e: &Expr, resolve: &Resolver) -> Option<TypeTag> {
    match e {
        Expr::Lit(Lit::Num(_)) => Some(TypeTag::Number),
        Expr::Lit(Lit::Bool(_)) => Some(TypeTag::Boolean),
        Expr::Lit(_) => Some(TypeTag::Other),
        Expr::Ident(id) => match sketch::ident_placeholder(&id.sym) {
            Some(PlaceholderKind::NumberLiteral | PlaceholderKind::NumberReference) => Some(TypeTag::Number),
            Some(PlaceholderKind::BooleanLiteral | PlaceholderKind::BooleanReference) => Some(TypeTag::Boolean),
            _ => match resolve(id.span.lo.0, &id.sym) {
                Some(t) => t,
                None if &*id.sym == "NaN" || &*id.sym == "Infinity" => Some(TypeTag::Number),
                None => Some(TypeTag::Other),
            },
        },
        Expr::Paren(p) => expr_type(&p.expr, resolve),
        Expr::Seq(s) => s.exprs.last().and_then(|e| expr_type(e, resolve)),
        Expr::Unary(u) => match u.op {
            UnaryOp::Plus => Some(TypeTag::Number),
            UnaryOp::Minus | UnaryOp::Tilde => match expr_type(&u.arg, resolve) {
                Some(TypeTag::Number) => Some(TypeTag::Number),
                None => None,
                _ => Some(TypeTag::Other),
            },
            UnaryOp::Bang | UnaryOp::Delete => Some(TypeTag::Boolean),
            UnaryOp::TypeOf | UnaryOp::Void => Some(TypeTag::Other),
        },
        Expr::Update(u) => match expr_type(&u.arg, resolve) {
            Some(TypeTag::Number) => Some(TypeTag::Number),
            None => None,
            _ => Some(TypeTag::Other),
        },
        Expr::Bin(b) => {
            if is_relational(b.op) {
                Some(TypeTag::Boolean)
            } else if is_logical(b.op) {
                TypeTag::join(expr_type(&b.left, resolve), expr_type(&b.right, resolve))
            } else {
                numeric_pair(expr_type(&b.left, resolve), expr_type(&b.right, resolve))
            }
        }
        Expr::Cond(c) => TypeTag::join(expr_type(&c.cons, resolve), expr_type(&c.alt, resolve)),
        Expr::Assign(a) if a.op == AssignOp::Assign => expr_type(&a.right, resolve),
        Expr::Array(a) => {
            let mut elems = Vec::new();
            for el in &a.elems {
                match el {
                    Some(ExprOrSpread { spread: None, expr }) => {
                        elems.push(expr_type(expr, resolve)?);
                    }
                    _ => return Some(TypeTag::Other),
                }
            }
            Some(TypeTag::Array(elems))
        }
        Expr::Call(c) => {
            if let Some(kind) = sketch::placeholder_call(c) {
                return placeholder_call_type(kind, c, resolve);
            }
            Some(known_call_type(c).unwrap_or(TypeTag::Other))
        }
        _ => Some(TypeTag::Other),
    }
}

fn known_call_type(c: &CallExpr) -> Option<TypeTag> {
    let Callee::Expr(callee) = &c.callee else { return None };
    match &**callee {
        Expr::Member(MemberExpr {
            obj,
            prop: MemberProp::Ident(p),
            ..
        }) => match (&**obj, &*p.sym) {
            (Expr::Ident(o), _) if &*o.sym == "Math" => Some(TypeTag::Number),
            (Expr::Ident(o), "isInteger" | "isFinite" | "isNaN" | "isSafeInteger") if &*o.sym == "Number" => {
                Some(TypeTag::Boolean)
            }
            (Expr::Ident(o), "isArray") if &*o.sym == "Array" => Some(TypeTag::Boolean),
            _ => None,
        },
        Expr::Ident(f) => match &*f.sym {
            "Number" | "parseInt" | "parseFloat" => Some(TypeTag::Number),
            "Boolean" | "isNaN" | "isFinite" => Some(TypeTag::Boolean),
            _ => None,
        },
        _ => None,
    }
}

fn is_console_call(c: &CallExpr) -> bool {
    matches!(&c.callee, Callee::Expr(e) if matches!(&**e,
        Expr::Member(MemberExpr { obj, .. }) if matches!(&**obj, Expr::Ident(o) if &*o.sym == "console")))
}

impl Visit for Builder {
    fn visit_var_decl(&mut self, d: &VarDecl) {
        let kind = match d.kind {
            VarDeclKind::Var => BindingKind::Var,
            VarDeclKind::Let => BindingKind::Let,
            VarDeclKind::Const => BindingKind::Const,
        };
        let scope = if kind == BindingKind::Var {
            *self.fn_stack.last().unwrap()
        } else {
            self.cur()
        };
        for decl in &d.decls {
            let mut ids = Vec::new();
            crate::js::pat_bindings(&decl.name, &mut ids);
            let hidden = Some((decl.span.lo.0, decl.span.hi.0));
            for id in &ids {
                self.declare(scope, id, kind, d.span.hi.0, hidden);
            }
            let simple = matches!(decl.name, Pat::Ident(_));
            for id in &ids {
                let value = match (&decl.init, simple) {
                    (Some(init), true) => DefValue::Init(init.clone()),
                    (None, true) if self.loop_head => DefValue::Unknown,
                    (None, true) => DefValue::Unknown,
                    _ => DefValue::Unknown,
                };
                let target = scope;
                self.with_scope(target, |b| b.def(id, value));
                self.record_decl_ref(id, target);
            }
            // default values inside patterns may read other bindings
            if !matches!(decl.name, Pat::Ident(_)) {
                decl.name.visit_with(self);
            }
            if let Some(init) = &decl.init {
                init.visit_with(self);
            }
        }
    }

    fn visit_fn_decl(&mut self, f: &FnDecl) {
        let scope = self.cur();
        self.declare(scope, &f.ident, BindingKind::Function, 0, None);
        self.record_decl_ref(&f.ident, scope);
        self.pending_decl = self.scopes[scope]
            .bindings
            .iter()
            .copied()
            .find(|&b| self.bindings[b].name == *f.ident.sym);
        f.function.visit_with(self);
    }

    fn visit_class_decl(&mut self, c: &ClassDecl) {
        let scope = self.cur();
        self.declare(scope, &c.ident, BindingKind::Class, c.class.span.hi.0, None);
        self.record_decl_ref(&c.ident, scope);
        c.class.visit_with(self);
    }

    fn visit_fn_expr(&mut self, f: &FnExpr) {
        let scope = self.push_scope(ScopeKind::Function, f.function.span.lo.0, f.function.span.hi.0);
        self.fn_stack.push(scope);
        if let Some(id) = &f.ident {
            self.declare(scope, id, BindingKind::Function, 0, None);
        }
        self.function_inner(&f.function, scope);
        self.fn_stack.pop();
        self.pop_scope();
    }

    fn visit_function(&mut self, f: &Function) {
        let scope = self.push_scope(ScopeKind::Function, f.span.lo.0, f.span.hi.0);
        self.scopes[scope].decl_of = self.pending_decl.take();
        self.fn_stack.push(scope);
        self.function_inner(f, scope);
        self.fn_stack.pop();
        self.pop_scope();
    }

    fn visit_constructor(&mut self, c: &Constructor) {
        let scope = self.push_scope(ScopeKind::Function, c.span.lo.0, c.span.hi.0);
        self.fn_stack.push(scope);
        let pats: Vec<&Pat> = c
            .params
            .iter()
            .filter_map(|p| match p {
                ParamOrTsParamProp::Param(p) => Some(&p.pat),
                _ => None,
            })
            .collect();
        self.declare_params(scope, &pats);
        for p in &pats {
            self.visit_param_defaults(p);
        }
        if let Some(body) = &c.body {
            for s in &body.stmts {
                s.visit_with(self);
            }
        }
        self.fn_stack.pop();
        self.pop_scope();
    }

    fn visit_arrow_expr(&mut self, a: &ArrowExpr) {
        let scope = self.push_scope(ScopeKind::Function, a.span.lo.0, a.span.hi.0);
        self.fn_stack.push(scope);
        let pats: Vec<&Pat> = a.params.iter().collect();
        self.declare_params(scope, &pats);
        for p in &pats {
            self.visit_param_defaults(p);
        }
        match &*a.body {
            ArrowFunctionBody::FunctionBody(b) => {
                for s in &b.stmts {
                    s.visit_with(self);
                }
            }
            ArrowFunctionBody::Expr(e) => e.visit_with(self),
        }
        self.fn_stack.pop();
        self.pop_scope();
    }

    fn visit_block_stmt(&mut self, b: &BlockStmt) {
        self.push_scope(ScopeKind::Block, b.span.lo.0, b.span.hi.0);
        let saved = std::mem::replace(&mut self.loop_head, false);
        let saved_case = std::mem::replace(&mut self.case_end, u32::MAX);
        for s in &b.stmts {
            s.visit_with(self);
        }
        self.loop_head = saved;
        self.case_end = saved_case;
        self.pop_scope();
    }

    fn visit_static_block(&mut self, b: &StaticBlock) {
        let scope = self.push_scope(ScopeKind::Function, b.span.lo.0, b.span.hi.0);
        self.fn_stack.push(scope);
        for s in &b.body.stmts {
            s.visit_with(self);
        }
        self.fn_stack.pop();
        self.pop_scope();
    }

    fn visit_catch_clause(&mut self, c: &CatchClause) {
        let scope = self.push_scope(ScopeKind::Block, c.span.lo.0, c.span.hi.0);
        if let Some(p) = &c.param {
            let mut ids = Vec::new();
            crate::js::pat_bindings(p, &mut ids);
            for id in ids {
                self.declare(scope, &id, BindingKind::CatchParam, 0, None);
            }
        }
        c.body.visit_with(self);
        self.pop_scope();
    }

    fn visit_switch_stmt(&mut self, s: &SwitchStmt) {
        s.discriminant.visit_with(self);
        self.push_scope(ScopeKind::Block, s.span.lo.0, s.span.hi.0);
        let saved = self.case_end;
        for c in &s.cases {
            self.case_end = c.span.hi.0;
            c.test.visit_with(self);
            for st in &c.cons {
                // nested blocks reset the limit through visit_block_stmt
                st.visit_with(self);
            }
        }
        self.case_end = saved;
        self.pop_scope();
    }

    fn visit_for_stmt(&mut self, f: &ForStmt) {
        self.push_scope(ScopeKind::Block, f.span.lo.0, f.span.hi.0);
        if let Some(init) = &f.init {
            self.loop_head = true;
            init.visit_with(self);
            self.loop_head = false;
        }
        f.test.visit_with(self);
        f.update.visit_with(self);
        f.body.visit_with(self);
        self.pop_scope();
    }

    fn visit_for_in_stmt(&mut self, f: &ForInStmt) {
        self.visit_operand(&f.right);
        self.push_scope(ScopeKind::Block, f.span.lo.0, f.span.hi.0);
        self.for_head(&f.left);
        f.body.visit_with(self);
        self.pop_scope();
    }

    fn visit_for_of_stmt(&mut self, f: &ForOfStmt) {
        self.visit_operand(&f.right);
        self.push_scope(ScopeKind::Block, f.span.lo.0, f.span.hi.0);
        self.for_head(&f.left);
        f.body.visit_with(self);
        self.pop_scope();
    }

    fn visit_expr(&mut self, e: &Expr) {
        match e {
            Expr::Ident(id) => self.record(id, Role::Read),
            Expr::Bin(b) => {
                self.visit_operand(&b.left);
                self.visit_operand(&b.right);
            }
            Expr::Unary(u) if u.op == UnaryOp::Delete => {
                if let Expr::Member(m) = &*u.arg {
                    self.member_mutation(m);
                } else {
                    u.arg.visit_with(self);
                }
            }
            Expr::Unary(u) => self.visit_operand(&u.arg),
            Expr::Tpl(t) => {
                for e in &t.exprs {
                    self.visit_operand(e);
                }
            }
            Expr::Member(m) => {
                self.visit_operand(&m.obj);
                if let MemberProp::Computed(c) = &m.prop {
                    c.expr.visit_with(self);
                }
            }
            Expr::Call(c) => self.call(c),
            Expr::Update(u) => {
                match &*u.arg {
                    Expr::Ident(id) => {
                        self.record(id, Role::Write);
                        self.def(id, DefValue::Update);
                    }
                    Expr::Member(m) => self.member_mutation(m),
                    other => other.visit_with(self),
                }
            }
            Expr::Assign(a) => self.assign(a),
            _ => e.visit_children_with(self),
        }
    }

    fn visit_prop(&mut self, p: &Prop) {
        if let Prop::Shorthand(id) = p {
            self.record(id, Role::Read);
        } else {
            p.visit_children_with(self);
        }
    }

    fn visit_ident_name(&mut self, _: &IdentName) {}
}

impl Builder {
    fn record_decl_ref(&mut self, id: &Ident, scope: ScopeId) {
        self.refs.push(RawRef {
            name: id.sym.to_string(),
            scope,
            pos: id.span.lo.0,
            role: Role::Decl,
        });
    }

    fn function_inner(&mut self, f: &Function, scope: ScopeId) {
        let pats: Vec<&Pat> = f.params.iter().map(|p| &p.pat).collect();
        self.declare_params(scope, &pats);
        for p in &pats {
            self.visit_param_defaults(p);
        }
        if let Some(body) = &f.body {
            for s in &body.stmts {
                s.visit_with(self);
            }
        }
    }

    fn visit_param_defaults(&mut self, p: &Pat) {
        match p {
            Pat::Ident(_) => {}
            Pat::Assign(a) => {
                a.right.visit_with(self);
                self.visit_param_defaults(&a.left);
            }
            other => other.visit_children_with(self),
        }
    }

    fn for_head(&mut self, head: &ForHead) {
        match head {
            ForHead::VarDecl(d) => {
                self.loop_head = true;
                let kind = match d.kind {
                    VarDeclKind::Var => BindingKind::Var,
                    VarDeclKind::Let => BindingKind::Let,
                    VarDeclKind::Const => BindingKind::Const,
                };
                let scope = if kind == BindingKind::Var {
                    *self.fn_stack.last().unwrap()
                } else {
                    self.cur()
                };
                for decl in &d.decls {
                    let mut ids = Vec::new();
                    crate::js::pat_bindings(&decl.name, &mut ids);
                    for id in &ids {
                        self.declare(scope, id, kind, d.span.hi.0, None);
                        self.with_scope(scope, |b| b.def(id, DefValue::Unknown));
                        self.record_decl_ref(id, scope);
                    }
                }
                self.loop_head = false;
            }
            ForHead::Pat(p) => {
                let mut ids = Vec::new();
                crate::js::pat_bindings(p, &mut ids);
                for id in &ids {
                    self.record(id, Role::Write);
                    self.def(id, DefValue::Unknown);
                }
            }
            ForHead::UsingDecl(_) => {}
        }
    }

    fn member_mutation(&mut self, m: &MemberExpr) {
        match &*m.obj {
            Expr::Ident(id) => self.record(id, Role::MemberMutate),
            other => other.visit_with(self),
        }
        if let MemberProp::Computed(c) = &m.prop {
            c.expr.visit_with(self);
        }
    }

    fn call(&mut self, c: &CallExpr) {
        let console = is_console_call(c);
        match &c.callee {
            Callee::Expr(callee) => match &**callee {
                Expr::Member(m) if !console => {
                    let method = match &m.prop {
                        MemberProp::Ident(p) => Some(p.sym.to_string()),
                        _ => None,
                    };
                    match &*m.obj {
                        Expr::Ident(id) => {
                            let safe = method.as_deref().is_some_and(|n| NON_MUTATING_METHODS.contains(&n));
                            self.record(id, if safe { Role::SafeRead } else { Role::MemberMutate });
                        }
                        other => other.visit_with(self),
                    }
                    if let MemberProp::Computed(cp) = &m.prop {
                        cp.expr.visit_with(self);
                    }
                }
                Expr::Member(_) => {}
                other => other.visit_with(self),
            },
            _ => {}
        }
        let is_placeholder = sketch::placeholder_call(c).is_some();
        for (i, arg) in c.args.iter().enumerate() {
            if is_placeholder && i >= 2 {
                continue;
            }
            if console || is_placeholder {
                self.visit_operand(&arg.expr);
            } else {
                arg.expr.visit_with(self);
            }
        }
    }

    fn assign(&mut self, a: &AssignExpr) {
        match &a.left {
            AssignTarget::Simple(SimpleAssignTarget::Ident(b)) => {
                self.record(&b.id, Role::Write);
                self.def(&b.id, DefValue::Assign(a.op, a.right.clone()));
            }
            AssignTarget::Simple(SimpleAssignTarget::Member(m)) => self.member_mutation(m),
            AssignTarget::Simple(other) => other.visit_with(self),
            AssignTarget::Pat(p) => {
                let pat: Pat = match p {
                    AssignTargetPat::Array(a) => Pat::Array(a.clone()),
                    AssignTargetPat::Object(o) => Pat::Object(o.clone()),
                    AssignTargetPat::Invalid(i) => Pat::Invalid(i.clone()),
                };
                let mut ids = Vec::new();
                crate::js::pat_bindings(&pat, &mut ids);
                for id in &ids {
                    self.record(id, Role::Write);
                    self.def(id, DefValue::Unknown);
                }
                struct Members<'a>(&'a mut Builder);
                impl Visit for Members<'_> {
                    fn visit_pat(&mut self, p: &Pat) {
                        if let Pat::Expr(e) = p {
                            if let Expr::Member(m) = &**e {
                                self.0.member_mutation(m);
                            }
                        } else {
                            p.visit_children_with(self);
                        }
                    }
                }
                pat.visit_with(&mut Members(self));
            }
        }
        a.right.visit_with(self);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::js;

    fn env(src: &str) -> (ScopeEnv, String) {
        let p = js::parse(src).unwrap();
        (ScopeEnv::analyze(&p.program), src.to_string())
    }

    fn pos_of(src: &str, marker: &str) -> u32 {
        // BytePos of a fresh parse starts at 1
        src.find(marker).unwrap() as u32 + 1
    }

    fn names(env: &ScopeEnv, ids: Vec<Candidate>) -> Vec<String> {
        let _ = env;
        ids.into_iter().map(|c| c.text()).collect()
    }

    #[test]
    fn figure_one_candidates() {
        let src = "let x = 10;\nlet y = 20;\nlet text = \"x*y\";\nconsole.log(HERE)\n";
        let (e, _) = env(src);
        let c = e.candidates(pos_of(src, "HERE"), &TypeTag::Number, false);
        assert_eq!(names(&e, c), vec!["x", "y"]);
    }

    #[test]
    fn let_is_not_visible_before_declaration() {
        let src = "f(HERE); let a = 1; { let b = 2; }";
        let (e, _) = env(src);
        assert!(e.candidates(pos_of(src, "HERE"), &TypeTag::Number, false).is_empty());
    }

    #[test]
    fn var_is_hoisted_but_not_in_own_initializer() {
        let src = "function f() { g(HERE); var a = 1; var b = AT; }";
        let (e, _) = env(src);
        assert_eq!(
            names(&e, e.candidates(pos_of(src, "HERE"), &TypeTag::Number, false)),
            vec!["a"]
        );
        assert_eq!(
            names(&e, e.candidates(pos_of(src, "AT"), &TypeTag::Number, false)),
            vec!["a"]
        );
    }

    #[test]
    fn inner_tdz_binding_shadows_outer() {
        let src = "let x = 1; { g(HERE); let x = 2; }";
        let (e, _) = env(src);
        assert!(e.candidates(pos_of(src, "HERE"), &TypeTag::Number, false).is_empty());
    }

    #[test]
    fn static_array_elements() {
        let src = "let arr = [true, 3.14, \"s\", 1];\nf(HERE);";
        let (e, _) = env(src);
        let c = e.candidates(pos_of(src, "HERE"), &TypeTag::Number, false);
        assert_eq!(names(&e, c), vec!["arr[1]", "arr[3]"]);
        let c = e.candidates(pos_of(src, "HERE"), &TypeTag::Boolean, false);
        assert_eq!(names(&e, c), vec!["arr[0]"]);
    }

    #[test]
    fn mutated_array_is_excluded() {
        for src in [
            "let arr = [1, 2]; arr.push(3); f(HERE);",
            "let arr = [1, 2]; arr[0] = true; f(HERE);",
            "let arr = [1, 2]; g(arr); f(HERE);",
        ] {
            let (e, _) = env(src);
            assert!(e.candidates(pos_of(src, "HERE"), &TypeTag::Number, false).is_empty(), "{src}");
        }
        let src = "let arr = [1, 2]; console.log(arr, arr.length, arr[0]); f(HERE);";
        let (e, _) = env(src);
        assert_eq!(e.candidates(pos_of(src, "HERE"), &TypeTag::Number, false).len(), 2);
    }

    #[test]
    fn assignments_widen_types() {
        let src = "let a = 1; let b = true; let c = 1; a = 'x'; c += 2; f(HERE);";
        let (e, _) = env(src);
        assert_eq!(
            names(&e, e.candidates(pos_of(src, "HERE"), &TypeTag::Number, false)),
            vec!["c"]
        );
        assert_eq!(
            names(&e, e.candidates(pos_of(src, "HERE"), &TypeTag::Boolean, false)),
            vec!["b"]
        );
    }

    #[test]
    fn types_flow_through_references() {
        let src = "let a = 1; let b = a * 2; let c = b > a; let d = c && true; f(HERE);";
        let (e, _) = env(src);
        assert_eq!(
            names(&e, e.candidates(pos_of(src, "HERE"), &TypeTag::Number, false)),
            vec!["a", "b"]
        );
        assert_eq!(
            names(&e, e.candidates(pos_of(src, "HERE"), &TypeTag::Boolean, false)),
            vec!["c", "d"]
        );
    }

    #[test]
    fn placeholders_carry_types() {
        let src = "let a = numberLiteral; let b = relation(a, numberReference, '<'); f(HERE);";
        let (e, _) = env(src);
        assert_eq!(
            names(&e, e.candidates(pos_of(src, "HERE"), &TypeTag::Boolean, false)),
            vec!["b"]
        );
    }

    #[test]
    fn assignment_targets_skip_consts_and_loop_heads() {
        let src = "const k = 1; let v = 2; for (let i = 0; i < 3; i++) { g(HERE); }";
        let (e, _) = env(src);
        let pos = pos_of(src, "HERE");
        assert_eq!(names(&e, e.candidates(pos, &TypeTag::Number, true)), vec!["v"]);
        assert_eq!(names(&e, e.candidates(pos, &TypeTag::Number, false)), vec!["k", "v", "i"]);
    }

    #[test]
    fn switch_case_lexicals_stay_in_their_case() {
        let src = "switch (v) { case 1: let a = 1; g(A); break; case 2: g(HERE); }";
        let (e, _) = env(src);
        assert!(e.candidates(pos_of(src, "HERE"), &TypeTag::Number, false).is_empty());
        assert_eq!(e.candidates(pos_of(src, "A"), &TypeTag::Number, false).len(), 1);
    }

    #[test]
    fn hoisted_function_called_early_does_not_see_later_lets() {
        let src = "f(); let x = 1; function f() { g(HERE); }";
        let (e, _) = env(src);
        assert!(e.candidates(pos_of(src, "HERE"), &TypeTag::Number, false).is_empty());
        let src = "let x = 1; function f() { g(HERE); } f();";
        let (e, _) = env(src);
        assert_eq!(e.candidates(pos_of(src, "HERE"), &TypeTag::Number, false).len(), 1);
        // called early through another hoisted function
        let src = "h(); let x = 1; function h() { f(); } function f() { g(HERE); }";
        let (e, _) = env(src);
        assert!(e.candidates(pos_of(src, "HERE"), &TypeTag::Number, false).is_empty());
    }

    #[test]
    fn function_scopes_are_isolated() {
        let src = "function f(p) { let inner = 1; } g(HERE);";
        let (e, _) = env(src);
        assert!(e.candidates(pos_of(src, "HERE"), &TypeTag::Number, false).is_empty());
        let vis: Vec<_> = e.visible_at(pos_of(src, "HERE")).into_iter().map(|b| e.binding(b).name.clone()).collect();
        assert_eq!(vis, vec!["f"]);
    }
}
