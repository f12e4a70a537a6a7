//! Obfuscation configs and the shim stdio protocol. Built-in stub tools
//! stand in for real obfuscators in tests.
//!
//! Real obfuscators run in a separate node process (the shim) that speaks
//! newline-delimited JSON: one `ShimRequest` per line in, one `ShimResponse`
//! per line out, in order. The stubs are test instruments with known faults;
//! they run in-process and can also be served over the same protocol.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use swc_common::DUMMY_SP;
use swc_ecma_ast::*;
use swc_ecma_visit::{Visit, VisitMut, VisitMutWith, VisitWith};
use thiserror::Error;

use crate::js;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tool {
    ObfuscatorIo,
    JsConfuser,
    /// Returns the input.
    Identity,
    /// Turns the first `+` into `-`.
    FlipPlus,
    /// Wraps every body in `try {...} catch {}`.
    SwallowErrors,
    /// Renames one captured variable inside its closure only.
    RenameCaptured,
}

impl Tool {
    pub fn label(self) -> &'static str {
        match self {
            Tool::ObfuscatorIo => "obfuscator_io",
            Tool::JsConfuser => "js_confuser",
            Tool::Identity => "identity",
            Tool::FlipPlus => "flip_plus",
            Tool::SwallowErrors => "swallow_errors",
            Tool::RenameCaptured => "rename_captured",
        }
    }

    pub fn is_stub(self) -> bool {
        !matches!(self, Tool::ObfuscatorIo | Tool::JsConfuser)
    }

    pub fn presets(self) -> &'static [Preset] {
        match self {
            Tool::ObfuscatorIo => &[Preset::Default, Preset::Low, Preset::Medium, Preset::High],
            Tool::JsConfuser => &[Preset::Low, Preset::Medium, Preset::High],
            _ => &[Preset::Default],
        }
    }
}

impl std::str::FromStr for Tool {
    type Err = ObfuscateError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.replace(['-', '.'], "_").to_ascii_lowercase().as_str() {
            "obfuscator_io" | "javascript_obfuscator" => Tool::ObfuscatorIo,
            "js_confuser" => Tool::JsConfuser,
            "identity" => Tool::Identity,
            "flip_plus" => Tool::FlipPlus,
            "swallow_errors" => Tool::SwallowErrors,
            "rename_captured" => Tool::RenameCaptured,
            _ => return Err(ObfuscateError::Config(format!("unknown tool `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Default,
    Low,
    Medium,
    High,
}

impl Preset {
    pub fn label(self) -> &'static str {
        match self {
            Preset::Default => "default",
            Preset::Low => "low",
            Preset::Medium => "medium",
            Preset::High => "high",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = ObfuscateError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "default" => Preset::Default,
            "low" => Preset::Low,
            "medium" => Preset::Medium,
            "high" => Preset::High,
            _ => return Err(ObfuscateError::Config(format!("unknown preset `{s}`"))),
        })
    }
}

#[derive(Debug, Error)]
pub enum ObfuscateError {
    #[error("invalid obfuscation config: {0}")]
    Config(String),
    /// The tool could not be loaded (package missing, shim not configured).
    #[error("load error: {0}")]
    Load(String),
    /// The tool rejected or crashed on the input.
    #[error("transform error: {0}")]
    Transform(String),
    #[error("shim protocol error: {0}")]
    Protocol(String),
    #[error("shim io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObfuscationConfig {
    pub tool: Tool,
    pub preset: Preset,
    /// Keys changed from the preset. Exactly the forced ones, see [`forced_overrides`].
    #[serde(default)]
    pub overrides: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_seed: Option<u64>,
}

/// Preset keys that must change so programs stay runnable and comparable:
/// console output stays on, debug protection (which hangs) stays off, and
/// output is not compacted to one line.
pub fn forced_overrides(tool: Tool, preset: Preset) -> BTreeMap<String, Value> {
    let mut m = BTreeMap::new();
    match tool {
        Tool::ObfuscatorIo => {
            m.insert("compact".to_string(), Value::Bool(false));
            if preset != Preset::Default {
                m.insert("disableConsoleOutput".to_string(), Value::Bool(false));
            }
            if preset == Preset::High {
                m.insert("debugProtection".to_string(), Value::Bool(false));
            }
        }
        Tool::JsConfuser => {
            m.insert("compact".to_string(), Value::Bool(false));
        }
        _ => {}
    }
    m
}

impl ObfuscationConfig {
    pub fn new(tool: Tool, preset: Preset) -> Result<Self, ObfuscateError> {
        let c = ObfuscationConfig {
            tool,
            preset,
            overrides: forced_overrides(tool, preset),
            tool_seed: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.tool_seed = Some(seed);
        self
    }

    pub fn validate(&self) -> Result<(), ObfuscateError> {
        if !self.tool.presets().contains(&self.preset) {
            return Err(ObfuscateError::Config(format!(
                "{} has no preset `{}`",
                self.tool.label(),
                self.preset.label()
            )));
        }
        let forced = forced_overrides(self.tool, self.preset);
        if self.overrides != forced {
            return Err(ObfuscateError::Config(format!(
                "overrides for {}/{} must be exactly {}",
                self.tool.label(),
                self.preset.label(),
                serde_json::to_string(&forced).unwrap()
            )));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!("{}/{}", self.tool.label(), self.preset.label())
    }
}

/// The seven configurations of the evaluation: four obfuscator_io presets
/// and three js_confuser presets.
pub fn default_matrix() -> Vec<ObfuscationConfig> {
    [Tool::ObfuscatorIo, Tool::JsConfuser]
        .into_iter()
        .flat_map(|t| t.presets().iter().map(move |p| ObfuscationConfig::new(t, *p).unwrap()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShimRequest {
    pub id: u64,
    pub source: String,
    pub config: ObfuscationConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShimStage {
    Load,
    Transform,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShimErrorInfo {
    pub stage: ShimStage,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShimResponse {
    /// `None` answers a line that was not a valid request.
    pub id: Option<u64>,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obfuscated_source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ShimErrorInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_supported: Option<bool>,
}

impl ShimResponse {
    pub fn success(id: u64, source: String) -> Self {
        ShimResponse {
            id: Some(id),
            ok: true,
            obfuscated_source: Some(source),
            error: None,
            tool_version: None,
            seed_supported: None,
        }
    }

    pub fn failure(id: Option<u64>, stage: ShimStage, message: impl Into<String>) -> Self {
        ShimResponse {
            id,
            ok: false,
            obfuscated_source: None,
            error: Some(ShimErrorInfo {
                stage,
                message: message.into(),
            }),
            tool_version: None,
            seed_supported: None,
        }
    }

    pub fn into_result(self) -> Result<String, ObfuscateError> {
        match (self.ok, self.obfuscated_source, self.error) {
            (true, Some(s), _) => Ok(s),
            (true, None, _) => Err(ObfuscateError::Protocol("ok response without source".into())),
            (false, _, Some(ShimErrorInfo { stage: ShimStage::Load, message })) => Err(ObfuscateError::Load(message)),
            (false, _, Some(ShimErrorInfo { stage: ShimStage::Transform, message })) => {
                Err(ObfuscateError::Transform(message))
            }
            (false, _, None) => Err(ObfuscateError::Protocol("error response without error".into())),
        }
    }
}

/// Request/response loop over any line streams. Malformed lines get an
/// error response with a null id; EOF ends the loop.
pub fn serve<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    mut handle: impl FnMut(&ShimRequest) -> ShimResponse,
) -> std::io::Result<usize> {
    let mut served = 0;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = match serde_json::from_str::<ShimRequest>(&line) {
            Ok(req) => {
                let mut r = handle(&req);
                r.id = Some(req.id);
                r
            }
            Err(e) => ShimResponse::failure(None, ShimStage::Load, format!("malformed request: {e}")),
        };
        serde_json::to_writer(&mut output, &resp)?;
        output.write_all(b"\n")?;
        output.flush()?;
        served += 1;
    }
    Ok(served)
}

/// Handler for stub tools. Real tools answer with a load error.
pub fn stub_handler(req: &ShimRequest) -> ShimResponse {
    if !req.config.tool.is_stub() {
        return ShimResponse::failure(
            Some(req.id),
            ShimStage::Load,
            format!("{} is not available in-process", req.config.tool.label()),
        );
    }
    match apply_stub(req.config.tool, &req.source) {
        Ok(s) => ShimResponse::success(req.id, s),
        Err(e) => ShimResponse::failure(Some(req.id), ShimStage::Transform, e.to_string()),
    }
}

/// Client side of the protocol, over a child process.
pub struct ShimClient {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
    next_id: u64,
}

impl ShimClient {
    pub fn spawn(cmd: &[String]) -> Result<Self, ObfuscateError> {
        let (prog, args) = cmd
            .split_first()
            .ok_or_else(|| ObfuscateError::Config("empty shim command".into()))?;
        let mut child = Command::new(prog)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| ObfuscateError::Load(format!("cannot start shim `{prog}`: {e}")))?;
        let stdin = child.stdin.take();
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(ShimClient {
            child,
            stdin,
            stdout,
            next_id: 1,
        })
    }

    fn read_response(&mut self) -> Result<ShimResponse, ObfuscateError> {
        let mut line = String::new();
        if self.stdout.read_line(&mut line)? == 0 {
            return Err(ObfuscateError::Protocol("shim closed its output".into()));
        }
        serde_json::from_str(&line).map_err(|e| ObfuscateError::Protocol(format!("bad response line: {e}")))
    }

    pub fn request(&mut self, source: &str, config: &ObfuscationConfig) -> Result<ShimResponse, ObfuscateError> {
        let mut rs = self.pipeline(&[(source.to_string(), config.clone())])?;
        Ok(rs.pop().expect("one response"))
    }

    /// Sends every request, then reads the responses. A writer thread keeps
    /// both pipes moving, so large batches cannot deadlock.
    pub fn pipeline(&mut self, reqs: &[(String, ObfuscationConfig)]) -> Result<Vec<ShimResponse>, ObfuscateError> {
        let first = self.next_id;
        self.next_id += reqs.len() as u64;
        let mut lines = Vec::with_capacity(reqs.len());
        for (i, (source, config)) in reqs.iter().enumerate() {
            let req = ShimRequest {
                id: first + i as u64,
                source: source.clone(),
                config: config.clone(),
            };
            lines.push(serde_json::to_string(&req).expect("serializable") + "\n");
        }
        let mut stdin = self.stdin.take().ok_or_else(|| ObfuscateError::Protocol("shim input closed".into()))?;
        let writer = std::thread::spawn(move || -> std::io::Result<ChildStdin> {
            for l in lines {
                stdin.write_all(l.as_bytes())?;
            }
            stdin.flush()?;
            Ok(stdin)
        });
        let mut out = Vec::with_capacity(reqs.len());
        let mut read_err = None;
        for i in 0..reqs.len() {
            match self.read_response() {
                Ok(r) if r.id == Some(first + i as u64) => out.push(r),
                Ok(r) => {
                    read_err = Some(ObfuscateError::Protocol(format!(
                        "response id {:?}, expected {}",
                        r.id,
                        first + i as u64
                    )));
                    break;
                }
                Err(e) => {
                    read_err = Some(e);
                    break;
                }
            }
        }
        match writer.join() {
            Ok(Ok(stdin)) => self.stdin = Some(stdin),
            Ok(Err(e)) if read_err.is_none() => return Err(e.into()),
            _ => {}
        }
        match read_err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    /// Closes the shim's input and waits for it to exit.
    pub fn close(mut self) -> Result<std::process::ExitStatus, ObfuscateError> {
        drop(self.stdin.take());
        Ok(self.child.wait()?)
    }
}

impl Drop for ShimClient {
    fn drop(&mut self) {
        drop(self.stdin.take());
        if let Ok(None) = self.child.try_wait() {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}

/// Runs stubs in-process and real tools through a lazily started shim.
pub struct Obfuscator {
    shim_cmd: Vec<String>,
    shim: Option<ShimClient>,
}

impl Obfuscator {
    pub fn new(shim_cmd: Vec<String>) -> Self {
        Obfuscator { shim_cmd, shim: None }
    }

    pub fn obfuscate(&mut self, source: &str, config: &ObfuscationConfig) -> Result<String, ObfuscateError> {
        config.validate()?;
        if config.tool.is_stub() {
            return apply_stub(config.tool, source);
        }
        if self.shim.is_none() {
            if self.shim_cmd.is_empty() {
                return Err(ObfuscateError::Load("no shim command configured".into()));
            }
            self.shim = Some(ShimClient::spawn(&self.shim_cmd)?);
        }
        let resp = self.shim.as_mut().unwrap().request(source, config);
        if matches!(resp, Err(ObfuscateError::Protocol(_) | ObfuscateError::Io(_))) {
            // a dead shim is restarted on the next call
            self.shim = None;
        }
        resp?.into_result()
    }
}

pub fn apply_stub(tool: Tool, source: &str) -> Result<String, ObfuscateError> {
    if tool == Tool::Identity {
        return Ok(source.to_string());
    }
    let mut program = js::parse(source)
        .map_err(|e| ObfuscateError::Transform(e.to_string()))?
        .program;
    match tool {
        Tool::FlipPlus => program.visit_mut_with(&mut FlipPlus(false)),
        Tool::SwallowErrors => program.visit_mut_with(&mut Swallow),
        Tool::RenameCaptured => rename_captured(&mut program),
        _ => unreachable!("not a stub"),
    }
    Ok(js::print(&program))
}

struct FlipPlus(bool);

impl VisitMut for FlipPlus {
    fn visit_mut_bin_expr(&mut self, b: &mut BinExpr) {
        if !self.0 && b.op == BinaryOp::Add {
            b.op = BinaryOp::Sub;
            self.0 = true;
        }
        b.visit_mut_children_with(self);
    }

    fn visit_mut_var_declarator(&mut self, d: &mut VarDeclarator) {
        if !is_helper_decl(d) {
            d.visit_mut_children_with(self);
        }
    }
}

/// The enhancer's helper object. Stubs leave it alone so that they break
/// the program under test, not its instrumentation runtime.
fn is_helper_decl(d: &VarDeclarator) -> bool {
    matches!(&d.name, Pat::Ident(i) if i.id.sym.starts_with("__obs"))
}

struct Swallow;

fn swallowed(stmts: Vec<Stmt>) -> Vec<Stmt> {
    let (directives, body): (Vec<_>, Vec<_>) = {
        let k = js::directive_count(&stmts);
        let mut s = stmts;
        let rest = s.split_off(k);
        (s, rest)
    };
    if body.is_empty() {
        return directives;
    }
    let mut out = directives;
    out.push(Stmt::Try(Box::new(TryStmt {
        span: DUMMY_SP,
        block: js::block(body),
        handler: Some(CatchClause {
            span: DUMMY_SP,
            param: None,
            body: js::block(vec![]),
        }),
        finalizer: None,
    })));
    out
}

impl VisitMut for Swallow {
    fn visit_mut_block_stmt(&mut self, b: &mut BlockStmt) {
        b.visit_mut_children_with(self);
        if !b.stmts.is_empty() {
            b.stmts = swallowed(std::mem::take(&mut b.stmts));
        }
    }

    fn visit_mut_function_body(&mut self, b: &mut FunctionBody) {
        b.visit_mut_children_with(self);
        b.stmts = swallowed(std::mem::take(&mut b.stmts));
    }

    fn visit_mut_script(&mut self, s: &mut Script) {
        s.visit_mut_children_with(self);
        s.body = swallowed(std::mem::take(&mut s.body));
    }

    // the empty handlers added above must not be wrapped again
    fn visit_mut_catch_clause(&mut self, c: &mut CatchClause) {
        c.param.visit_mut_with(self);
        if !c.body.stmts.is_empty() {
            c.body.visit_mut_with(self);
        }
    }
}

/// Names declared directly in a function (params and its own body), not in
/// nested functions.
fn declared_in(f: &Function) -> BTreeSet<String> {
    struct D(BTreeSet<String>);
    impl Visit for D {
        fn visit_pat(&mut self, p: &Pat) {
            let mut ids = Vec::new();
            js::pat_bindings(p, &mut ids);
            self.0.extend(ids.into_iter().map(|i| i.sym.to_string()));
        }
        fn visit_fn_decl(&mut self, f: &FnDecl) {
            self.0.insert(f.ident.sym.to_string());
        }
        fn visit_class_decl(&mut self, c: &ClassDecl) {
            self.0.insert(c.ident.sym.to_string());
        }
        fn visit_function(&mut self, _: &Function) {}
        fn visit_arrow_expr(&mut self, _: &ArrowExpr) {}
    }
    let mut d = D(BTreeSet::new());
    f.params.visit_with(&mut d);
    if let Some(b) = &f.body {
        b.stmts.visit_with(&mut d);
    }
    d.0
}

fn referenced_in(f: &Function) -> Vec<String> {
    struct R(Vec<String>);
    impl Visit for R {
        fn visit_expr(&mut self, e: &Expr) {
            if let Expr::Ident(i) = e {
                if !self.0.contains(&i.sym.to_string()) {
                    self.0.push(i.sym.to_string());
                }
            }
            e.visit_children_with(self);
        }
    }
    let mut r = R(Vec::new());
    f.body.visit_with(&mut r);
    r.0
}

fn program_declared(p: &Program) -> BTreeSet<String> {
    struct D(BTreeSet<String>);
    impl Visit for D {
        fn visit_pat(&mut self, p: &Pat) {
            let mut ids = Vec::new();
            js::pat_bindings(p, &mut ids);
            self.0.extend(ids.into_iter().map(|i| i.sym.to_string()));
            p.visit_children_with(self);
        }
        fn visit_fn_decl(&mut self, f: &FnDecl) {
            self.0.insert(f.ident.sym.to_string());
            f.visit_children_with(self);
        }
    }
    let mut d = D(BTreeSet::new());
    p.visit_with(&mut d);
    d.0
}

/// Finds the first function reading a variable declared outside it and
/// renames that variable's uses inside the function.
fn rename_captured(p: &mut Program) {
    let declared = program_declared(p);
    struct Pick<'a> {
        declared: &'a BTreeSet<String>,
        found: Option<(swc_common::Span, String)>,
    }
    impl Visit for Pick<'_> {
        fn visit_function(&mut self, f: &Function) {
            if self.found.is_some() {
                return;
            }
            let own = declared_in(f);
            let captured = referenced_in(f)
                .into_iter()
                .find(|n| !own.contains(n) && self.declared.contains(n) && !n.starts_with("__obs"));
            if let Some(n) = captured {
                self.found = Some((f.span, n));
                return;
            }
            f.visit_children_with(self);
        }

        fn visit_var_declarator(&mut self, d: &VarDeclarator) {
            if !is_helper_decl(d) {
                d.visit_children_with(self);
            }
        }
    }
    let mut pick = Pick {
        declared: &declared,
        found: None,
    };
    p.visit_with(&mut pick);
    let Some((span, name)) = pick.found else { return };
    let fresh = format!("{name}_r");
    struct Rename<'a> {
        span: swc_common::Span,
        name: &'a str,
        fresh: &'a str,
        inside: bool,
    }
    impl VisitMut for Rename<'_> {
        fn visit_mut_function(&mut self, f: &mut Function) {
            let was = self.inside;
            if f.span == self.span {
                self.inside = true;
            }
            f.visit_mut_children_with(self);
            self.inside = was;
        }
        fn visit_mut_expr(&mut self, e: &mut Expr) {
            if let (true, Expr::Ident(i)) = (self.inside, &mut *e) {
                if &*i.sym == self.name {
                    i.sym = self.fresh.into();
                }
            }
            e.visit_mut_children_with(self);
        }
    }
    p.visit_mut_with(&mut Rename {
        span,
        name: &name,
        fresh: &fresh,
        inside: false,
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forced_overrides_per_preset() {
        let io_default = ObfuscationConfig::new(Tool::ObfuscatorIo, Preset::Default).unwrap();
        assert_eq!(serde_json::to_string(&io_default.overrides).unwrap(), r#"{"compact":false}"#);
        let io_high = ObfuscationConfig::new(Tool::ObfuscatorIo, Preset::High).unwrap();
        assert_eq!(
            serde_json::to_string(&io_high.overrides).unwrap(),
            r#"{"compact":false,"debugProtection":false,"disableConsoleOutput":false}"#
        );
        let io_low = ObfuscationConfig::new(Tool::ObfuscatorIo, Preset::Low).unwrap();
        assert!(!io_low.overrides.contains_key("debugProtection"));
        assert_eq!(io_low.overrides["disableConsoleOutput"], Value::Bool(false));
        assert!(ObfuscationConfig::new(Tool::JsConfuser, Preset::Default).is_err());
        assert_eq!(default_matrix().len(), 7);
    }

    #[test]
    fn extra_override_rejected() {
        let mut c = ObfuscationConfig::new(Tool::JsConfuser, Preset::Low).unwrap();
        c.overrides.insert("renameVariables".into(), Value::Bool(false));
        assert!(c.validate().is_err());
    }

    #[test]
    fn serve_protocol() {
        let cfg = ObfuscationConfig::new(Tool::Identity, Preset::Default).unwrap();
        let good = serde_json::to_string(&ShimRequest {
            id: 7,
            source: "a + 1".into(),
            config: cfg.clone(),
        })
        .unwrap();
        let flip = serde_json::to_string(&ShimRequest {
            id: 8,
            source: "a + 1".into(),
            config: ObfuscationConfig::new(Tool::FlipPlus, Preset::Default).unwrap(),
        })
        .unwrap();
        let real = serde_json::to_string(&ShimRequest {
            id: 9,
            source: "a".into(),
            config: ObfuscationConfig::new(Tool::JsConfuser, Preset::Low).unwrap(),
        })
        .unwrap();
        let input = format!("{good}\nnot json\n{flip}\n{real}\n");
        let mut out = Vec::new();
        assert_eq!(serve(input.as_bytes(), &mut out, stub_handler).unwrap(), 4);
        let rs: Vec<ShimResponse> = String::from_utf8(out)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(rs[0], ShimResponse::success(7, "a + 1".into()));
        assert_eq!((rs[1].id, rs[1].ok), (None, false));
        assert_eq!(rs[2].obfuscated_source.as_deref().map(str::trim), Some("a - 1;"));
        assert!(matches!(rs[3].clone().into_result(), Err(ObfuscateError::Load(_))));
    }

    #[test]
    fn stubs() {
        let s = apply_stub(Tool::SwallowErrors, "'use strict';\nfunction f() { throw 1; }\nf();").unwrap();
        assert!(js::ast_eq_text(&s, "'use strict'; try { function f() { try { throw 1; } catch {} } f(); } catch {}").unwrap(), "{s}");
        let s = apply_stub(Tool::RenameCaptured, "let k = 1; function g(a) { return a + k; } g(2);").unwrap();
        assert!(js::ast_eq_text(&s, "let k = 1; function g(a) { return a + k_r; } g(2);").unwrap(), "{s}");
        let s = apply_stub(Tool::FlipPlus, "let q = 'a' + 1 + 2;").unwrap();
        assert!(js::ast_eq_text(&s, "let q = 'a' + 1 - 2;").unwrap(), "{s}");
    }

    #[test]
    fn stubs_skip_the_enhancer_helper() {
        let q = crate::enhancer::enhance("let a = 1;\nconsole.log(a + 2);").unwrap();
        let s = apply_stub(Tool::FlipPlus, &q.source_text).unwrap();
        assert!(s.contains("a - 2"), "{s}");
        let q = crate::enhancer::enhance("let a = 1;\nfunction g() { return a; }\nconsole.log(g());").unwrap();
        let s = apply_stub(Tool::RenameCaptured, &q.source_text).unwrap();
        assert!(s.contains("return a_r"), "{s}");
    }

    #[test]
    fn transform_error_for_unparseable_input() {
        assert!(matches!(apply_stub(Tool::FlipPlus, "let = ;"), Err(ObfuscateError::Transform(_))));
        assert!(matches!(
            Obfuscator::new(vec![]).obfuscate("1", &ObfuscationConfig::new(Tool::ObfuscatorIo, Preset::Low).unwrap()),
            Err(ObfuscateError::Load(_))
        ));
    }
}
