//! Running programs under an external JavaScript engine.
//!
//! Each run gets a scratch directory `<work>/<program-id>-<n>/main.js`, an
//! emptied environment (PATH only), a wall-clock timeout enforced by SIGKILL,
//! and peak RSS from `wait4` rusage.

use std::collections::HashMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::enhancer::GLOBAL_ERROR_MARKER;
use crate::sketch::content_id;

/// Exit status reported for runs killed at the timeout (128 + SIGKILL).
pub const TIMEOUT_STATUS: i32 = 137;
const OUTPUT_CAP: usize = 8 << 20;

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("engine `{0}` not found")]
    EngineNotFound(String),
    #[error("failed to spawn engine: {0}")]
    Spawn(std::io::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("program does not terminate within the timeout")]
    NonTerminating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Engine command line; the program path is appended.
    pub cmd: Vec<String>,
    pub timeout_s: f64,
    pub work_dir: PathBuf,
    /// Keep scratch directories after the run.
    pub keep_scratch: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            cmd: vec!["node".into()],
            timeout_s: 60.0,
            work_dir: std::env::temp_dir().join("sketchprobe-work"),
            keep_scratch: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ErrorInfo {
    #[serde(rename = "type")]
    pub error_type: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub stdout_lines: Vec<String>,
    pub stderr: String,
    pub error: Option<ErrorInfo>,
    pub exit_status: i32,
    pub timed_out: bool,
    pub wall_ms: f64,
    pub peak_rss_kb: f64,
    pub file_size_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NormalizedResult {
    pub stdout_lines: Vec<String>,
    pub error: Option<ErrorInfo>,
    pub exit_status: i32,
    pub timed_out: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfSample {
    pub avg_wall_ms: f64,
    pub avg_peak_rss_kb: f64,
    pub file_size_bytes: u64,
}

/// Results keyed by (engine command, timeout, program text).
#[derive(Debug, Default)]
pub struct ExecCache {
    map: Mutex<HashMap<String, ExecutionResult>>,
}

impl ExecCache {
    /// Process-wide cache, for test suites that run the same programs often.
    pub fn shared() -> Arc<ExecCache> {
        static SHARED: OnceLock<Arc<ExecCache>> = OnceLock::new();
        SHARED.get_or_init(|| Arc::new(ExecCache::default())).clone()
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct Engine {
    pub cfg: EngineConfig,
    cache: Option<Arc<ExecCache>>,
}

static RUN_COUNTER: AtomicU64 = AtomicU64::new(0);

impl Engine {
    pub fn new(cfg: EngineConfig) -> Self {
        Engine { cfg, cache: None }
    }

    pub fn with_cache(mut self, cache: Arc<ExecCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    fn cache_key(&self, src: &str) -> String {
        let mut h = Sha256::new();
        h.update(self.cfg.cmd.join("\0"));
        h.update(self.cfg.timeout_s.to_bits().to_le_bytes());
        h.update(src);
        hex::encode(h.finalize())
    }

    /// Executes program text through a fresh scratch directory.
    pub fn execute_source(&self, src: &str) -> Result<ExecutionResult, ExecError> {
        let key = self.cache.as_ref().map(|_| self.cache_key(src));
        if let (Some(c), Some(k)) = (&self.cache, &key) {
            if let Some(r) = c.map.lock().unwrap().get(k) {
                return Ok(r.clone());
            }
        }
        let n = RUN_COUNTER.fetch_add(1, Ordering::Relaxed);
        let dir = self
            .cfg
            .work_dir
            .join(format!("{}-{}-{n}", content_id(src), std::process::id()));
        std::fs::create_dir_all(&dir)?;
        let path = dir.join("main.js");
        std::fs::write(&path, src)?;
        let r = self.run(&path, &dir);
        if !self.cfg.keep_scratch {
            let _ = std::fs::remove_dir_all(&dir);
        }
        let r = r?;
        if let (Some(c), Some(k)) = (&self.cache, key) {
            c.map.lock().unwrap().insert(k, r.clone());
        }
        Ok(r)
    }

    /// Executes a program file; it is copied into a scratch directory first.
    pub fn execute(&self, path: &Path) -> Result<ExecutionResult, ExecError> {
        let src = std::fs::read_to_string(path)?;
        self.execute_source(&src)
    }

    /// Averages wall time and peak RSS over `runs` executions.
    pub fn measure(&self, path: &Path, runs: usize) -> Result<PerfSample, ExecError> {
        let src = std::fs::read_to_string(path)?;
        self.measure_source(&src, runs)
    }

    pub fn measure_source(&self, src: &str, runs: usize) -> Result<PerfSample, ExecError> {
        let runs = runs.max(1);
        let uncached = Engine::new(self.cfg.clone());
        let (mut wall, mut rss) = (0.0, 0.0);
        for _ in 0..runs {
            let r = uncached.execute_source(src)?;
            if r.timed_out {
                return Err(ExecError::NonTerminating);
            }
            wall += r.wall_ms;
            rss += r.peak_rss_kb;
        }
        Ok(PerfSample {
            avg_wall_ms: wall / runs as f64,
            avg_peak_rss_kb: rss / runs as f64,
            file_size_bytes: src.len() as u64,
        })
    }

    /// Runs many programs on a pool of `k` threads; output order matches input.
    pub fn execute_many(&self, sources: &[String], k: usize) -> Vec<Result<ExecutionResult, ExecError>> {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .expect("thread pool");
        pool.install(|| sources.par_iter().map(|s| self.execute_source(s)).collect())
    }

    fn run(&self, path: &Path, dir: &Path) -> Result<ExecutionResult, ExecError> {
        let (prog, args) = self
            .cfg
            .cmd
            .split_first()
            .ok_or_else(|| ExecError::EngineNotFound(String::new()))?;
        let mut cmd = Command::new(prog);
        cmd.args(args)
            .arg(path)
            .current_dir(dir)
            .env_clear()
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        if let Some(p) = std::env::var_os("PATH") {
            cmd.env("PATH", p);
        }
        let start = Instant::now();
        let mut child = cmd.spawn().map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => ExecError::EngineNotFound(prog.clone()),
            _ => ExecError::Spawn(e),
        })?;
        let out = capture(child.stdout.take().expect("piped stdout"));
        let err = capture(child.stderr.take().expect("piped stderr"));
        let pid = child.id() as libc::pid_t;
        let deadline = Duration::from_secs_f64(self.cfg.timeout_s.max(0.0));
        let mut timed_out = false;
        let (status, rusage) = loop {
            if let Some(done) = wait4(pid, libc::WNOHANG)? {
                break done;
            }
            if start.elapsed() >= deadline {
                timed_out = true;
                // SAFETY: pid is our unreaped child
                unsafe {
                    libc::kill(pid, libc::SIGKILL);
                }
                break wait4(pid, 0)?.expect("blocking wait4 returns");
            }
            std::thread::sleep(Duration::from_millis(2));
        };
        let wall_ms = start.elapsed().as_secs_f64() * 1000.0;
        let stdout = out.join().unwrap_or_default();
        let stderr = err.join().unwrap_or_default();
        let exit_status = if timed_out {
            TIMEOUT_STATUS
        } else if libc::WIFEXITED(status) {
            libc::WEXITSTATUS(status)
        } else if libc::WIFSIGNALED(status) {
            128 + libc::WTERMSIG(status)
        } else {
            -1
        };
        let stdout_lines = split_lines(&stdout);
        let error = if timed_out {
            None
        } else {
            parse_error(&stdout_lines, &stderr)
        };
        Ok(ExecutionResult {
            stdout_lines,
            stderr,
            error,
            exit_status,
            timed_out,
            wall_ms,
            peak_rss_kb: rusage.ru_maxrss as f64,
            file_size_bytes: std::fs::metadata(path).map(|m| m.len()).unwrap_or(0),
        })
    }
}

fn wait4(pid: libc::pid_t, flags: libc::c_int) -> std::io::Result<Option<(libc::c_int, libc::rusage)>> {
    let mut status = 0;
    // SAFETY: rusage is plain data; wait4 fills it for the reaped child
    let mut ru: libc::rusage = unsafe { std::mem::zeroed() };
    loop {
        let r = unsafe { libc::wait4(pid, &mut status, flags, &mut ru) };
        if r == pid {
            return Ok(Some((status, ru)));
        }
        if r == 0 {
            return Ok(None);
        }
        let e = std::io::Error::last_os_error();
        if e.kind() != std::io::ErrorKind::Interrupted {
            return Err(e);
        }
    }
}

fn capture<R: Read + Send + 'static>(mut r: R) -> std::thread::JoinHandle<String> {
    std::thread::spawn(move || {
        let mut kept = Vec::new();
        let mut buf = [0u8; 8192];
        loop {
            match r.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = OUTPUT_CAP.saturating_sub(kept.len());
                    kept.extend_from_slice(&buf[..n.min(room)]);
                }
            }
        }
        String::from_utf8_lossy(&kept).into_owned()
    })
}

fn split_lines(s: &str) -> Vec<String> {
    let mut v: Vec<String> = s.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l).to_string()).collect();
    if v.last().is_some_and(|l| l.is_empty()) {
        v.pop();
    }
    v
}

fn error_line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^([A-Za-z_$][\w$]*)(?: \[[\w$]+\])?: ?(.*)$").unwrap())
}

fn parse_description(line: &str) -> ErrorInfo {
    if let Some(v) = line.strip_prefix("Uncaught ") {
        return ErrorInfo {
            error_type: "Uncaught".into(),
            message: v.to_string(),
        };
    }
    match error_line_re().captures(line) {
        Some(c) => ErrorInfo {
            error_type: c[1].to_string(),
            message: c[2].to_string(),
        },
        None => ErrorInfo {
            error_type: "Uncaught".into(),
            message: line.to_string(),
        },
    }
}

/// Error of a run: the global-catch report on stdout takes precedence over
/// the engine's uncaught-exception report on stderr.
pub fn parse_error(stdout_lines: &[String], stderr: &str) -> Option<ErrorInfo> {
    if let Some(i) = stdout_lines.iter().position(|l| l == GLOBAL_ERROR_MARKER) {
        let desc = stdout_lines.get(i + 1).map(String::as_str).unwrap_or("");
        return Some(parse_description(desc));
    }
    parse_engine_stderr(stderr)
}

/// Parses node's uncaught-exception report:
/// `<file>:<line>`, source excerpt, caret line, blank, `Type: message`, stack.
pub fn parse_engine_stderr(stderr: &str) -> Option<ErrorInfo> {
    let lines: Vec<&str> = stderr.lines().collect();
    let caret = lines
        .iter()
        .position(|l| !l.trim().is_empty() && l.trim().chars().all(|c| c == '^'));
    let candidates: Box<dyn Iterator<Item = &&str>> = match caret {
        Some(i) => Box::new(lines[i + 1..].iter()),
        None => Box::new(lines.iter()),
    };
    for l in candidates {
        if l.trim().is_empty() || l.starts_with(' ') || l.starts_with('\t') {
            continue;
        }
        if l.starts_with("Node.js v") || l.starts_with("(Use `node") {
            continue;
        }
        if caret.is_none() && error_line_re().captures(l).is_none() {
            continue;
        }
        return Some(parse_description(l));
    }
    None
}

fn path_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"(^|[\s(\["'])(file://)?(/[\w.\-@]+)+/?"#).unwrap())
}

fn coord_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(<path>|\.js):\d+(:\d+)?").unwrap())
}

fn stack_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s+at .*").unwrap())
}

/// Path and coordinate stripping for error text.
pub fn normalize_error_text(s: &str) -> String {
    let s = path_re().replace_all(s, "${1}<path>");
    let s = coord_re().replace_all(&s, "$1");
    s.trim_end().to_string()
}

pub fn normalize(r: &ExecutionResult) -> NormalizedResult {
    NormalizedResult {
        stdout_lines: normalize_lines(&r.stdout_lines),
        error: r.error.as_ref().map(|e| ErrorInfo {
            error_type: e.error_type.trim().to_string(),
            message: normalize_error_text(e.message.lines().next().unwrap_or("")),
        }),
        exit_status: r.exit_status,
        timed_out: r.timed_out,
    }
}

pub fn normalize_lines(lines: &[String]) -> Vec<String> {
    lines
        .iter()
        .filter(|l| !stack_re().is_match(l))
        .map(|l| l.trim_end().to_string())
        .collect()
}

impl NormalizedResult {
    /// Idempotence helper: normalizing an already-normalized result.
    pub fn renormalize(&self) -> NormalizedResult {
        NormalizedResult {
            stdout_lines: normalize_lines(&self.stdout_lines),
            error: self.error.as_ref().map(|e| ErrorInfo {
                error_type: e.error_type.trim().to_string(),
                message: normalize_error_text(&e.message),
            }),
            exit_status: self.exit_status,
            timed_out: self.timed_out,
        }
    }
}

/// True when an engine command resolves on PATH.
pub fn engine_available(cmd: &str) -> bool {
    Command::new(cmd)
        .arg("--version")
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}
