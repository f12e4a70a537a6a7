//! Sketch generation with language models, and the analysis/refinement loop.
//!
//! Providers are either live HTTP endpoints or a recorded transcript, a JSON
//! array of `{request_hash, response_text}` entries. The hash is the content
//! id (16 hex chars of sha256) of the rendered prompt; `"*"` matches any
//! request. Entries are consumed in
//! order, so a batch of identical prompts replays its responses one by one.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::oracle::{BugReport, FailCategory};
use crate::sketch::{self, check_sketch_text, content_id, SketchCheck, ValidityReport};

const PROMPT_TEXT: &str = include_str!("../data/sketch_prompt.txt");

/// Sketches requested per call unless configured otherwise.
pub const DEFAULT_BATCH: usize = 10;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("environment variable {0} with the provider token is not set")]
    MissingToken(String),
    #[error("authentication failed ({status}): {body}")]
    Auth { status: u16, body: String },
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("http error {status}: {body}")]
    Http { status: u16, body: String },
    #[error("network error: {0}")]
    Network(String),
    #[error("unexpected response shape: {0}")]
    Shape(String),
    #[error("transcript {path}: {message}")]
    Transcript { path: String, message: String },
    #[error("transcript has no response left for request {0}")]
    TranscriptExhausted(String),
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("no fenced code block in model response")]
    NoFencedBlock,
    #[error("failure analysis needs at least one bug report")]
    NoReports,
}

/// The generation prompt, one field per block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub context: String,
    pub example: String,
    pub format: String,
    pub instruction: String,
}

impl Default for PromptSpec {
    fn default() -> Self {
        let find = |tag: &str| PROMPT_TEXT.find(tag).unwrap_or_else(|| panic!("prompt lacks {tag}"));
        let starts = [
            find("<context>"),
            find("<example>"),
            find("<format>"),
            find("<instruction>"),
            PROMPT_TEXT.len(),
        ];
        let block = |i: usize| PROMPT_TEXT[starts[i]..starts[i + 1]].trim().to_string();
        PromptSpec {
            context: block(0),
            example: block(1),
            format: block(2),
            instruction: block(3),
        }
    }
}

impl PromptSpec {
    pub fn render(&self, number: usize) -> String {
        let instruction = self.instruction.replace("<number>", &number.to_string());
        format!("{}\n\n{}\n\n{}\n\n{}\n", self.context, self.example, self.format, instruction)
    }

    /// The base prompt plus a constraint paragraph derived from a bug brief.
    pub fn render_refinement(&self, number: usize, brief: &FeedbackBugBrief) -> String {
        format!(
            "{}\n<constraint>\n    Earlier templates exposed a {} failure in an obfuscator: {}\n    \
             Embed placeholders involving these constructs in every template: {}.\n</constraint>\n",
            self.render(number),
            brief.category.label(),
            brief.trigger,
            brief.constructs.join(", ")
        )
    }
}

pub fn request_hash(prompt: &str) -> String {
    content_id(prompt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    /// Canned responses from a file.
    Transcript,
    /// OpenAI-compatible chat completions.
    OpenaiChat,
    AnthropicMessages,
    GeminiGenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    /// Free-form label recorded with every sketch.
    pub id: String,
    pub kind: ProviderKind,
    #[serde(default)]
    pub model: String,
    /// Full request URL. Empty selects the kind's public endpoint.
    #[serde(default)]
    pub endpoint: String,
    /// Name of the environment variable holding the token. The token itself
    /// is never stored.
    #[serde(default)]
    pub token_env: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_output_tokens: u32,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub retry_backoff_ms: u64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub transcript: Option<PathBuf>,
}

fn default_temperature() -> f64 {
    1.0
}
fn default_max_tokens() -> u32 {
    16384
}
fn default_timeout() -> f64 {
    300.0
}
fn default_retries() -> u32 {
    4
}
fn default_backoff() -> u64 {
    2000
}
fn default_batch() -> usize {
    DEFAULT_BATCH
}

impl ProviderConfig {
    pub fn transcript(id: &str, model: &str, path: impl Into<PathBuf>) -> Self {
        ProviderConfig {
            id: id.to_string(),
            kind: ProviderKind::Transcript,
            model: model.to_string(),
            endpoint: String::new(),
            token_env: String::new(),
            temperature: default_temperature(),
            max_output_tokens: default_max_tokens(),
            timeout_s: default_timeout(),
            max_retries: default_retries(),
            retry_backoff_ms: default_backoff(),
            batch_size: DEFAULT_BATCH,
            transcript: Some(path.into()),
        }
    }

    pub fn http(id: &str, kind: ProviderKind, model: &str, token_env: &str) -> Self {
        ProviderConfig {
            kind,
            token_env: token_env.to_string(),
            transcript: None,
            ..Self::transcript(id, model, "")
        }
    }

    fn endpoint(&self) -> String {
        if !self.endpoint.is_empty() {
            return self.endpoint.clone();
        }
        match self.kind {
            ProviderKind::OpenaiChat => "https://api.openai.com/v1/chat/completions".into(),
            ProviderKind::AnthropicMessages => "https://api.anthropic.com/v1/messages".into(),
            ProviderKind::GeminiGenerate => format!(
                "https://generativelanguage.googleapis.com/v1beta/models/{}:generateContent",
                self.model
            ),
            ProviderKind::Transcript => String::new(),
        }
    }

    pub fn connect(&self) -> Result<Box<dyn Provider>, ProviderError> {
        Ok(match self.kind {
            ProviderKind::Transcript => {
                let path = self.transcript.clone().unwrap_or_default();
                Box::new(TranscriptProvider::load(&path, self.clone())?)
            }
            _ => Box::new(HttpProvider::new(self.clone())?),
        })
    }
}

pub trait Provider {
    fn config(&self) -> &ProviderConfig;
    /// One single-shot completion.
    fn complete(&mut self, prompt: &str) -> Result<String, ProviderError>;
    /// Wall-clock responses get a timestamp; recorded ones do not.
    fn is_recorded(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub request_hash: String,
    pub response_text: String,
}

pub struct TranscriptProvider {
    cfg: ProviderConfig,
    entries: Vec<(TranscriptEntry, bool)>,
}

impl TranscriptProvider {
    pub fn load(path: &Path, cfg: ProviderConfig) -> Result<Self, ProviderError> {
        let err = |message: String| ProviderError::Transcript {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let entries: Vec<TranscriptEntry> = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        Ok(Self::from_entries(entries, cfg))
    }

    pub fn from_entries(entries: Vec<TranscriptEntry>, cfg: ProviderConfig) -> Self {
        TranscriptProvider {
            cfg,
            entries: entries.into_iter().map(|e| (e, false)).collect(),
        }
    }
}

impl Provider for TranscriptProvider {
    fn config(&self) -> &ProviderConfig {
        &self.cfg
    }

    fn complete(&mut self, prompt: &str) -> Result<String, ProviderError> {
        let h = request_hash(prompt);
        let pos = self
            .entries
            .iter()
            .position(|(e, used)| !used && e.request_hash == h)
            .or_else(|| self.entries.iter().position(|(e, used)| !used && e.request_hash == "*"))
            .ok_or_else(|| ProviderError::TranscriptExhausted(h))?;
        self.entries[pos].1 = true;
        Ok(self.entries[pos].0.response_text.clone())
    }

    fn is_recorded(&self) -> bool {
        true
    }
}

pub struct HttpProvider {
    cfg: ProviderConfig,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(cfg: ProviderConfig) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_s))
            .build()
            .map_err(|e| ProviderError::Network(e.to_string()))?;
        Ok(HttpProvider { cfg, client })
    }

    fn token(&self) -> Result<String, ProviderError> {
        std::env::var(&self.cfg.token_env).map_err(|_| ProviderError::MissingToken(self.cfg.token_env.clone()))
    }

    fn build(&self, prompt: &str, token: &str) -> reqwest::blocking::RequestBuilder {
        let c = &self.cfg;
        let req = self.client.post(c.endpoint());
        match c.kind {
            ProviderKind::OpenaiChat => req.bearer_auth(token).json(&json!({
                "model": c.model,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": c.temperature,
                "max_completion_tokens": c.max_output_tokens,
            })),
            ProviderKind::AnthropicMessages => req
                .header("x-api-key", token)
                .header("anthropic-version", "2023-06-01")
                .json(&json!({
                    "model": c.model,
                    "max_tokens": c.max_output_tokens,
                    "temperature": c.temperature,
                    "messages": [{"role": "user", "content": prompt}],
                })),
            ProviderKind::GeminiGenerate => req.header("x-goog-api-key", token).json(&json!({
                "contents": [{"role": "user", "parts": [{"text": prompt}]}],
                "generationConfig": {"temperature": c.temperature, "maxOutputTokens": c.max_output_tokens},
            })),
            ProviderKind::Transcript => unreachable!("transcripts are not http"),
        }
    }
}

pub fn response_text(kind: ProviderKind, body: &Value) -> Result<String, ProviderError> {
    let shape = || ProviderError::Shape(body.to_string().chars().take(300).collect());
    let join = |parts: &Vec<Value>, key: &str| -> String {
        parts.iter().filter_map(|p| p[key].as_str()).collect::<Vec<_>>().join("")
    };
    match kind {
        ProviderKind::OpenaiChat => body["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(shape),
        ProviderKind::AnthropicMessages => body["content"].as_array().map(|a| join(a, "text")).ok_or_else(shape),
        ProviderKind::GeminiGenerate => body["candidates"][0]["content"]["parts"]
            .as_array()
            .map(|a| join(a, "text"))
            .ok_or_else(shape),
        ProviderKind::Transcript => Err(shape()),
    }
}

impl Provider for HttpProvider {
    fn config(&self) -> &ProviderConfig {
        &self.cfg
    }

    fn complete(&mut self, prompt: &str) -> Result<String, ProviderError> {
        let token = self.token()?;
        let mut attempt = 0;
        loop {
            attempt += 1;
            let retry = match self.build(prompt, &token).send() {
                Ok(resp) => {
                    let status = resp.status().as_u16();
                    let body = resp.text().unwrap_or_default();
                    match status {
                        200..=299 => {
                            let v: Value =
                                serde_json::from_str(&body).map_err(|e| ProviderError::Shape(e.to_string()))?;
                            return response_text(self.cfg.kind, &v);
                        }
                        401 | 403 => return Err(ProviderError::Auth { status, body }),
                        429 => ProviderError::RateLimited { attempts: attempt },
                        500..=599 => ProviderError::Http { status, body },
                        _ => return Err(ProviderError::Http { status, body }),
                    }
                }
                Err(e) => ProviderError::Network(e.to_string()),
            };
            if attempt > self.cfg.max_retries {
                return Err(retry);
            }
            log::warn!("{}: attempt {attempt} failed ({retry}), retrying", self.cfg.id);
            std::thread::sleep(Duration::from_millis(self.cfg.retry_backoff_ms << (attempt - 1).min(6)));
        }
    }
}

fn fence_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)```[^\n`]*\n(.*?)```").unwrap())
}

/// Contents of the fenced block. Several blocks are concatenated.
pub fn extract_fenced(response: &str) -> Result<String, LlmError> {
    let blocks: Vec<&str> = fence_re()
        .captures_iter(response)
        .map(|c| c.get(1).unwrap().as_str())
        .collect();
    match blocks.len() {
        0 => Err(LlmError::NoFencedBlock),
        1 => Ok(blocks[0].to_string()),
        n => {
            log::warn!("response has {n} fenced blocks, concatenating");
            Ok(blocks.join("\n"))
        }
    }
}

fn header_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?im)^[ \t]*(?://+|/\*+|<)[ \t]*(?:sketch|template|program)[ \t]*#?[ \t]*\d+\b[^\n]*$").unwrap()
    })
}

fn closing_tag_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?im)^[ \t]*</(?:sketch|template|program)[^>]*>[ \t]*$").unwrap())
}

/// Splits a block into sketches at numbered header lines (`// Sketch 3`,
/// `<template 3>`). Without headers, runs of two or more blank lines
/// separate sketches.
pub fn split_sketches(block: &str) -> Vec<String> {
    let block = closing_tag_re().replace_all(block, "");
    let mut parts = Vec::new();
    let mut last = 0;
    let mut headers = 0;
    for m in header_re().find_iter(&block) {
        parts.push(&block[last..m.start()]);
        last = m.end();
        headers += 1;
    }
    parts.push(&block[last..]);
    let pieces: Vec<String> = if headers > 0 {
        parts.into_iter().map(str::to_string).collect()
    } else {
        static BLANKS: OnceLock<Regex> = OnceLock::new();
        BLANKS
            .get_or_init(|| Regex::new(r"\n[ \t]*\n([ \t]*\n)+").unwrap())
            .split(&block)
            .map(str::to_string)
            .collect()
    };
    pieces
        .into_iter()
        .map(|p| dedent(p.trim_matches('\n')))
        .filter(|p| !p.trim().is_empty())
        .collect()
}

fn dedent(s: &str) -> String {
    let indent = s
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    let mut out: String = s
        .lines()
        .map(|l| if l.len() >= indent { &l[indent..] } else { l.trim_start() })
        .collect::<Vec<_>>()
        .join("\n");
    out.push('\n');
    out
}

/// The exact response text a sketch came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawResponse {
    pub request_hash: String,
    pub response_hash: String,
    pub response_text: String,
    /// Seconds since the epoch; 0 for recorded responses.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSketch {
    pub text: String,
    pub provider_id: String,
    pub model: String,
    pub response_hash: String,
    pub timestamp: u64,
    pub check: SketchCheck,
}

impl GeneratedSketch {
    pub fn origin(&self) -> sketch::Origin {
        sketch::Origin::Llm(self.model.clone())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub requested: usize,
    pub sketches: Vec<GeneratedSketch>,
    pub report: ValidityReport,
    pub responses: Vec<RawResponse>,
    /// Responses without a fenced block.
    pub extraction_failures: usize,
}

impl GenerationResult {
    pub fn valid(&self) -> impl Iterator<Item = &GeneratedSketch> {
        self.sketches.iter().filter(|s| s.check.valid)
    }
}

fn now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn run_batches(
    provider: &mut dyn Provider,
    n: usize,
    mut prompt_for: impl FnMut(usize) -> String,
) -> Result<GenerationResult, LlmError> {
    let mut out = GenerationResult {
        requested: n,
        ..Default::default()
    };
    if n == 0 {
        return Ok(out);
    }
    let batch = provider.config().batch_size.max(1);
    let (id, model) = (provider.config().id.clone(), provider.config().model.clone());
    let mut asked = 0;
    while asked < n {
        let k = batch.min(n - asked);
        asked += k;
        let prompt = prompt_for(k);
        let text = provider.complete(&prompt)?;
        let raw = RawResponse {
            request_hash: request_hash(&prompt),
            response_hash: content_id(&text),
            timestamp: if provider.is_recorded() { 0 } else { now() },
            response_text: text,
        };
        match extract_fenced(&raw.response_text) {
            Ok(block) => {
                for text in split_sketches(&block) {
                    let check = check_sketch_text(&text);
                    out.sketches.push(GeneratedSketch {
                        text,
                        provider_id: id.clone(),
                        model: model.clone(),
                        response_hash: raw.response_hash.clone(),
                        timestamp: raw.timestamp,
                        check,
                    });
                }
            }
            Err(e) => {
                log::warn!("{id}: {e}");
                out.extraction_failures += 1;
            }
        }
        out.responses.push(raw);
    }
    out.sketches.truncate(n);
    out.report = sketch::classify_model_output(&out.sketches.iter().map(|s| s.text.as_str()).collect::<Vec<_>>());
    Ok(out)
}

/// Requests `n` sketches in batches of the provider's batch size.
pub fn generate_sketches(provider: &mut dyn Provider, n: usize) -> Result<GenerationResult, LlmError> {
    let spec = PromptSpec::default();
    run_batches(provider, n, |k| spec.render(k))
}

/// Constructs the analysis agent may name. Each must occur in the failing
/// program for the brief to keep it.
pub const CONSTRUCTS: &[(&str, &str)] = &[
    ("eval", r"\beval\s*\("),
    ("class", r"\bclass\b"),
    ("constructor", r"\bconstructor\b|\bnew\s+[A-Za-z_$]"),
    ("static_block", r"\bstatic\s*\{"),
    ("closure", r"(?s)(function|=>).*(function|=>)"),
    ("scope", r"[{}]"),
    ("try_catch", r"\btry\s*\{"),
    ("async", r"\basync\b|\bawait\b"),
    ("generator", r"function\s*\*|\byield\b"),
    ("getter_setter", r"\b(get|set)\s+[A-Za-z_$][\w$]*\s*\("),
    ("arrow_function", r"=>"),
    ("undefined", r"\bundefined\b|\bvoid\s+0\b"),
    ("switch", r"\bswitch\s*\("),
    ("loop", r"\b(for|while|do)\b"),
    ("label", r"(?m)^\s*[A-Za-z_$][\w$]*\s*:\s*(for|while|do|\{)"),
    ("template_literal", r"`"),
    ("regexp", r"/[^/\n*]+/[gimsuy]*\s*[.;,)]"),
];

fn construct_present(name: &str, program: &str) -> bool {
    CONSTRUCTS
        .iter()
        .find(|(n, _)| *n == name)
        .is_some_and(|(_, re)| Regex::new(re).unwrap().is_match(program))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackBugBrief {
    pub category: FailCategory,
    pub trigger: String,
    pub constructs: Vec<String>,
    /// Fingerprints of the reports the brief was derived from.
    pub source_verdicts: Vec<String>,
}

#[derive(Deserialize)]
struct AnalysisReply {
    trigger: String,
    constructs: Vec<String>,
}

pub fn analysis_prompt(report: &BugReport, program: &str) -> String {
    let excerpt: String = program.lines().take(80).collect::<Vec<_>>().join("\n");
    let names: Vec<&str> = CONSTRUCTS.iter().map(|(n, _)| *n).collect();
    format!(
        "You are analyzing a bug found while testing JavaScript obfuscators.\n\
         An original program and its obfuscated version behaved differently.\n\n\
         Obfuscator: {} (preset {})\nFailure category: {}\nFailure shape: {}\nOccurrences: {}\n\n\
         Original program:\n```javascript\n{}\n```\n\n\
         Summarize the discrepancy. Reply with one JSON object in a ```json block with the keys\n\
         \"trigger\" (one sentence describing the minimal program feature that triggers the failure) and\n\
         \"constructs\" (a list chosen from: {}).\n",
        report.tool,
        report.preset,
        report.category.label(),
        report.shape,
        report.occurrences,
        excerpt,
        names.join(", ")
    )
}

/// Validates a reply against the report and program. Constructs that do not
/// occur in the program are dropped; no constructs left means no brief.
pub fn parse_brief(reply: &str, report: &BugReport, program: &str) -> Option<FeedbackBugBrief> {
    let json_text = extract_fenced(reply).ok().or_else(|| {
        let (a, b) = (reply.find('{')?, reply.rfind('}')?);
        (a < b).then(|| reply[a..=b].to_string())
    })?;
    let parsed: AnalysisReply = match serde_json::from_str(json_text.trim()) {
        Ok(p) => p,
        Err(e) => {
            log::warn!("analysis reply for {} is not a brief: {e}", report.fingerprint);
            return None;
        }
    };
    let mut seen = BTreeSet::new();
    let constructs: Vec<String> = parsed
        .constructs
        .into_iter()
        .map(|c| c.trim().to_ascii_lowercase())
        .filter(|c| construct_present(c, program) && seen.insert(c.clone()))
        .collect();
    let trigger = parsed.trigger.trim().to_string();
    if trigger.is_empty() || constructs.is_empty() {
        log::warn!("analysis reply for {} dropped: empty trigger or constructs", report.fingerprint);
        return None;
    }
    Some(FeedbackBugBrief {
        category: report.category,
        trigger,
        constructs,
        source_verdicts: vec![report.fingerprint.clone()],
    })
}

/// One analysis call per report. `program_text` looks up the exemplar
/// program's source by id.
pub fn analyze_failure(
    reports: &[BugReport],
    program_text: &dyn Fn(&str) -> Option<String>,
    provider: &mut dyn Provider,
) -> Result<Vec<FeedbackBugBrief>, LlmError> {
    if reports.is_empty() {
        return Err(LlmError::NoReports);
    }
    let mut briefs = Vec::new();
    for r in reports {
        let Some(program) = program_text(&r.exemplar_program) else {
            log::warn!("no program text for {}, skipping", r.exemplar_program);
            continue;
        };
        let reply = provider.complete(&analysis_prompt(r, &program))?;
        briefs.extend(parse_brief(&reply, r, &program));
    }
    Ok(briefs)
}

pub fn refine_sketches(
    brief: &FeedbackBugBrief,
    provider: &mut dyn Provider,
    n: usize,
) -> Result<GenerationResult, LlmError> {
    let spec = PromptSpec::default();
    run_batches(provider, n, |k| spec.render_refinement(k, brief))
}
