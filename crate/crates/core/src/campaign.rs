//! End-to-end campaigns: sketches, programs, variants, executions, verdicts.
//!
//! Everything goes through the [`ResultStore`], and summaries are folds over
//! it. A rerun with the same config finds its records and does no new work.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::enhancer;
use crate::exec::{self, Engine, EngineConfig, NormalizedResult};
use crate::extractor::{self, ExtractOptions};
use crate::filler::{self, FillConfig};
use crate::llm::{self, FeedbackBugBrief, ProviderConfig};
use crate::mr::{apply_mr, MetamorphicRelation, MrId};
use crate::obfuscate::{ObfuscationConfig, Obfuscator, Preset, Tool};
use crate::oracle::{
    compare_metamorphic, compare_repeated, dedupe_with, majority, BugReport, FailCategory, FingerprintPolicy,
    OracleKind, Verdict, VerdictContext,
};
use crate::rng::derive_seed;
use crate::sketch::{self, Origin};
use crate::store::{
    key_id, ErrorRecord, ExecutionRecord, PerfRecord, ProgramRecord, ProgramRole, Record, ResultStore, SketchRecord,
    SourceRecord, StoreError, VariantRecord, VerdictRecord,
};

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("invalid campaign config: {0}")]
    Config(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Ablation modes: exactly one generation technique or one oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Only {
    Llm,
    Feedback,
    Extract,
    Mr,
    Diff,
}

impl std::str::FromStr for Only {
    type Err = CampaignError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "llm" => Only::Llm,
            "feedback" => Only::Feedback,
            "extract" => Only::Extract,
            "mr" => Only::Mr,
            "diff" => Only::Diff,
            _ => return Err(CampaignError::Config(format!("unknown --only value `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmSource {
    pub provider: ProviderConfig,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSource {
    pub path: PathBuf,
    #[serde(default)]
    pub sample: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandwrittenSource {
    pub path: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Sources {
    pub llm: Vec<LlmSource>,
    pub corpus: Vec<CorpusSource>,
    pub handwritten: Vec<HandwrittenSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixEntry {
    pub tool: Tool,
    pub preset: Preset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_seed: Option<u64>,
}

impl MatrixEntry {
    pub fn config(&self) -> Result<ObfuscationConfig, CampaignError> {
        let c = ObfuscationConfig::new(self.tool, self.preset).map_err(|e| CampaignError::Config(e.to_string()))?;
        Ok(match self.tool_seed {
            Some(s) => c.with_seed(s),
            None => c,
        })
    }
}

fn default_matrix_entries() -> Vec<MatrixEntry> {
    crate::obfuscate::default_matrix()
        .into_iter()
        .map(|c| MatrixEntry {
            tool: c.tool,
            preset: c.preset,
            tool_seed: None,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeedbackConfig {
    pub enabled: bool,
    pub rounds: usize,
    pub sketches_per_brief: usize,
    /// Analysis agent. Defaults to the first LLM source's provider.
    pub analysis_provider: Option<ProviderConfig>,
    /// Generator for refined sketches. Defaults to the first LLM source's provider.
    pub refine_provider: Option<ProviderConfig>,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        FeedbackConfig {
            enabled: false,
            rounds: 1,
            sketches_per_brief: 10,
            analysis_provider: None,
            refine_provider: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerfConfig {
    pub enabled: bool,
    pub runs: usize,
}

impl Default for PerfConfig {
    fn default() -> Self {
        PerfConfig { enabled: false, runs: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub output_root: PathBuf,
    pub seed: u64,
    pub sources: Sources,
    pub fill: FillConfig,
    pub enhance: bool,
    pub mrs: Vec<MrId>,
    pub matrix: Vec<MatrixEntry>,
    pub engine: EngineConfig,
    /// Executions per side; the majority result is compared.
    pub repeat: usize,
    pub parallelism: usize,
    pub shim_cmd: Vec<String>,
    pub feedback: FeedbackConfig,
    pub perf: PerfConfig,
    pub fingerprint: FingerprintPolicy,
    pub only: Option<Only>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            output_root: PathBuf::from("campaign-out"),
            seed: 0,
            sources: Sources::default(),
            fill: FillConfig::default(),
            enhance: true,
            mrs: MrId::ALL.to_vec(),
            matrix: default_matrix_entries(),
            engine: EngineConfig::default(),
            repeat: 1,
            parallelism: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            shim_cmd: vec!["node".into(), "shim/dist/main.js".into()],
            feedback: FeedbackConfig::default(),
            perf: PerfConfig::default(),
            fingerprint: FingerprintPolicy::default(),
            only: None,
        }
    }
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self, CampaignError> {
        toml::from_str(text).map_err(|e| CampaignError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CampaignError> {
        let text = std::fs::read_to_string(path).map_err(|source| CampaignError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        // relative paths in the file are relative to the file
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.output_root);
        cfg.sources.corpus.iter_mut().for_each(|c| fix(&mut c.path));
        cfg.sources.handwritten.iter_mut().for_each(|c| fix(&mut c.path));
        let providers = cfg
            .sources
            .llm
            .iter_mut()
            .map(|s| &mut s.provider)
            .chain(cfg.feedback.analysis_provider.as_mut())
            .chain(cfg.feedback.refine_provider.as_mut());
        for p in providers {
            if let Some(t) = p.transcript.as_mut() {
                fix(t);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// The config with an ablation mode applied.
    pub fn effective(&self) -> CampaignConfig {
        let mut c = self.clone();
        let Some(only) = self.only else { return c };
        match only {
            Only::Llm | Only::Feedback => {
                c.sources.corpus.clear();
                c.sources.handwritten.clear();
                c.feedback.enabled = only == Only::Feedback;
                c.mrs.clear();
            }
            Only::Extract => {
                c.sources.llm.clear();
                c.sources.handwritten.clear();
                c.feedback.enabled = false;
                c.mrs.clear();
            }
            Only::Mr => {
                c.feedback.enabled = false;
                if c.mrs.is_empty() {
                    c.mrs = MrId::ALL.to_vec();
                }
            }
            Only::Diff => {
                c.feedback.enabled = false;
                c.mrs.clear();
            }
        }
        c
    }

    fn differential(&self) -> bool {
        self.only != Some(Only::Mr)
    }

    pub fn validate(&self) -> Result<Vec<ObfuscationConfig>, CampaignError> {
        let bad = |m: String| Err(CampaignError::Config(m));
        self.fill.validate().map_err(|e| CampaignError::Config(e.to_string()))?;
        if self.repeat == 0 {
            return bad("repeat must be at least 1".into());
        }
        if self.engine.cmd.is_empty() {
            return bad("engine.cmd is empty".into());
        }
        if !(self.engine.timeout_s > 0.0) {
            return bad("engine.timeout_s must be positive".into());
        }
        let matrix = self.matrix.iter().map(MatrixEntry::config).collect::<Result<Vec<_>, _>>()?;
        let mut seen = BTreeSet::new();
        for c in &matrix {
            if !seen.insert(c.label()) {
                return bad(format!("duplicate matrix entry {}", c.label()));
            }
        }
        if matrix.iter().any(|c| !c.tool.is_stub()) && self.shim_cmd.is_empty() {
            return bad("matrix has real tools but shim_cmd is empty".into());
        }
        for c in &self.sources.corpus {
            if !c.path.is_dir() {
                return bad(format!("corpus {} is not a directory", c.path.display()));
            }
        }
        for h in &self.sources.handwritten {
            if !h.path.is_dir() {
                return bad(format!("handwritten sketch dir {} is not a directory", h.path.display()));
            }
        }
        for s in &self.sources.llm {
            if s.provider.kind == llm::ProviderKind::Transcript
                && !s.provider.transcript.as_ref().is_some_and(|p| p.is_file())
            {
                return bad(format!("provider {} has no transcript file", s.provider.id));
            }
        }
        if self.feedback.enabled
            && self.feedback.analysis_provider.is_none()
            && self.sources.llm.is_empty()
        {
            return bad("feedback needs an analysis provider or an llm source".into());
        }
        Ok(matrix)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CountRow {
    pub tool: String,
    pub preset: String,
    pub oracle: String,
    /// A failure category, or "pass".
    pub category: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfRow {
    pub config: String,
    pub programs: usize,
    pub avg_size_bytes: f64,
    pub avg_wall_ms: f64,
    pub avg_peak_rss_kb: f64,
    pub size_delta_pct: f64,
    pub wall_delta_pct: f64,
    pub rss_delta_pct: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub sketches: usize,
    pub valid_sketches: usize,
    pub programs: usize,
    pub ground_executions: usize,
    pub variants: usize,
    pub obfuscation_errors: usize,
    pub metamorphic_programs: usize,
    pub verdicts: usize,
    pub failures: usize,
    pub nondeterministic: usize,
    pub counts: Vec<CountRow>,
    pub reports: Vec<BugReport>,
    /// Fingerprints first seen in programs from refined sketches.
    pub feedback_new_reports: Vec<String>,
    pub errors: usize,
    pub perf: Vec<PerfRow>,
}

fn seed_of(id: &str) -> u64 {
    u64::from_str_radix(&id[..16.min(id.len())], 16).unwrap_or(0)
}

fn record_error(store: &mut ResultStore, stage: &str, subject: &str, message: String) -> Result<(), StoreError> {
    log::warn!("{stage} {subject}: {message}");
    store.put(Record::Error(ErrorRecord {
        id: key_id(&["error", stage, subject]),
        stage: stage.to_string(),
        subject: subject.to_string(),
        message,
    }))?;
    Ok(())
}

struct Runner {
    cfg: CampaignConfig,
    matrix: Vec<ObfuscationConfig>,
    store: ResultStore,
    engine: Engine,
    obfuscator: Obfuscator,
}

/// Original program and the filled text it came from.
struct Original {
    id: String,
    filled: String,
    seed: u64,
    sketch_id: String,
    round: usize,
}

impl Runner {
    fn exec_id(&self, artifact: &str, run: usize) -> String {
        key_id(&[
            "exec",
            artifact,
            &self.engine.cfg.cmd.join(" "),
            &self.engine.cfg.timeout_s.to_string(),
            &run.to_string(),
        ])
    }

    /// Runs each artifact `repeat` times, reusing stored executions.
    fn execute(&mut self, artifacts: &[String]) -> Result<HashMap<String, Vec<(String, NormalizedResult)>>, CampaignError> {
        let repeat = self.cfg.repeat;
        let mut todo = Vec::new();
        let mut seen = BTreeSet::new();
        for a in artifacts {
            if !seen.insert(a.clone()) {
                continue;
            }
            for run in 0..repeat {
                if !self.store.contains("execution", &self.exec_id(a, run)) {
                    todo.push((a.clone(), run));
                }
            }
        }
        if !todo.is_empty() {
            let sources = todo
                .iter()
                .map(|(a, _)| self.store.artifact(a))
                .collect::<Result<Vec<_>, _>>()?;
            let results = self.engine.execute_many(&sources, self.cfg.parallelism.max(1));
            for ((artifact, run), res) in todo.into_iter().zip(results) {
                match res {
                    Ok(r) => {
                        let id = self.exec_id(&artifact, run);
                        self.store.put(Record::Execution(ExecutionRecord {
                            id,
                            artifact,
                            run,
                            result: exec::normalize(&r),
                            wall_ms: r.wall_ms,
                            peak_rss_kb: r.peak_rss_kb,
                        }))?;
                    }
                    Err(e) => record_error(&mut self.store, "execute", &artifact, e.to_string())?,
                }
            }
        }
        let mut out = HashMap::new();
        for a in seen {
            let runs: Vec<(String, NormalizedResult)> = (0..repeat)
                .filter_map(|run| {
                    let id = self.exec_id(&a, run);
                    match self.store.get("execution", &id) {
                        Some(Record::Execution(e)) => Some((id, e.result.clone())),
                        _ => None,
                    }
                })
                .collect();
            if !runs.is_empty() {
                out.insert(a, runs);
            }
        }
        Ok(out)
    }

    fn variant_id(program: &str, c: &ObfuscationConfig) -> String {
        let seed = c.tool_seed.map(|s| s.to_string()).unwrap_or_default();
        key_id(&["variant", program, c.tool.label(), c.preset.label(), &seed])
    }

    /// Obfuscates a program under one config, reusing a stored variant.
    fn obfuscate(&mut self, program: &str, c: &ObfuscationConfig) -> Result<VariantRecord, CampaignError> {
        let id = Self::variant_id(program, c);
        if let Some(Record::Variant(v)) = self.store.get("variant", &id) {
            return Ok(v.clone());
        }
        let src = self.store.artifact(program)?;
        let (artifact, error) = match self.obfuscator.obfuscate(&src, c) {
            Ok(text) => (Some(self.store.put_artifact(&text)?), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let v = VariantRecord {
            id,
            program_id: program.to_string(),
            tool: c.tool.label().to_string(),
            preset: c.preset.label().to_string(),
            artifact,
            error,
        };
        self.store.put(Record::Variant(v.clone()))?;
        Ok(v)
    }

    fn put_verdict(&mut self, v: Verdict, executions: Vec<String>, round: usize) -> Result<(), CampaignError> {
        let c = &v.context;
        let oracle = match v.oracle {
            OracleKind::Differential => "diff",
            OracleKind::Metamorphic => "mr",
        };
        let id = key_id(&[
            "verdict",
            oracle,
            &c.program_id,
            &c.variant_id,
            &c.tool,
            &c.preset,
            c.mr.as_deref().unwrap_or(""),
        ]);
        self.store.put(Record::Verdict(VerdictRecord {
            id,
            executions,
            verdict: v,
            round,
        }))?;
        Ok(())
    }

    fn collect_sources(&mut self) -> Result<Vec<(String, usize)>, CampaignError> {
        let mut ids = Vec::new();
        let add = |store: &mut ResultStore, text: &str, origin: Origin, source: &str, meta: (Option<String>, u64, usize)| -> Result<String, CampaignError> {
            let id = store.put_artifact(text)?;
            let valid = sketch::check_sketch_text(text).valid;
            store.put(Record::Sketch(SketchRecord {
                id: id.clone(),
                origin,
                source: source.to_string(),
                valid,
                response_hash: meta.0,
                timestamp: meta.1,
                round: meta.2,
            }))?;
            Ok(id)
        };
        for s in self.cfg.sources.llm.clone() {
            let sid = key_id(&["llm", &s.provider.id, &s.provider.model, &s.count.to_string()]);
            if let Some(Record::Source(done)) = self.store.get("source", &sid) {
                ids.extend(done.sketches.iter().map(|i| (i.clone(), 0)));
                continue;
            }
            let result = s
                .provider
                .connect()
                .map_err(llm::LlmError::from)
                .and_then(|mut p| llm::generate_sketches(p.as_mut(), s.count));
            let result = match result {
                Ok(r) => r,
                Err(e) => {
                    record_error(&mut self.store, "generate", &s.provider.id, e.to_string())?;
                    continue;
                }
            };
            self.archive_responses(&result.responses)?;
            let mut these = Vec::new();
            for g in &result.sketches {
                these.push(add(
                    &mut self.store,
                    &g.text,
                    g.origin(),
                    &s.provider.id,
                    (Some(g.response_hash.clone()), g.timestamp, 0),
                )?);
            }
            self.store.put(Record::Source(SourceRecord {
                id: sid,
                sketches: these.clone(),
                detail: serde_json::to_value(&result.report).unwrap(),
            }))?;
            ids.extend(these.into_iter().map(|i| (i, 0)));
        }
        for c in self.cfg.sources.corpus.clone() {
            let files = extractor::corpus_files(&c.path, c.sample, self.cfg.seed).map_err(|source| CampaignError::Io {
                path: c.path.clone(),
                source,
            })?;
            let (results, summary) = extractor::extract_corpus(&files, ExtractOptions::default());
            let mut these = Vec::new();
            for (path, r) in results {
                match r {
                    Ok(rec) if rec.sketch.has_placeholders() => {
                        let origin = Origin::Extracted(path.display().to_string());
                        these.push(add(&mut self.store, &rec.sketch.source_text, origin, "corpus", (None, 0, 0))?);
                    }
                    Ok(_) => {}
                    Err(e) => record_error(&mut self.store, "extract", &path.display().to_string(), e.reason())?,
                }
            }
            let sid = key_id(&["corpus", &c.path.display().to_string()]);
            self.store.put(Record::Source(SourceRecord {
                id: sid,
                sketches: these.clone(),
                detail: serde_json::to_value(&summary).unwrap(),
            }))?;
            ids.extend(these.into_iter().map(|i| (i, 0)));
        }
        for h in self.cfg.sources.handwritten.clone() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(&h.path)
                .map_err(|source| CampaignError::Io {
                    path: h.path.clone(),
                    source,
                })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "js"))
                .collect();
            files.sort();
            for f in files {
                let text = std::fs::read_to_string(&f).map_err(|source| CampaignError::Io { path: f.clone(), source })?;
                ids.push((add(&mut self.store, &text, Origin::Handwritten, "handwritten", (None, 0, 0))?, 0));
            }
        }
        let mut seen = BTreeSet::new();
        ids.retain(|(i, _)| seen.insert(i.clone()));
        Ok(ids)
    }

    fn archive_responses(&self, responses: &[llm::RawResponse]) -> Result<(), CampaignError> {
        let dir = self.store.root().join("responses");
        std::fs::create_dir_all(&dir).map_err(|source| CampaignError::Io { path: dir.clone(), source })?;
        for r in responses {
            let p = dir.join(format!("{}.txt", r.response_hash));
            if !p.exists() {
                std::fs::write(&p, &r.response_text).map_err(|source| CampaignError::Io { path: p.clone(), source })?;
            }
        }
        Ok(())
    }

    /// Fills and enhances valid sketches.
    fn programs(&mut self, sketches: &[(String, usize)]) -> Result<Vec<Original>, CampaignError> {
        let mut out = Vec::new();
        for (sid, round) in sketches {
            let valid = matches!(self.store.get("sketch", sid), Some(Record::Sketch(s)) if s.valid);
            if !valid {
                continue;
            }
            let text = self.store.artifact(sid)?;
            let parsed = match sketch::parse_sketch(&text) {
                Ok(s) => s,
                Err(e) => {
                    record_error(&mut self.store, "parse", sid, e.to_string())?;
                    continue;
                }
            };
            let fill_cfg = FillConfig {
                rng_seed: derive_seed(self.cfg.seed, seed_of(sid)),
                ..self.cfg.fill.clone()
            };
            let filled = match filler::fill(&parsed, &fill_cfg) {
                Ok(f) => f,
                Err(e) => {
                    record_error(&mut self.store, "fill", sid, e.to_string())?;
                    continue;
                }
            };
            for f in filled {
                let fid = self.store.put_artifact(&f.source_text)?;
                self.store.put(Record::Program(ProgramRecord {
                    id: fid.clone(),
                    role: ProgramRole::Filled,
                    sketch_id: sid.clone(),
                    parent: None,
                    seed: f.seed_used,
                    mr: None,
                    round: *round,
                }))?;
                let Some(id) = self.original_of(&f.source_text, sid, &fid, f.seed_used, *round, ProgramRole::Original, None)? else {
                    continue;
                };
                out.push(Original {
                    id,
                    filled: f.source_text,
                    seed: f.seed_used,
                    sketch_id: sid.clone(),
                    round: *round,
                });
            }
        }
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn original_of(
        &mut self,
        filled: &str,
        sketch_id: &str,
        parent: &str,
        seed: u64,
        round: usize,
        role: ProgramRole,
        mr: Option<String>,
    ) -> Result<Option<String>, CampaignError> {
        let text = if self.cfg.enhance {
            match enhancer::enhance(filled) {
                Ok(q) => q.source_text,
                Err(e) => {
                    record_error(&mut self.store, "enhance", parent, e.to_string())?;
                    return Ok(None);
                }
            }
        } else {
            filled.to_string()
        };
        let id = self.store.put_artifact(&text)?;
        self.store.put(Record::Program(ProgramRecord {
            id: id.clone(),
            role,
            sketch_id: sketch_id.to_string(),
            parent: Some(parent.to_string()),
            seed,
            mr,
            round,
        }))?;
        Ok(Some(id))
    }

    fn process(&mut self, sketches: &[(String, usize)]) -> Result<(), CampaignError> {
        let originals = self.programs(sketches)?;
        let ids: Vec<String> = originals.iter().map(|o| o.id.clone()).collect();
        let ground = self.execute(&ids)?;

        // obfuscation is serial: one shim process
        let mut variants: Vec<(usize, ObfuscationConfig, VariantRecord)> = Vec::new();
        for (i, o) in originals.iter().enumerate() {
            for c in self.matrix.clone() {
                let v = self.obfuscate(&o.id, &c)?;
                variants.push((i, c, v));
            }
        }
        let artifacts: Vec<String> = variants.iter().filter_map(|(_, _, v)| v.artifact.clone()).collect();
        let vexec = self.execute(&artifacts)?;

        if self.cfg.differential() {
            for (i, c, v) in &variants {
                let o = &originals[*i];
                let ctx = VerdictContext {
                    program_id: o.id.clone(),
                    variant_id: v.artifact.clone().unwrap_or_else(|| v.id.clone()),
                    tool: c.tool.label().to_string(),
                    preset: c.preset.label().to_string(),
                    mr: None,
                    source_program: None,
                };
                let Some(g) = ground.get(&o.id) else { continue };
                match (&v.artifact, &v.error) {
                    (_, Some(err)) => {
                        let ex = g.iter().map(|(id, _)| id.clone()).collect();
                        self.put_verdict(Verdict::obfuscation_error(ctx, err), ex, o.round)?;
                    }
                    (Some(a), None) => {
                        let Some(ve) = vexec.get(a) else { continue };
                        let gr: Vec<NormalizedResult> = g.iter().map(|(_, r)| r.clone()).collect();
                        let vr: Vec<NormalizedResult> = ve.iter().map(|(_, r)| r.clone()).collect();
                        let verdict = compare_repeated(&gr, &vr, ctx);
                        let ex = g.iter().chain(ve).map(|(id, _)| id.clone()).collect();
                        self.put_verdict(verdict, ex, o.round)?;
                    }
                    (None, None) => {}
                }
            }
        }

        if !self.cfg.mrs.is_empty() {
            self.metamorphic(&originals, &variants, &vexec)?;
        }
        if self.cfg.perf.enabled {
            self.measure(&originals, &variants)?;
        }
        Ok(())
    }

    fn metamorphic(
        &mut self,
        originals: &[Original],
        variants: &[(usize, ObfuscationConfig, VariantRecord)],
        vexec: &HashMap<String, Vec<(String, NormalizedResult)>>,
    ) -> Result<(), CampaignError> {
        let mut pis: Vec<(usize, String, String)> = Vec::new();
        for (i, o) in originals.iter().enumerate() {
            for (k, id) in self.cfg.mrs.clone().into_iter().enumerate() {
                let mr = MetamorphicRelation::injecting(id, derive_seed(o.seed, k as u64));
                let transformed = match apply_mr(&o.filled, mr) {
                    Ok(t) if t.applied > 0 => t.source_text,
                    Ok(_) => continue,
                    Err(e) => {
                        record_error(&mut self.store, "mr", &o.id, e.to_string())?;
                        continue;
                    }
                };
                if let Some(pid) =
                    self.original_of(&transformed, &o.sketch_id, &o.id, o.seed, o.round, ProgramRole::Metamorphic, Some(mr.label()))?
                {
                    pis.push((i, mr.label(), pid));
                }
            }
        }
        let mut obf_pis = Vec::new();
        for (i, label, pid) in &pis {
            for c in self.matrix.clone() {
                let v = self.obfuscate(pid, &c)?;
                obf_pis.push((*i, label.clone(), c, v));
            }
        }
        let artifacts: Vec<String> = obf_pis.iter().filter_map(|(_, _, _, v)| v.artifact.clone()).collect();
        let piexec = self.execute(&artifacts)?;
        for (i, label, c, vpi) in obf_pis {
            let o = &originals[i];
            let Some((_, _, vp)) = variants.iter().find(|(j, cc, _)| *j == i && *cc == c) else { continue };
            let Some(op_art) = vp.artifact.clone() else { continue };
            let ctx = VerdictContext {
                program_id: o.id.clone(),
                variant_id: vpi.artifact.clone().unwrap_or_else(|| vpi.id.clone()),
                tool: c.tool.label().to_string(),
                preset: c.preset.label().to_string(),
                mr: Some(label),
                source_program: Some(vpi.program_id.clone()),
            };
            let Some(op) = vexec.get(&op_art) else { continue };
            if let Some(err) = &vpi.error {
                let mut v = Verdict::obfuscation_error(ctx, err);
                v.oracle = OracleKind::Metamorphic;
                self.put_verdict(v, op.iter().map(|(id, _)| id.clone()).collect(), o.round)?;
                continue;
            }
            let Some(opi) = vpi.artifact.as_ref().and_then(|a| piexec.get(a)) else { continue };
            let a: Vec<NormalizedResult> = op.iter().map(|(_, r)| r.clone()).collect();
            let b: Vec<NormalizedResult> = opi.iter().map(|(_, r)| r.clone()).collect();
            let verdict = match (majority(&a), majority(&b)) {
                (Some(x), Some(y)) => compare_metamorphic(x, y, ctx),
                _ => {
                    let mut v = compare_metamorphic(&a[0], &b[0], ctx);
                    v.nondeterministic = true;
                    v
                }
            };
            let ex = op.iter().chain(opi).map(|(id, _)| id.clone()).collect();
            self.put_verdict(verdict, ex, o.round)?;
        }
        Ok(())
    }

    fn measure(
        &mut self,
        originals: &[Original],
        variants: &[(usize, ObfuscationConfig, VariantRecord)],
    ) -> Result<(), CampaignError> {
        let runs = self.cfg.perf.runs.max(1);
        let mut jobs: Vec<(String, String, String)> = originals
            .iter()
            .map(|o| (o.id.clone(), o.id.clone(), "original".to_string()))
            .collect();
        for (i, c, v) in variants {
            if let Some(a) = &v.artifact {
                jobs.push((a.clone(), originals[*i].id.clone(), c.label()));
            }
        }
        for (artifact, program, config) in jobs {
            let id = key_id(&["perf", &artifact, &config, &runs.to_string()]);
            if self.store.contains("perf", &id) {
                continue;
            }
            let src = self.store.artifact(&artifact)?;
            match self.engine.measure_source(&src, runs) {
                Ok(sample) => {
                    self.store.put(Record::Perf(PerfRecord {
                        id,
                        artifact,
                        program,
                        config,
                        sample,
                    }))?;
                }
                Err(e) => record_error(&mut self.store, "perf", &artifact, e.to_string())?,
            }
        }
        Ok(())
    }

    fn feedback(&mut self) -> Result<(), CampaignError> {
        let fb = self.cfg.feedback.clone();
        let default_provider = self.cfg.sources.llm.first().map(|s| s.provider.clone());
        let Some(analysis_cfg) = fb.analysis_provider.clone().or_else(|| default_provider.clone()) else {
            return Ok(());
        };
        let refine_cfg = fb.refine_provider.clone().or(default_provider).unwrap_or_else(|| analysis_cfg.clone());
        for round in 1..=fb.rounds {
            let verdicts: Vec<Verdict> = self
                .store
                .verdicts()
                .filter(|v| v.round < round)
                .map(|v| v.verdict.clone())
                .collect();
            let reports: Vec<BugReport> = dedupe_with(&verdicts, self.cfg.fingerprint)
                .into_iter()
                .filter(|r| r.category != FailCategory::ObfuscationError)
                .collect();
            if reports.is_empty() {
                break;
            }
            let sid = key_id(&["feedback", &round.to_string(), &analysis_cfg.id, &refine_cfg.id]);
            let sketch_ids: Vec<String> = if let Some(Record::Source(done)) = self.store.get("source", &sid) {
                done.sketches.clone()
            } else {
                let briefs = {
                    let store = &self.store;
                    let lookup = |pid: &str| -> Option<String> {
                        // analyze the program without instrumentation when possible
                        let parent = store.programs().find(|p| p.id == pid).and_then(|p| p.parent.clone());
                        store.artifact(parent.as_deref().unwrap_or(pid)).ok()
                    };
                    analysis_cfg
                        .connect()
                        .map_err(llm::LlmError::from)
                        .and_then(|mut p| llm::analyze_failure(&reports, &lookup, p.as_mut()))
                };
                let briefs: Vec<FeedbackBugBrief> = match briefs {
                    Ok(b) => b,
                    Err(e) => {
                        record_error(&mut self.store, "analyze", &round.to_string(), e.to_string())?;
                        break;
                    }
                };
                let mut these = Vec::new();
                let mut provider = match refine_cfg.connect() {
                    Ok(p) => p,
                    Err(e) => {
                        record_error(&mut self.store, "refine", &refine_cfg.id, e.to_string())?;
                        break;
                    }
                };
                for b in &briefs {
                    match llm::refine_sketches(b, provider.as_mut(), fb.sketches_per_brief) {
                        Ok(r) => {
                            self.archive_responses(&r.responses)?;
                            for g in &r.sketches {
                                let id = self.store.put_artifact(&g.text)?;
                                self.store.put(Record::Sketch(SketchRecord {
                                    id: id.clone(),
                                    origin: g.origin(),
                                    source: format!("feedback:{}", refine_cfg.id),
                                    valid: g.check.valid,
                                    response_hash: Some(g.response_hash.clone()),
                                    timestamp: g.timestamp,
                                    round,
                                }))?;
                                these.push(id);
                            }
                        }
                        Err(e) => record_error(&mut self.store, "refine", &b.source_verdicts.join(","), e.to_string())?,
                    }
                }
                self.store.put(Record::Source(SourceRecord {
                    id: sid,
                    sketches: these.clone(),
                    detail: serde_json::to_value(&briefs).unwrap(),
                }))?;
                these
            };
            let items: Vec<(String, usize)> = sketch_ids.into_iter().map(|i| (i, round)).collect();
            self.process(&items)?;
        }
        Ok(())
    }
}

pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignSummary, CampaignError> {
    let cfg = cfg.effective();
    let matrix = cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_root).map_err(|source| CampaignError::Io {
        path: cfg.output_root.clone(),
        source,
    })?;
    let store = ResultStore::open(&cfg.output_root)?;
    let engine = Engine::new(EngineConfig {
        work_dir: cfg.output_root.join("work"),
        ..cfg.engine.clone()
    });
    let mut runner = Runner {
        obfuscator: Obfuscator::new(cfg.shim_cmd.clone()),
        cfg,
        matrix,
        store,
        engine,
    };
    let sketches = runner.collect_sources()?;
    runner.process(&sketches)?;
    if runner.cfg.feedback.enabled {
        runner.feedback()?;
    }
    Ok(summarize(&runner.store, &runner.matrix, runner.cfg.fingerprint))
}

/// Aggregates a store. Pure: the same store gives the same summary.
pub fn summarize(store: &ResultStore, matrix: &[ObfuscationConfig], policy: FingerprintPolicy) -> CampaignSummary {
    let originals: BTreeSet<&str> = store
        .programs()
        .filter(|p| p.role == ProgramRole::Original)
        .map(|p| p.id.as_str())
        .collect();
    let mut s = CampaignSummary {
        sketches: store.sketches().count(),
        valid_sketches: store.sketches().filter(|k| k.valid).count(),
        programs: originals.len(),
        metamorphic_programs: store.programs().filter(|p| p.role == ProgramRole::Metamorphic).count(),
        ground_executions: store
            .executions()
            .filter(|e| originals.contains(e.artifact.as_str()))
            .count(),
        errors: store.errors().count(),
        ..Default::default()
    };
    for v in store.variants().filter(|v| originals.contains(v.program_id.as_str())) {
        if v.artifact.is_some() {
            s.variants += 1;
        } else {
            s.obfuscation_errors += 1;
        }
    }
    let mut counts: BTreeMap<(String, String, String, String), usize> = BTreeMap::new();
    let mut verdicts = Vec::new();
    for r in store.verdicts() {
        let v = &r.verdict;
        s.verdicts += 1;
        if !v.is_pass() {
            s.failures += 1;
        }
        if v.nondeterministic {
            s.nondeterministic += 1;
        }
        let oracle = match v.oracle {
            OracleKind::Differential => "differential",
            OracleKind::Metamorphic => "metamorphic",
        };
        let cat = v.category.map(|c| c.label()).unwrap_or("pass");
        *counts
            .entry((v.context.tool.clone(), v.context.preset.clone(), oracle.into(), cat.into()))
            .or_default() += 1;
        verdicts.push((r.round, v.clone()));
    }
    s.counts = counts
        .into_iter()
        .map(|((tool, preset, oracle, category), count)| CountRow {
            tool,
            preset,
            oracle,
            category,
            count,
        })
        .collect();
    let all: Vec<Verdict> = verdicts.iter().map(|(_, v)| v.clone()).collect();
    s.reports = dedupe_with(&all, policy);
    let base: BTreeSet<String> = dedupe_with(
        &verdicts.iter().filter(|(r, _)| *r == 0).map(|(_, v)| v.clone()).collect::<Vec<_>>(),
        policy,
    )
    .into_iter()
    .map(|r| r.fingerprint)
    .collect();
    s.feedback_new_reports = s
        .reports
        .iter()
        .map(|r| r.fingerprint.clone())
        .filter(|f| !base.contains(f))
        .collect();
    s.perf = perf_table(store, matrix);
    s
}

/// Averages per config, with changes relative to the same programs measured
/// directly. Empty when nothing was measured.
pub fn perf_table(store: &ResultStore, matrix: &[ObfuscationConfig]) -> Vec<PerfRow> {
    let originals: HashMap<&str, &PerfRecord> = store
        .perf()
        .filter(|p| p.config == "original")
        .map(|p| (p.program.as_str(), p))
        .collect();
    if originals.is_empty() {
        return Vec::new();
    }
    let avg = |xs: &[f64]| if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 };
    let delta = |v: f64, o: f64| if o == 0.0 { 0.0 } else { (v - o) / o * 100.0 };
    let row = |config: String, pairs: &[(&PerfRecord, &PerfRecord)]| {
        let f = |sel: &dyn Fn(&PerfRecord) -> f64, which: usize| -> f64 {
            avg(&pairs
                .iter()
                .map(|(o, v)| sel(if which == 0 { o } else { v }))
                .collect::<Vec<_>>())
        };
        let size = |p: &PerfRecord| p.sample.file_size_bytes as f64;
        let wall = |p: &PerfRecord| p.sample.avg_wall_ms;
        let rss = |p: &PerfRecord| p.sample.avg_peak_rss_kb;
        PerfRow {
            config,
            programs: pairs.len(),
            avg_size_bytes: f(&size, 1),
            avg_wall_ms: f(&wall, 1),
            avg_peak_rss_kb: f(&rss, 1),
            size_delta_pct: delta(f(&size, 1), f(&size, 0)),
            wall_delta_pct: delta(f(&wall, 1), f(&wall, 0)),
            rss_delta_pct: delta(f(&rss, 1), f(&rss, 0)),
        }
    };
    let mut keys: Vec<&&str> = originals.keys().collect();
    keys.sort();
    let own: Vec<(&PerfRecord, &PerfRecord)> = keys.iter().map(|k| (originals[**k], originals[**k])).collect();
    let mut rows = vec![row("original".into(), &own)];
    for c in matrix {
        let label = c.label();
        let mut pairs: Vec<(&PerfRecord, &PerfRecord)> = store
            .perf()
            .filter(|p| p.config == label)
            .filter_map(|p| originals.get(p.program.as_str()).map(|o| (*o, p)))
            .collect();
        pairs.sort_by(|a, b| a.0.program.cmp(&b.0.program));
        if !pairs.is_empty() {
            rows.push(row(label, &pairs));
        }
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Text,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = CampaignError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            _ => Err(CampaignError::Config(format!("unknown report format `{s}`"))),
        }
    }
}

pub fn render(summary: &CampaignSummary, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(summary).expect("summary serializes") + "\n",
        ReportFormat::Text => {
            let s = summary;
            let mut out = format!(
                "sketches {} (valid {}), programs {}, variants {}, obfuscation errors {}, verdicts {} (failing {}, nondeterministic {}), errors {}\n",
                s.sketches, s.valid_sketches, s.programs, s.variants, s.obfuscation_errors, s.verdicts, s.failures,
                s.nondeterministic, s.errors
            );
            out += &format!("\n{:<16} {:<8} {:<13} {:<22} {:>6}\n", "tool", "preset", "oracle", "category", "count");
            for r in &s.counts {
                out += &format!("{:<16} {:<8} {:<13} {:<22} {:>6}\n", r.tool, r.preset, r.oracle, r.category, r.count);
            }
            out += &format!("\nbug reports: {}\n", s.reports.len());
            for r in &s.reports {
                let new = if s.feedback_new_reports.contains(&r.fingerprint) { " (feedback)" } else { "" };
                out += &format!(
                    "  {:<22} {}/{} {} x{} exemplar {}{}\n",
                    r.category.label(),
                    r.tool,
                    r.preset,
                    r.shape,
                    r.occurrences,
                    r.exemplar_program,
                    new
                );
            }
            if !s.perf.is_empty() {
                out += &format!(
                    "\n{:<22} {:>5} {:>12} {:>10} {:>12} {:>9} {:>9} {:>9}\n",
                    "config", "n", "size(B)", "wall(ms)", "rss(KB)", "size%", "wall%", "rss%"
                );
                for p in &s.perf {
                    out += &format!(
                        "{:<22} {:>5} {:>12.1} {:>10.2} {:>12.1} {:>+9.2} {:>+9.2} {:>+9.2}\n",
                        p.config, p.programs, p.avg_size_bytes, p.avg_wall_ms, p.avg_peak_rss_kb, p.size_delta_pct,
                        p.wall_delta_pct, p.rss_delta_pct
                    );
                }
            }
            out
        }
    }
}

/// Summary of an existing campaign directory.
pub fn report(store: &ResultStore, format: ReportFormat) -> String {
    let configs: BTreeSet<(String, String)> = store.variants().map(|v| (v.tool.clone(), v.preset.clone())).collect();
    let matrix: Vec<ObfuscationConfig> = configs
        .iter()
        .filter_map(|(t, p)| ObfuscationConfig::new(t.parse().ok()?, p.parse().ok()?).ok())
        .collect();
    render(&summarize(store, &matrix, FingerprintPolicy::default()), format)
}
