//! `sketchprobe` command line.
//!
//! Each pipeline stage is exposed as its own subcommand so single steps can
//! be rerun (and bug reproductions replayed) outside a campaign.

use std::fs;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use sketchprobe::campaign::{self, CampaignConfig, Only, ReportFormat};
use sketchprobe::enhancer;
use sketchprobe::exec::{self, Engine, EngineConfig};
use sketchprobe::extractor::{self, ExtractOptions};
use sketchprobe::filler::{self, FillConfig};
use sketchprobe::llm::{self, ProviderConfig, ProviderKind};
use sketchprobe::mr::{self, Direction, MetamorphicRelation, MrId};
use sketchprobe::obfuscate::{self, ObfuscationConfig, Obfuscator, Preset, Tool};
use sketchprobe::sketch::{self, Origin};
use sketchprobe::store::ResultStore;

#[derive(Parser)]
#[command(name = "sketchprobe", version, about = "Sketch-driven testing of JavaScript obfuscators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ask a model for sketches and write the ones it returns.
    Generate {
        /// Recorded responses (JSON list of {request_hash, response_text}).
        #[arg(long, conflicts_with = "kind")]
        transcript: Option<PathBuf>,
        /// Live provider: openai_chat, anthropic_messages or gemini_generate.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long, default_value = "")]
        model: String,
        /// Environment variable holding the provider token.
        #[arg(long, default_value = "")]
        token_env: String,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn concrete programs into sketches.
    Extract {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check sketches against the DSL and print violations as JSON lines.
    Validate {
        #[arg(required = true)]
        sketches: Vec<PathBuf>,
    },
    /// Fill a sketch into concrete programs.
    Fill {
        #[arg(long)]
        sketch: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Instrument a program with traces and checksums.
    Enhance {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the injected-statement manifest.
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// Apply a metamorphic relation, e.g. `algebraic` or `dead_code:remove`.
    Mr {
        #[arg(long)]
        relation: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Obfuscate one program.
    Obfuscate {
        #[arg(long)]
        tool: String,
        #[arg(long, default_value = "default")]
        preset: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Shim command line for the real tools.
        #[arg(long, num_args = 1.., default_values = ["node", "shim/dist/main.js"])]
        shim: Vec<String>,
    },
    /// Execute a program and print its normalized result as JSON.
    Run {
        #[arg(long)]
        program: PathBuf,
        #[arg(long, default_value = "node")]
        engine: String,
        #[arg(long, default_value_t = 60.0)]
        timeout: f64,
        /// Print the raw result instead of the normalized one.
        #[arg(long)]
        raw: bool,
    },
    /// Run a whole campaign from a config file and print the summary.
    Campaign {
        #[arg(long)]
        config: PathBuf,
        /// Ablation: llm, feedback, extract, mr or diff.
        #[arg(long)]
        only: Option<String>,
        #[arg(long, default_value = "text")]
        format: String,
    },
    /// Summarize an existing campaign directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value = "text")]
        format: String,
    },
    /// Run a campaign with performance sampling and print the overhead table.
    Perf {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long, default_value = "text")]
        format: String,
    },
    /// Serve the stub obfuscators over the shim protocol on stdin/stdout.
    ShimStub,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse().command) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn stem(path: &Path) -> String {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("sketch");
    name.strip_suffix(".js").unwrap_or(name).to_string()
}

fn parse_relation(s: &str, seed: u64) -> Result<MetamorphicRelation> {
    let (id, dir) = s.split_once(':').unwrap_or((s, "inject"));
    let direction = match dir {
        "inject" => Direction::Inject,
        "remove" => Direction::Remove,
        _ => bail!("unknown direction `{dir}` (expected inject or remove)"),
    };
    Ok(MetamorphicRelation::new(id.parse::<MrId>()?, direction, seed))
}

fn provider_kind(s: &str) -> Result<ProviderKind> {
    Ok(match s {
        "openai_chat" => ProviderKind::OpenaiChat,
        "anthropic_messages" => ProviderKind::AnthropicMessages,
        "gemini_generate" => ProviderKind::GeminiGenerate,
        _ => bail!("unknown provider kind `{s}`"),
    })
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate {
            transcript,
            kind,
            model,
            token_env,
            count,
            out,
        } => {
            let cfg = match (transcript, kind) {
                (Some(t), _) => ProviderConfig::transcript("transcript", &model, t),
                (None, Some(k)) => ProviderConfig::http(&k, provider_kind(&k)?, &model, &token_env),
                (None, None) => bail!("pass --transcript or --kind"),
            };
            let mut provider = cfg.connect()?;
            let result = llm::generate_sketches(provider.as_mut(), count)?;
            fs::create_dir_all(&out)?;
            for (i, s) in result.sketches.iter().enumerate() {
                let dir = if s.check.valid { out.clone() } else { out.join("invalid") };
                write(&dir.join(format!("sketch_{i:03}.js")), &s.text)?;
            }
            let responses: String = result
                .responses
                .iter()
                .map(|r| serde_json::to_string(r).expect("serializable") + "\n")
                .collect();
            write(&out.join("responses.jsonl"), &responses)?;
            write(&out.join("validity.json"), &json(&result.report))?;
            println!(
                "{} sketches ({} valid, {} parse errors) from {} responses",
                result.report.total,
                result.report.valid_count,
                result.report.parse_errors,
                result.responses.len()
            );
        }
        Command::Extract {
            corpus,
            out,
            sample,
            seed,
        } => {
            let files = extractor::corpus_files(&corpus, sample, seed)
                .with_context(|| format!("listing {}", corpus.display()))?;
            let (results, summary) = extractor::extract_corpus(&files, ExtractOptions::default());
            for (path, r) in &results {
                match r {
                    Ok(rec) => {
                        let name = stem(path);
                        write(&out.join(format!("{name}.js")), &rec.sketch.source_text)?;
                        write(&out.join(format!("{name}.values.json")), &json(&rec.original_values))?;
                    }
                    Err(e) => info!("skipped {}: {e}", path.display()),
                }
            }
            write(&out.join("summary.json"), &json(&summary))?;
            println!(
                "{} files, {} extracted, {} skipped",
                summary.files,
                summary.extracted,
                summary.skipped_total()
            );
        }
        Command::Validate { sketches } => {
            let mut invalid = 0;
            for path in &sketches {
                let check = sketch::check_sketch_text(&read(path)?);
                if let Some(e) = &check.parse_error {
                    println!("{}", serde_json::json!({ "file": path, "parse_error": e }));
                }
                for v in &check.violations {
                    println!("{}", serde_json::json!({ "file": path, "violation": v }));
                }
                if !check.valid {
                    invalid += 1;
                }
            }
            eprintln!("{} of {} sketches valid", sketches.len() - invalid, sketches.len());
            if invalid > 0 {
                std::process::exit(2);
            }
        }
        Command::Fill {
            sketch: path,
            seed,
            count,
            out,
        } => {
            let s = sketch::parse_sketch_with_origin(&read(&path)?, Origin::Handwritten)
                .with_context(|| format!("parsing {}", path.display()))?;
            let violations = sketch::validate_sketch(&s);
            if !sketch::is_fillable(&violations) {
                bail!("{} is not fillable:\n{}", path.display(), sketch::violations_to_jsonl(&violations));
            }
            let cfg = FillConfig {
                rng_seed: seed,
                instances_per_sketch: count,
                ..FillConfig::default()
            };
            let name = stem(&path);
            let programs = filler::fill(&s, &cfg)?;
            for (i, p) in programs.iter().enumerate() {
                write(&out.join(format!("{name}.{i}.js")), &p.source_text)?;
                write(&out.join(format!("{name}.{i}.json")), &json(p))?;
            }
            println!("{} programs written to {}", programs.len(), out.display());
        }
        Command::Enhance { input, out, map } => {
            let q = enhancer::enhance(&read(&input)?)?;
            write(&out, &q.source_text)?;
            if let Some(map) = map {
                write(&map, &json(&q.injected))?;
            }
        }
        Command::Mr {
            relation,
            seed,
            input,
            out,
        } => {
            let r = parse_relation(&relation, seed)?;
            let outcome = mr::apply_mr(&read(&input)?, r)?;
            write(&out, &outcome.source_text)?;
            println!("{}: {} sites rewritten", r.label(), outcome.applied);
        }
        Command::Obfuscate {
            tool,
            preset,
            seed,
            input,
            out,
            shim,
        } => {
            let tool: Tool = tool.parse()?;
            let preset: Preset = preset.parse()?;
            let mut cfg = ObfuscationConfig::new(tool, preset)?;
            if let Some(s) = seed {
                cfg = cfg.with_seed(s);
            }
            let text = Obfuscator::new(shim).obfuscate(&read(&input)?, &cfg)?;
            write(&out, &text)?;
        }
        Command::Run {
            program,
            engine,
            timeout,
            raw,
        } => {
            let cfg = EngineConfig {
                cmd: engine.split_whitespace().map(String::from).collect(),
                timeout_s: timeout,
                ..EngineConfig::default()
            };
            let r = Engine::new(cfg).execute(&program)?;
            if raw {
                print!("{}", json(&r));
            } else {
                print!("{}", json(&exec::normalize(&r)));
            }
        }
        Command::Campaign { config, only, format } => {
            let mut cfg = CampaignConfig::load(&config)?;
            if let Some(o) = only {
                cfg.only = Some(o.parse::<Only>()?);
            }
            let format: ReportFormat = format.parse()?;
            let summary = campaign::run_campaign(&cfg)?;
            print!("{}", campaign::render(&summary, format));
        }
        Command::Report { dir, format } => {
            if !dir.join("records.jsonl").exists() {
                bail!("{} is not a campaign directory", dir.display());
            }
            let store = ResultStore::open(&dir)?;
            print!("{}", campaign::report(&store, format.parse()?));
        }
        Command::Perf { config, runs, format } => {
            let mut cfg = CampaignConfig::load(&config)?;
            cfg.perf.enabled = true;
            if let Some(r) = runs {
                cfg.perf.runs = r;
            }
            let summary = campaign::run_campaign(&cfg)?;
            match format.parse::<ReportFormat>()? {
                ReportFormat::Json => print!("{}", json(&summary.perf)),
                ReportFormat::Text => {
                    let only_perf = campaign::CampaignSummary {
                        perf: summary.perf,
                        ..Default::default()
                    };
                    let text = campaign::render(&only_perf, ReportFormat::Text);
                    // drop the empty count and report sections
                    let table = text.split_once("\nconfig").map(|(_, t)| format!("config{t}"));
                    print!("{}", table.unwrap_or_default());
                }
            }
        }
        Command::ShimStub => {
            let stdin = io::stdin();
            obfuscate::serve(BufReader::new(stdin.lock()), io::stdout().lock(), obfuscate::stub_handler)?;
        }
    }
    Ok(())
}
