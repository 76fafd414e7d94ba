//! Command-line front end. Every subcommand maps onto one library
//! operation; `main.rs` only forwards to [`main_with_args`].

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::ffi::OsString;
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::autoif::{self, AutoifError, PipelineConfig, Stage};
use crate::constraints::{ConstraintError, DEFAULT_CV_THRESHOLD};
use crate::corpus::{self, CorpusError, DedupOptions, NearDupConfig, Shard};
use crate::metrics::{self, CompliancePair, MetricsError, OutputRecord, Report, ReportFormat, ScoreTable};
use crate::packing::{self, PackingError, DEFAULT_CAPACITY, DEFAULT_MESSAGE_OVERHEAD};
use crate::script_analysis::{Allowlist, PurityPolicy};

const FORMATS: &str = r#"FILE FORMATS (one JSON record per line unless noted)

  chat records (corpus *, pack, autoif output):
    {"messages":[{"role":"user","content":"สวัสดี"},{"role":"assistant","content":"สวัสดีครับ"}],"source":"systemchat"}

  seed instructions (seeds validate, autoif run):
    {"id":"th-01","language":"th","text":"ตอบเป็นภาษาไทย","constraints":[{"id":"c1","kind":"thai_only","params":{}}],"cross_validation":[{"response":"ภาษาไทย","expected_pass":true},{"response":"Thai","expected_pass":false,"constraint":"c1"}]}

  constraint (inside seeds and compliance pairs):
    {"id":"c1","kind":"word_count","params":{"min":10,"max":20}}

  outputs (score codeswitch): plain text, one output per non-blank line; with --jsonl:
    {"prompt_id":"p1","output":"คำตอบภาษาไทย"}

  pairs (score compliance):
    {"response":"- a\n- b\n- c","constraints":[{"id":"c1","kind":"bullet_count","params":{"exact":3}}]}

  score table (report --table, one JSON document):
    {"title":"demo","benchmarks":["IF","MT"],"columns":[{"name":"base","scores":[75.47,57.94]}]}

  allowlist: plain text, one entry per line, '#' starts a comment.

  run config (--config, TOML):
    jobs = 8
    allowlist = "allow.txt"
    [autoif]
    seed_files = ["builtin:en", "builtin:th"]
    output = "out/autoif.jsonl"
    per_seed = 4
    k = 2
    [autoif.generator]
    mock_seed = 7
    [corpus]
    min_turns = 3
    max_turns = 25
    [packing]
    capacity = 8192

EXIT CODES
  0 success, 1 usage, 2 input, 3 generator, 4 invariant violation.
  On failure the last line on stderr is a JSON object: {"error":{"class":...,"code":...,"message":...}}"#;

#[derive(Debug, Parser)]
#[command(
    name = "thaicurate",
    version,
    about = "Thai instruction-data curation: script analysis, constraint verification, synthesis, corpus tools, packing and metrics",
    after_long_help = FORMATS
)]
pub struct Cli {
    /// Run configuration (TOML). Command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads for parallel stages [default: logical cores].
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, value_name = "LEVEL")]
    log_level: Option<log::LevelFilter>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Seed instruction files.
    #[command(subcommand)]
    Seeds(SeedsCmd),
    /// Instruction synthesis pipeline.
    #[command(subcommand)]
    Autoif(AutoifCmd),
    /// Chat corpus tools.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Pack samples into fixed-capacity sequences (first-fit decreasing).
    Pack(PackArgs),
    /// Gradient accumulation and token budget of a training run.
    Plan(PlanArgs),
    /// Evaluation metrics.
    #[command(subcommand)]
    Score(ScoreCmd),
    /// Benchmark tables with averages and deltas, plus attached score reports.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
enum SeedsCmd {
    /// Load and cross-validate seed files; exit 0 only if every seed is accepted.
    Validate {
        /// Seed files, or builtin:en / builtin:th.
        #[arg(required = true)]
        files: Vec<String>,
        #[arg(long)]
        threshold: Option<f64>,
    },
}

#[derive(Debug, Subcommand)]
enum AutoifCmd {
    /// Load, cross-validate, augment, generate, filter and write a shard plus report.
    Run(AutoifRunArgs),
}

#[derive(Debug, Args)]
struct AutoifRunArgs {
    /// Seed file (repeatable); replaces autoif.seed_files.
    #[arg(long = "seed-file", value_name = "FILE")]
    seed_files: Vec<String>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    per_seed: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Use the offline mock generator with this seed.
    #[arg(long)]
    mock_seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum CorpusCmd {
    /// Validate chat records and keep those within the turn bounds.
    Ingest {
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        min_turns: Option<usize>,
        #[arg(long)]
        max_turns: Option<usize>,
        /// Source tag for records that carry none.
        #[arg(long, default_value = corpus::DEFAULT_SOURCE)]
        source: String,
    },
    /// Concatenate shards, tag each with its source, and dedup the union.
    Merge {
        /// SOURCE=PATH, repeatable, in priority order.
        #[arg(long = "shard", value_name = "SOURCE=PATH")]
        shards: Vec<String>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        near: NearDupArgs,
    },
    /// Remove exact (and optionally near) duplicate samples.
    Dedup {
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        near: NearDupArgs,
    },
    /// Sample count, turn histogram, characters, Thai purity and per-source counts.
    Stats {
        inputs: Vec<PathBuf>,
        /// Write the statistics as JSON to this file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct NearDupArgs {
    /// Also drop near duplicates (MinHash over character shingles).
    #[arg(long)]
    near_dup: bool,
    #[arg(long, value_name = "JACCARD")]
    near_dup_threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct PackArgs {
    input: PathBuf,
    #[arg(long)]
    capacity: Option<usize>,
    /// whitespace or char.
    #[arg(long)]
    tokenizer: Option<String>,
    /// Tokens added per message for chat formatting.
    #[arg(long)]
    overhead: Option<usize>,
    /// Write the packing result as JSON to this file.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[arg(long)]
    global_batch: u64,
    #[arg(long)]
    micro_batch: u64,
    #[arg(long)]
    gpus: u64,
    #[arg(long)]
    steps: u64,
    /// Effective tokens per sample after packing.
    #[arg(long)]
    eff_tokens: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Subcommand)]
enum ScoreCmd {
    /// Percentage of outputs free of unexpected non-Thai script.
    Codeswitch {
        file: PathBuf,
        #[arg(long)]
        allowlist: Option<PathBuf>,
        /// Input is JSON records with prompt_id and output.
        #[arg(long)]
        jsonl: bool,
        /// Treat digits and punctuation as violations too.
        #[arg(long)]
        strict: bool,
        /// Write the report as JSON to this file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Share of responses that satisfy all their constraints.
    Compliance {
        file: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Human,
    Json,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Column to compute deltas against.
    #[arg(long)]
    baseline: Option<String>,
    /// Score table file (repeatable) [default: shipped tables].
    #[arg(long = "table", value_name = "FILE")]
    tables: Vec<PathBuf>,
    /// Report written by `score codeswitch --output`.
    #[arg(long)]
    codeswitch: Option<PathBuf>,
    /// Report written by `score compliance --output`.
    #[arg(long)]
    compliance: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "human")]
    format: FormatArg,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_turns: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_turns: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub near_dup: Option<NearDupConfig>,
    /// Shards for `corpus merge` when no `--shard` is given.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shards: Vec<ShardSetting>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShardSetting {
    pub source: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackingSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokenizer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message_overhead: Option<usize>,
}

/// Shared settings for every subcommand. Echoed into JSON outputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_level: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    /// Where outputs go when a subcommand gets no `--output`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowlist: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allow_digits_punct: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub autoif: Option<PipelineConfig>,
    #[serde(default)]
    pub corpus: CorpusSettings,
    #[serde(default)]
    pub packing: PackingSettings,
}

impl RunConfig {
    /// Parse and resolve relative paths against the file's directory, then
    /// check that every referenced input exists.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::input(format!("config {}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &Path| if p.is_relative() { dir.join(p) } else { p.to_path_buf() };
        cfg.output_dir = cfg.output_dir.as_deref().map(fix);
        cfg.allowlist = cfg.allowlist.as_deref().map(fix);
        for s in &mut cfg.corpus.shards {
            s.path = fix(&s.path);
        }
        if let Some(a) = &mut cfg.autoif {
            a.rebase(dir);
        }
        cfg.validate_paths()?;
        Ok(cfg)
    }

    fn validate_paths(&self) -> Result<(), CliError> {
        let inputs = self
            .allowlist
            .iter()
            .chain(self.corpus.shards.iter().map(|s| &s.path));
        for p in inputs {
            if !p.is_file() {
                return Err(CliError::input(format!("config references missing file {}", p.display())));
            }
        }
        Ok(())
    }

    fn policy(&self, allowlist: Option<&Path>, strict: bool) -> Result<PurityPolicy, CliError> {
        let mut policy = PurityPolicy {
            allow_digits_punct: self.allow_digits_punct.unwrap_or(true),
            ..PurityPolicy::default()
        };
        if strict {
            policy.allow_digits_punct = false;
        }
        if let Some(path) = allowlist.or(self.allowlist.as_deref()) {
            let list = Allowlist::load(path)
                .map_err(|e| CliError::input(format!("cannot read allowlist {}: {e}", path.display())))?;
            policy = policy.with_allowlist(list);
        }
        Ok(policy)
    }

    fn output_path(&self, flag: Option<PathBuf>, default_name: &str) -> Result<PathBuf, CliError> {
        flag.or_else(|| self.output_dir.as_ref().map(|d| d.join(default_name)))
            .ok_or_else(|| CliError::usage("--output is required (or set output_dir in --config)"))
    }

    fn near_dup(&self, args: &NearDupArgs) -> Result<DedupOptions, CliError> {
        let mut near = self.corpus.near_dup;
        if args.near_dup || args.near_dup_threshold.is_some() {
            near.get_or_insert_with(NearDupConfig::default);
        }
        if let (Some(cfg), Some(t)) = (near.as_mut(), args.near_dup_threshold) {
            if !(0.0..=1.0).contains(&t) {
                return Err(CliError::usage(format!("--near-dup-threshold must be in [0, 1], got {t}")));
            }
            cfg.threshold = t;
        }
        Ok(DedupOptions { near_dup: near })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Input,
    Generator,
    Invariant,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 1,
            ErrorClass::Input => 2,
            ErrorClass::Generator => 3,
            ErrorClass::Invariant => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::Usage => "usage",
            ErrorClass::Input => "input",
            ErrorClass::Generator => "generator",
            ErrorClass::Invariant => "invariant",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub class: ErrorClass,
    pub message: String,
}

impl CliError {
    pub fn usage(m: impl Into<String>) -> Self {
        CliError { class: ErrorClass::Usage, message: m.into() }
    }
    pub fn input(m: impl Into<String>) -> Self {
        CliError { class: ErrorClass::Input, message: m.into() }
    }
    pub fn invariant(m: impl Into<String>) -> Self {
        CliError { class: ErrorClass::Invariant, message: m.into() }
    }

    /// The final machine-readable stderr line.
    pub fn json_line(&self) -> String {
        json!({"error": {"class": self.class.as_str(), "code": self.class.exit_code(), "message": self.message}}).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.class.as_str(), self.message)
    }
}

impl From<autoif::PipelineError> for CliError {
    fn from(e: autoif::PipelineError) -> Self {
        let class = match &e.source {
            AutoifError::GeneratorUnavailable { .. } | AutoifError::Generator(_) => ErrorClass::Generator,
            AutoifError::UnknownSeedReference(_) | AutoifError::InvariantViolation(_) => ErrorClass::Invariant,
            _ if e.stage == Stage::Filter => ErrorClass::Invariant,
            _ => ErrorClass::Input,
        };
        CliError { class, message: e.to_string() }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::InvalidTurnBounds { .. } | CorpusError::NoShards => CliError::usage(e.to_string()),
            CorpusError::Read { .. } => CliError::input(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<PackingError> for CliError {
    fn from(e: PackingError) -> Self {
        match e {
            PackingError::Overflow => CliError::invariant(e.to_string()),
            _ => CliError::input(e.to_string()),
        }
    }
}

fn write_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::input(format!("cannot write {}: {e}", path.display()))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    String::from_utf8(read_bytes(path)?).map_err(|_| CliError::input(format!("{} is not valid UTF-8", path.display())))
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent().filter(|d| !d.as_os_str().is_empty()) {
        Some(dir) => std::fs::create_dir_all(dir).map_err(write_err(dir)),
        None => Ok(()),
    }
}

struct Ctx {
    config: RunConfig,
    jobs: Option<usize>,
}

impl Ctx {
    fn provenance(&self) -> serde_json::Value {
        json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.config,
        })
    }

    fn write_json<T: Serialize>(&self, path: &Path, body: &T) -> Result<(), CliError> {
        ensure_parent(path)?;
        let mut text = serde_json::to_string_pretty(body).expect("serializable output");
        text.push('\n');
        crate::jsonl::write_atomic(path, text.as_bytes()).map_err(write_err(path))
    }

    fn write_samples(&self, path: &Path, samples: &[corpus::ChatSample]) -> Result<(), CliError> {
        ensure_parent(path)?;
        corpus::write_corpus(path, samples).map_err(write_err(path))
    }
}

fn report_diagnostics(path: &Path, diagnostics: &[corpus::Diagnostic]) {
    for d in diagnostics {
        eprintln!("warning: {}: {d}", path.display());
    }
}

fn ingest_file(path: &Path, default_source: &str) -> Result<corpus::Ingested, CliError> {
    let data = read_bytes(path)?;
    let out = corpus::ingest_bytes(&data, default_source);
    report_diagnostics(path, &out.diagnostics);
    Ok(out)
}

fn seeds_validate(ctx: &Ctx, files: &[String], threshold: Option<f64>) -> Result<(), CliError> {
    let threshold = threshold
        .or(ctx.config.autoif.as_ref().map(|a| a.threshold))
        .unwrap_or(DEFAULT_CV_THRESHOLD);
    let mut seeds = Vec::new();
    for f in files {
        seeds.extend(autoif::load_seed_source(f).map_err(|e| CliError::input(e.to_string()))?);
    }
    let cv = autoif::cross_validate_seeds(&seeds, threshold).map_err(|e| CliError::usage(e.to_string()))?;
    println!("{:<10}{:<6}{:>12}  {:<9}detail", "seed", "lang", "constraints", "accepted");
    for (seed, d) in seeds.iter().zip(&cv.details) {
        let detail = d.reason.clone().unwrap_or_default();
        let verdict = if d.accepted { "yes" } else { "NO" };
        println!("{:<10}{:<6}{:>12}  {verdict:<9}{detail}", seed.id, seed.language, seed.constraints.len());
    }
    let counts = seeds.iter().fold([0usize; 2], |mut acc, s| {
        acc[usize::from(s.language == autoif::Language::Th)] += 1;
        acc
    });
    println!(
        "{} seeds ({} en, {} th): {} accepted, {} rejected at threshold {threshold}",
        seeds.len(),
        counts[0],
        counts[1],
        cv.accepted.len(),
        cv.verifier_cv_failures
    );
    if cv.verifier_cv_failures > 0 {
        return Err(CliError::input(format!("{} seed(s) failed cross-validation", cv.verifier_cv_failures)));
    }
    Ok(())
}

fn autoif_run(ctx: &Ctx, args: AutoifRunArgs) -> Result<(), CliError> {
    let mut cfg = match (&ctx.config.autoif, args.output.clone()) {
        (Some(c), _) => c.clone(),
        (None, Some(output)) if !args.seed_files.is_empty() => PipelineConfig {
            seed_files: vec![],
            output,
            report: None,
            per_seed: autoif::DEFAULT_PER_SEED,
            k: autoif::DEFAULT_K,
            threshold: DEFAULT_CV_THRESHOLD,
            jobs: None,
            generator: Default::default(),
        },
        _ => {
            return Err(CliError::usage(
                "autoif run needs an [autoif] section in --config, or --seed-file and --output",
            ))
        }
    };
    if !args.seed_files.is_empty() {
        cfg.seed_files = args.seed_files;
    }
    if let Some(o) = args.output {
        cfg.output = o;
    }
    cfg.report = args.report.or(cfg.report);
    cfg.per_seed = args.per_seed.unwrap_or(cfg.per_seed);
    cfg.k = args.k.unwrap_or(cfg.k);
    cfg.threshold = args.threshold.unwrap_or(cfg.threshold);
    cfg.jobs = ctx.jobs.or(cfg.jobs);
    if args.mock_seed.is_some() {
        cfg.generator.mock_seed = args.mock_seed;
    }

    let run = autoif::run_pipeline(&cfg)?;
    let r = &run.report;
    println!("seeds_loaded={}", r.seeds_loaded);
    println!("verifier_cv_failures={}", r.verifier_cv_failures);
    println!("instructions_generated={}", r.instructions_generated);
    println!("responses_generated={}", r.responses_generated);
    println!("pairs_validated={}", r.pairs_validated);
    println!("pairs_rejected={}", r.pairs_rejected);
    for (kind, n) in &r.rejection_by_constraint {
        println!("rejected[{kind}]={n}");
    }
    println!("shard={}", run.shard_path.display());
    println!("report={}", run.report_path.display());
    Ok(())
}

fn parse_shard(spec: &str) -> Result<Shard, CliError> {
    match spec.split_once('=') {
        Some((source, path)) if !source.is_empty() && !path.is_empty() => Ok(Shard::new(path, source)),
        _ => Err(CliError::usage(format!("--shard expects SOURCE=PATH, got `{spec}`"))),
    }
}

fn corpus_cmd(ctx: &Ctx, cmd: CorpusCmd) -> Result<(), CliError> {
    match cmd {
        CorpusCmd::Ingest { input, output, min_turns, max_turns, source } => {
            let output = ctx.config.output_path(output, "ingested.jsonl")?;
            let min = min_turns.or(ctx.config.corpus.min_turns).unwrap_or(1);
            let max = max_turns.or(ctx.config.corpus.max_turns).unwrap_or(usize::MAX);
            let ingested = ingest_file(&input, &source)?;
            let read = ingested.samples.len();
            let kept = corpus::filter_by_turns(ingested.samples, min, max)?;
            ctx.write_samples(&output, &kept)?;
            println!(
                "read={read} rejected={} out_of_turn_range={} written={} output={}",
                ingested.diagnostics.len(),
                read - kept.len(),
                kept.len(),
                output.display()
            );
        }
        CorpusCmd::Dedup { input, output, near } => {
            let output = ctx.config.output_path(output, "dedup.jsonl")?;
            let options = ctx.config.near_dup(&near)?;
            let ingested = ingest_file(&input, corpus::DEFAULT_SOURCE)?;
            let out = corpus::dedup(ingested.samples, &options);
            ctx.write_samples(&output, &out.samples)?;
            println!(
                "duplicates_removed={} near_duplicates_removed={} written={} output={}",
                out.duplicates_removed,
                out.near_duplicates_removed,
                out.samples.len(),
                output.display()
            );
        }
        CorpusCmd::Merge { shards, output, near } => {
            let output = ctx.config.output_path(output, "merged.jsonl")?;
            let shards: Vec<Shard> = if shards.is_empty() {
                ctx.config.corpus.shards.iter().map(|s| Shard::new(&s.path, &s.source)).collect()
            } else {
                shards.iter().map(|s| parse_shard(s)).collect::<Result<_, _>>()?
            };
            let merged = corpus::merge_streams(&shards, &ctx.config.near_dup(&near)?)?;
            for (path, d) in &merged.diagnostics {
                eprintln!("warning: {}: {d}", path.display());
            }
            ctx.write_samples(&output, &merged.samples)?;
            let stats = corpus::stats(&merged.samples, &PurityPolicy::default());
            println!(
                "samples={} duplicates_removed={} near_duplicates_removed={} output={}",
                merged.samples.len(),
                merged.duplicates_removed,
                merged.near_duplicates_removed,
                output.display()
            );
            for (source, n) in &stats.per_source_counts {
                println!("source[{source}]={n}");
            }
        }
        CorpusCmd::Stats { inputs, output } => {
            if inputs.is_empty() {
                return Err(CliError::usage("corpus stats needs at least one input file"));
            }
            let mut samples = Vec::new();
            for path in &inputs {
                samples.extend(ingest_file(path, corpus::DEFAULT_SOURCE)?.samples);
            }
            let stats = corpus::stats(&samples, &ctx.config.policy(None, false)?);
            print!("{}", stats.render_table());
            if let Some(path) = output {
                ctx.write_json(&path, &json!({"provenance": ctx.provenance(), "stats": stats}))?;
            }
        }
    }
    Ok(())
}

fn pack_cmd(ctx: &Ctx, args: PackArgs) -> Result<(), CliError> {
    let settings = &ctx.config.packing;
    let capacity = args.capacity.or(settings.capacity).unwrap_or(DEFAULT_CAPACITY);
    if capacity == 0 {
        return Err(CliError::usage("--capacity must be at least 1"));
    }
    let name = args.tokenizer.or(settings.tokenizer.clone()).unwrap_or_else(|| "whitespace".into());
    let tokenizer =
        packing::tokenizer_by_name(&name).ok_or_else(|| CliError::usage(format!("unknown tokenizer `{name}`")))?;
    let overhead = args.overhead.or(settings.message_overhead).unwrap_or(DEFAULT_MESSAGE_OVERHEAD);

    let samples = ingest_file(&args.input, corpus::DEFAULT_SOURCE)?.samples;
    let result = packing::pack(&samples, tokenizer.as_ref(), overhead, capacity);
    for id in &result.oversize {
        eprintln!("warning: sample {id} exceeds capacity {capacity} and was not packed");
    }
    let efficiency = packing::packing_efficiency(&result.sequences).ok();
    println!("samples={}", samples.len());
    println!("sequences={}", result.sequences.len());
    println!("oversize={}", result.oversize.len());
    println!("capacity={capacity} tokenizer={} overhead={overhead}", tokenizer.name());
    match efficiency {
        Some(e) => println!("efficiency={e:.4}"),
        None => println!("efficiency=n/a"),
    }
    if let Some(path) = args.output {
        ctx.write_json(
            &path,
            &json!({"provenance": ctx.provenance(), "efficiency": efficiency, "result": result}),
        )?;
    }
    Ok(())
}

fn plan_cmd(ctx: &Ctx, a: PlanArgs) -> Result<(), CliError> {
    let plan = packing::training_plan(a.global_batch, a.micro_batch, a.gpus, a.steps, a.eff_tokens)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&json!({"provenance": ctx.provenance(), "plan": plan})).unwrap());
    } else {
        print!("{}", plan.render_table());
        println!("grad_accum={}", plan.grad_accum);
        println!("total_tokens={} ({})", plan.total_tokens, packing::approx_tokens(plan.total_tokens));
    }
    Ok(())
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::input(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn score_cmd(ctx: &Ctx, cmd: ScoreCmd) -> Result<(), CliError> {
    match cmd {
        ScoreCmd::Codeswitch { file, allowlist, jsonl, strict, output } => {
            let policy = ctx.config.policy(allowlist.as_deref(), strict)?;
            let records: Vec<OutputRecord> = if jsonl {
                read_jsonl(&file)?
            } else {
                read_text(&file)?
                    .lines()
                    .enumerate()
                    .filter(|(_, l)| !l.trim().is_empty())
                    .map(|(i, l)| OutputRecord { prompt_id: (i + 1).to_string(), output: l.to_string() })
                    .collect()
            };
            let report = metrics::code_switching_score(&records, &policy)?;
            println!("{}", report.rounded());
            for o in report.outputs.iter().filter(|o| !o.pure) {
                let spans: Vec<String> = o
                    .violating_spans
                    .iter()
                    .map(|s| format!("{}@{}:{:?}", s.class, s.start, &o.output_text[s.range()]))
                    .collect();
                println!("impure [{}] {}", o.prompt_id, spans.join(" "));
            }
            println!("pure={} total={}", report.pure, report.total);
            if let Some(path) = output {
                let doc = Report { provenance: Some(ctx.provenance()), code_switching: Some(report), ..Default::default() };
                ctx.write_json(&path, &doc)?;
            }
        }
        ScoreCmd::Compliance { file, output } => {
            let pairs: Vec<CompliancePair> = read_jsonl(&file)?;
            let report = metrics::compliance_rate(&pairs)?;
            println!("compliance={:.4} ({}/{})", report.overall, report.compliant, report.total);
            for (kind, t) in &report.per_kind {
                println!("kind[{kind}]={:.4} ({}/{})", t.rate(), t.passed, t.total);
            }
            if let Some(path) = output {
                let doc = Report { provenance: Some(ctx.provenance()), compliance: Some(report), ..Default::default() };
                ctx.write_json(&path, &doc)?;
            }
        }
    }
    Ok(())
}

fn report_cmd(ctx: &Ctx, args: ReportArgs) -> Result<(), CliError> {
    let tables: Vec<ScoreTable> = if args.tables.is_empty() {
        metrics::builtin_tables()
    } else {
        args.tables
            .iter()
            .map(|p| {
                serde_json::from_str(&read_text(p)?).map_err(|e| CliError::input(format!("{}: {e}", p.display())))
            })
            .collect::<Result<_, _>>()?
    };
    let attached = |path: &Option<PathBuf>| -> Result<Option<Report>, CliError> {
        path.as_deref()
            .map(|p| Report::parse(&read_text(p)?).map_err(|e| CliError::input(format!("{}: {e}", p.display()))))
            .transpose()
    };
    let report = Report {
        provenance: Some(ctx.provenance()),
        baseline: args.baseline,
        tables,
        code_switching: attached(&args.codeswitch)?.and_then(|r| r.code_switching),
        compliance: attached(&args.compliance)?.and_then(|r| r.compliance),
    };
    let format = match args.format {
        FormatArg::Human => ReportFormat::Human,
        FormatArg::Json => ReportFormat::Structured,
    };
    let text = metrics::emit_report(&report, format)?;
    match args.output {
        Some(path) => {
            ensure_parent(&path)?;
            crate::jsonl::write_atomic(&path, text.as_bytes()).map_err(write_err(&path))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn init_logging(level: Option<log::LevelFilter>) {
    let mut builder = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"));
    if let Some(level) = level {
        builder.filter_level(level);
    }
    let _ = builder.try_init();
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let level = match (cli.log_level, &config.log_level) {
        (Some(l), _) => Some(l),
        (None, Some(s)) => Some(s.parse().map_err(|_| CliError::input(format!("config log_level `{s}` is invalid")))?),
        (None, None) => None,
    };
    init_logging(level);
    let jobs = cli.jobs.or(config.jobs);
    if let Some(n) = jobs {
        if n == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let ctx = Ctx { config, jobs };
    match cli.command {
        Command::Seeds(SeedsCmd::Validate { files, threshold }) => seeds_validate(&ctx, &files, threshold),
        Command::Autoif(AutoifCmd::Run(args)) => autoif_run(&ctx, args),
        Command::Corpus(cmd) => corpus_cmd(&ctx, cmd),
        Command::Pack(args) => pack_cmd(&ctx, args),
        Command::Plan(args) => plan_cmd(&ctx, args),
        Command::Score(cmd) => score_cmd(&ctx, cmd),
        Command::Report(args) => report_cmd(&ctx, args),
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let result = match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let rendered = e.render().to_string();
            eprint!("{rendered}");
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            Err(CliError::usage(first.trim_start_matches("error: ")))
        }
    };
    let _ = std::io::stdout().flush();
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            eprintln!("{}", e.json_line());
            e.class.exit_code()
        }
    }
}

impl From<ConstraintError> for CliError {
    fn from(e: ConstraintError) -> Self {
        CliError::input(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn run_config_parses_and_rebases() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("allow.txt"), "OpenAI\n").unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "allowlist = \"allow.txt\"\n[autoif]\nseed_files = [\"builtin:en\"]\noutput = \"o.jsonl\"\n[packing]\ncapacity = 16\n",
        )
        .unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.allowlist.unwrap(), dir.path().join("allow.txt"));
        assert_eq!(cfg.autoif.unwrap().output, dir.path().join("o.jsonl"));
        assert_eq!(cfg.packing.capacity, Some(16));
    }

    #[test]
    fn missing_referenced_path_is_input_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "allowlist = \"nope.txt\"\n").unwrap();
        assert_eq!(RunConfig::load(&path).unwrap_err().class, ErrorClass::Input);
    }

    #[test]
    fn error_line_is_json() {
        let line = CliError::input("bad \"file\"").json_line();
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["error"]["code"], 2);
        assert_eq!(v["error"]["class"], "input");
    }

    #[test]
    fn shard_spec() {
        let s = parse_shard("systemchat=a/b.jsonl").unwrap();
        assert_eq!((s.source.as_str(), s.path.as_path()), ("systemchat", Path::new("a/b.jsonl")));
        assert!(parse_shard("nopath").is_err());
        assert!(parse_shard("=x").is_err());
    }
}
