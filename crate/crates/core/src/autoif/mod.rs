//! Instruction-following data synthesis: seeds are cross-validated,
//! rewritten into many instructions, answered by a generator, and only
//! responses that pass every seed constraint reach the output shard.
//!
//! Seed file, one record per line:
//!
//! ```text
//! {"id":"en-01","language":"en","text":"List three fruits as bullet points.","constraints":[{"id":"c1","kind":"bullet_count","params":{"exact":3}}],"cross_validation":[{"response":"- a\n- b\n- c","expected_pass":true},{"response":"- a","expected_pass":false,"constraint":"c1"}]}
//! ```

mod seeds;
mod stages;

pub use seeds::{
    builtin_seeds, cross_validate_seeds, load_seed_source, load_seeds, parse_seeds, CrossValidated, CvCheck, Language,
    SeedError, SeedInstruction, SeedValidation, BUILTIN_EN, BUILTIN_PREFIX, BUILTIN_TH,
};
pub use stages::{
    augment_instructions, augmentation_request, filter_validated, generate_responses, response_request,
    AugmentOutcome, CandidatePair, GenerateOutcome, GenerationMeta, Instruction,
};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::constraints::DEFAULT_CV_THRESHOLD;
use crate::corpus::ChatSample;
use crate::llm_client::{Generator, GeneratorConfig, GeneratorError};

/// Source tag written on every sample of the output shard.
pub const SHARD_SOURCE: &str = "autoif";
pub const DEFAULT_PER_SEED: usize = 40;
pub const DEFAULT_K: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum AutoifError {
    #[error(transparent)]
    Seed(#[from] SeedError),
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cross-validation threshold must be in (0.5, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("generator unavailable: all {failed} request(s) failed; last error: {last_error}")]
    GeneratorUnavailable { failed: usize, last_error: String },
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error("pair references unknown or rejected seed `{0}`")]
    UnknownSeedReference(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("writing {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Load,
    CrossValidate,
    Augment,
    Generate,
    Filter,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::CrossValidate => "cross_validate",
            Stage::Augment => "augment",
            Stage::Generate => "generate",
            Stage::Filter => "filter",
            Stage::Write => "write",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("stage {stage}: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: AutoifError,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T, E: Into<AutoifError>> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError {
            stage,
            source: e.into(),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub seeds_loaded: usize,
    pub instructions_generated: usize,
    pub responses_generated: usize,
    pub pairs_validated: usize,
    pub pairs_rejected: usize,
    /// Failing outcomes per constraint kind; a pair failing two kinds
    /// counts once under each.
    pub rejection_by_constraint: BTreeMap<String, usize>,
    /// Seeds dropped because their verifiers disagreed with their cases.
    pub verifier_cv_failures: usize,
    pub duplicate_instructions: usize,
    pub augmentation_failures: usize,
    pub generation_failures: usize,
}

impl PipelineReport {
    pub fn check_conservation(&self) -> Result<(), AutoifError> {
        if self.pairs_validated + self.pairs_rejected == self.responses_generated {
            Ok(())
        } else {
            Err(AutoifError::InvariantViolation(format!(
                "validated ({}) + rejected ({}) != generated ({})",
                self.pairs_validated, self.pairs_rejected, self.responses_generated
            )))
        }
    }
}

fn default_per_seed() -> usize {
    DEFAULT_PER_SEED
}
fn default_k() -> usize {
    DEFAULT_K
}
fn default_threshold() -> f64 {
    DEFAULT_CV_THRESHOLD
}

/// Pipeline settings, usually read from a TOML document:
///
/// ```toml
/// seed_files = ["builtin:en", "seeds/th.jsonl"]
/// output = "out/autoif.jsonl"
/// per_seed = 4
/// k = 2
///
/// [generator]
/// mock_seed = 7
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed_files: Vec<String>,
    pub output: PathBuf,
    /// Defaults to the output path with a `.report.json` extension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default = "default_per_seed")]
    pub per_seed: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub generator: GeneratorConfig,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, AutoifError> {
        toml::from_str(text).map_err(|e| AutoifError::InvalidConfig(e.to_string()))
    }

    /// Read a config file. Relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, AutoifError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| {
            AutoifError::Seed(SeedError::Io {
                origin: path.display().to_string(),
                source,
            })
        })?;
        let mut config = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            config.rebase(dir);
        }
        Ok(config)
    }

    /// Resolve relative paths against `dir`.
    pub fn rebase(&mut self, dir: &Path) {
        let fix = |p: &Path| if p.is_relative() { dir.join(p) } else { p.to_path_buf() };
        for s in &mut self.seed_files {
            if !s.starts_with(BUILTIN_PREFIX) {
                *s = fix(Path::new(s)).display().to_string();
            }
        }
        self.output = fix(&self.output);
        self.report = self.report.as_deref().map(fix);
    }

    pub fn report_path(&self) -> PathBuf {
        self.report.clone().unwrap_or_else(|| self.output.with_extension("report.json"))
    }

    /// Check everything that can be checked before any stage runs.
    pub fn validate(&self) -> Result<(), AutoifError> {
        if self.seed_files.is_empty() {
            return Err(AutoifError::InvalidConfig("seed_files is empty".into()));
        }
        if self.per_seed == 0 || self.k == 0 {
            return Err(AutoifError::InvalidParameter("per_seed and k must be at least 1".into()));
        }
        if !(self.threshold > 0.5 && self.threshold <= 1.0) {
            return Err(AutoifError::InvalidThreshold(self.threshold));
        }
        if self.jobs == Some(0) {
            return Err(AutoifError::InvalidParameter("jobs must be at least 1".into()));
        }
        if self.report_path() == self.output {
            return Err(AutoifError::InvalidConfig("report and output paths coincide".into()));
        }
        for s in &self.seed_files {
            if !s.starts_with(BUILTIN_PREFIX) && !Path::new(s).is_file() {
                return Err(AutoifError::Seed(SeedError::Io {
                    origin: s.clone(),
                    source: std::io::Error::new(std::io::ErrorKind::NotFound, "seed file not found"),
                }));
            }
        }
        Ok(())
    }
}

/// The report document written next to the shard.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub config: PipelineConfig,
    pub report: PipelineReport,
    pub seed_validation: Vec<SeedValidation>,
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub shard_path: PathBuf,
    pub report_path: PathBuf,
    pub report: PipelineReport,
    pub seed_validation: Vec<SeedValidation>,
}

/// Run every stage with the generator described by `config.generator`
/// (environment variables fill an empty endpoint).
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineRun, PipelineError> {
    let mut config = config.clone();
    config.generator = config.generator.with_env_fallback();
    config.validate().at(Stage::Config)?;
    let generator = config.generator.build().at(Stage::Config)?;
    run_pipeline_with(&config, generator.as_ref())
}

fn remove_quietly(path: &Path) {
    if let Err(e) = std::fs::remove_file(path) {
        if e.kind() != std::io::ErrorKind::NotFound {
            log::warn!("could not remove partial output {}: {e}", path.display());
        }
    }
}

fn write_outputs(config: &PipelineConfig, samples: &[ChatSample], doc: &RunReport) -> Result<(), AutoifError> {
    let report_path = config.report_path();
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| AutoifError::Io { path, source }
    };
    for p in [&config.output, &report_path] {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io(dir))?;
        }
    }
    crate::jsonl::write_jsonl(&config.output, samples).map_err(io(&config.output))?;
    let mut text = serde_json::to_string_pretty(doc).expect("report serializes");
    text.push('\n');
    if let Err(e) = crate::jsonl::write_atomic(&report_path, text.as_bytes()) {
        remove_quietly(&config.output);
        return Err(io(&report_path)(e));
    }
    Ok(())
}

/// Run every stage against an explicit generator.
pub fn run_pipeline_with(config: &PipelineConfig, generator: &dyn Generator) -> Result<PipelineRun, PipelineError> {
    config.validate().at(Stage::Config)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = config.jobs {
        pool = pool.num_threads(jobs);
    }
    let pool = pool
        .build()
        .map_err(|e| AutoifError::InvalidConfig(e.to_string()))
        .at(Stage::Config)?;
    pool.install(|| run_stages(config, generator))
}

fn run_stages(config: &PipelineConfig, generator: &dyn Generator) -> Result<PipelineRun, PipelineError> {
    let mut seeds = Vec::new();
    for source in &config.seed_files {
        seeds.extend(load_seed_source(source).at(Stage::Load)?);
    }
    let mut ids = std::collections::BTreeSet::new();
    if let Some(dup) = seeds.iter().find(|s| !ids.insert(s.id.as_str())) {
        return Err(AutoifError::InvalidConfig(format!("seed id `{}` appears in more than one seed file", dup.id)))
            .at(Stage::Load);
    }
    log::info!("loaded {} seeds", seeds.len());

    let cv = cross_validate_seeds(&seeds, config.threshold).at(Stage::CrossValidate)?;
    log::info!("{} seeds accepted, {} rejected by cross-validation", cv.accepted.len(), cv.verifier_cv_failures);

    let augmented = augment_instructions(&cv.accepted, generator, config.per_seed).at(Stage::Augment)?;
    log::info!("{} instructions after augmentation", augmented.instructions.len());

    let generated = generate_responses(&augmented.instructions, generator, config.k).at(Stage::Generate)?;
    let (validated, filtered) = filter_validated(&generated.pairs, &cv.accepted).at(Stage::Filter)?;

    let report = PipelineReport {
        seeds_loaded: seeds.len(),
        instructions_generated: augmented.instructions.len(),
        verifier_cv_failures: cv.verifier_cv_failures,
        duplicate_instructions: augmented.duplicates_removed,
        augmentation_failures: augmented.failed_requests,
        generation_failures: generated.failed_requests,
        ..filtered
    };
    report.check_conservation().at(Stage::Filter)?;
    log::info!("{} of {} pairs validated", report.pairs_validated, report.responses_generated);

    let samples = validated
        .iter()
        .map(|p| ChatSample::pair(p.instruction.clone(), p.response.clone(), SHARD_SOURCE))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| AutoifError::InvariantViolation(format!("validated pair is not a valid sample: {e}")))
        .at(Stage::Write)?;

    let doc = RunReport {
        config: config.clone(),
        report,
        seed_validation: cv.details,
    };
    write_outputs(config, &samples, &doc).at(Stage::Write)?;
    Ok(PipelineRun {
        shard_path: config.output.clone(),
        report_path: config.report_path(),
        report: doc.report,
        seed_validation: doc.seed_validation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::verify_all;
    use crate::corpus::ingest;

    fn config(dir: &Path, seeds: &[&str], per_seed: usize, k: usize) -> PipelineConfig {
        PipelineConfig {
            seed_files: seeds.iter().map(|s| s.to_string()).collect(),
            output: dir.join("shard.jsonl"),
            report: None,
            per_seed,
            k,
            threshold: 0.8,
            jobs: Some(2),
            generator: GeneratorConfig::mock(7),
        }
    }

    fn two_seed_file(dir: &Path) -> String {
        let path = dir.join("seeds.jsonl");
        let lines: Vec<&str> = BUILTIN_TH.lines().take(2).collect();
        std::fs::write(&path, lines.join("\n")).unwrap();
        path.display().to_string()
    }

    #[test]
    fn tiny_run_is_consistent() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), &[&two_seed_file(dir.path())], 2, 2);
        let run = run_pipeline(&cfg).unwrap();
        let r = &run.report;
        assert_eq!(r.seeds_loaded, 2);
        assert!(r.responses_generated <= 8);
        assert_eq!(r.pairs_validated + r.pairs_rejected, r.responses_generated);

        let shard = ingest(&run.shard_path).unwrap();
        assert!(shard.diagnostics.is_empty());
        assert_eq!(shard.samples.len(), r.pairs_validated);
        assert!(shard.samples.iter().all(|s| s.source() == SHARD_SOURCE));
        let seeds = parse_seeds(BUILTIN_TH, "t").unwrap();
        for s in &shard.samples {
            let response = &s.messages()[1].content;
            assert!(seeds[..2].iter().any(|seed| verify_all(response, &seed.constraints).all_passed));
        }
    }

    #[test]
    fn reruns_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), &["builtin:en", "builtin:th"], 2, 2);
        run_pipeline(&cfg).unwrap();
        let shard = std::fs::read(&cfg.output).unwrap();
        let report = std::fs::read(cfg.report_path()).unwrap();
        let cfg1 = PipelineConfig { jobs: Some(1), ..cfg.clone() };
        run_pipeline(&cfg1).unwrap();
        assert_eq!(std::fs::read(&cfg.output).unwrap(), shard);
        let report_text = String::from_utf8(std::fs::read(cfg.report_path()).unwrap()).unwrap();
        let original = String::from_utf8(report).unwrap();
        assert_eq!(report_text.replace("\"jobs\": 1", "\"jobs\": 2"), original);
    }

    #[test]
    fn missing_seed_file_fails_config_stage() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), &["/nonexistent/seeds.jsonl"], 1, 1);
        let err = run_pipeline(&cfg).unwrap_err();
        assert_eq!(err.stage, Stage::Config);
        assert!(matches!(err.source, AutoifError::Seed(SeedError::Io { .. })));
        assert!(!cfg.output.exists());
    }

    #[test]
    fn unreachable_generator_is_unavailable() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(dir.path(), &[&two_seed_file(dir.path())], 1, 1);
        cfg.generator = GeneratorConfig {
            base_url: "http://127.0.0.1:9".into(),
            max_retries: 0,
            timeout_secs: 2.0,
            ..Default::default()
        };
        let err = run_pipeline(&cfg).unwrap_err();
        assert_eq!(err.stage, Stage::Augment);
        assert!(matches!(err.source, AutoifError::GeneratorUnavailable { .. }), "{err}");
        assert!(!cfg.output.exists() && !cfg.report_path().exists());
    }

    #[test]
    fn report_echoes_config_without_secrets() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(dir.path(), &[&two_seed_file(dir.path())], 1, 1);
        cfg.generator.api_key = crate::llm_client::Secret::new("sk-very-secret");
        let run = run_pipeline(&cfg).unwrap();
        let text = std::fs::read_to_string(run.report_path).unwrap();
        assert!(text.contains("\"per_seed\": 1"));
        assert!(!text.contains("sk-very-secret"));
    }

    #[test]
    fn config_from_toml_rebases_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "seed_files = [\"builtin:en\", \"s.jsonl\"]\noutput = \"out/a.jsonl\"\n[generator]\nmock_seed = 3\n").unwrap();
        let cfg = PipelineConfig::load(&path).unwrap();
        assert_eq!(cfg.seed_files[0], "builtin:en");
        assert_eq!(cfg.seed_files[1], dir.path().join("s.jsonl").display().to_string());
        assert_eq!(cfg.output, dir.path().join("out/a.jsonl"));
        assert_eq!(cfg.report_path(), dir.path().join("out/a.report.json"));
        assert_eq!(cfg.per_seed, DEFAULT_PER_SEED);
        assert!(PipelineConfig::from_toml("seed_files = []\noutput = \"x\"\nunknown = 1").is_err());
    }
}
