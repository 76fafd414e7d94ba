use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use super::AutoifError;
use crate::constraints::{
    cross_validate_verifier, verify_all, Accuracy, ConstraintError, ConstraintRecord, ConstraintSpec,
    CrossValidationCase,
};
use crate::script_analysis::is_thai;

pub const BUILTIN_EN: &str = include_str!("../../data/seeds/en.jsonl");
pub const BUILTIN_TH: &str = include_str!("../../data/seeds/th.jsonl");

/// Seed sources of this form name a shipped seed set instead of a file.
pub const BUILTIN_PREFIX: &str = "builtin:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Th,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Th => "th",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A hand-written instruction bundling the constraints every response to
/// it must satisfy, plus labelled cases for checking those constraints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedInstruction {
    pub id: String,
    pub language: Language,
    pub text: String,
    pub constraints: Vec<ConstraintSpec>,
    #[serde(default)]
    pub cross_validation: Vec<CrossValidationCase>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSeed {
    id: String,
    language: Language,
    text: String,
    constraints: Vec<ConstraintRecord>,
    #[serde(default)]
    cross_validation: Vec<CrossValidationCase>,
}

#[derive(Debug, thiserror::Error)]
pub enum SeedError {
    #[error("cannot read seed file {origin}: {source}")]
    Io { origin: String, source: std::io::Error },
    #[error("{origin}:{line}: {message}")]
    Parse { origin: String, line: usize, message: String },
    #[error("{origin}:{line}: constraint `{constraint}`: {source}")]
    ConstraintSchemaViolation {
        origin: String,
        line: usize,
        constraint: String,
        source: ConstraintError,
    },
    #[error("{origin}:{line}: seed `{id}`: {message}")]
    InvalidSeed { origin: String, line: usize, id: String, message: String },
    #[error("duplicate seed id `{id}` at {origin}:{line}")]
    DuplicateId { origin: String, line: usize, id: String },
    #[error("unknown builtin seed set `{0}` (expected builtin:en or builtin:th)")]
    UnknownBuiltin(String),
}

fn check_invariants(seed: &SeedInstruction) -> Result<(), String> {
    if seed.id.trim().is_empty() {
        return Err("id must be non-empty".into());
    }
    if seed.text.trim().is_empty() {
        return Err("text must be non-empty".into());
    }
    if seed.constraints.is_empty() {
        return Err("needs at least one constraint".into());
    }
    if seed.language == Language::Th && !seed.text.chars().any(is_thai) {
        return Err("language is th but the text has no Thai characters".into());
    }
    let mut ids = BTreeSet::new();
    for c in &seed.constraints {
        if !ids.insert(c.id.as_str()) {
            return Err(format!("constraint id `{}` is used twice", c.id));
        }
    }
    for case in &seed.cross_validation {
        if let Some(target) = &case.constraint {
            if !ids.contains(target.as_str()) {
                return Err(format!("cross-validation case targets unknown constraint `{target}`"));
            }
        }
    }
    Ok(())
}

fn parse_line(line: &str, origin: &str, lineno: usize) -> Result<SeedInstruction, SeedError> {
    let raw: RawSeed = serde_json::from_str(line).map_err(|e| SeedError::Parse {
        origin: origin.to_string(),
        line: lineno,
        message: e.to_string(),
    })?;
    let constraints = raw
        .constraints
        .into_iter()
        .map(|record| {
            let constraint = record.id.clone();
            ConstraintSpec::try_from(record).map_err(|source| SeedError::ConstraintSchemaViolation {
                origin: origin.to_string(),
                line: lineno,
                constraint,
                source,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let seed = SeedInstruction {
        id: raw.id,
        language: raw.language,
        text: raw.text,
        constraints,
        cross_validation: raw.cross_validation,
    };
    check_invariants(&seed).map_err(|message| SeedError::InvalidSeed {
        origin: origin.to_string(),
        line: lineno,
        id: seed.id.clone(),
        message,
    })?;
    Ok(seed)
}

/// Parse line-delimited seed records. `origin` names the input in errors.
pub fn parse_seeds(text: &str, origin: &str) -> Result<Vec<SeedInstruction>, SeedError> {
    let mut seeds: Vec<SeedInstruction> = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let seed = parse_line(line, origin, i + 1)?;
        if !ids.insert(seed.id.clone()) {
            return Err(SeedError::DuplicateId {
                origin: origin.to_string(),
                line: i + 1,
                id: seed.id,
            });
        }
        seeds.push(seed);
    }
    if seeds.is_empty() {
        log::warn!("{origin}: no seed instructions found");
    }
    Ok(seeds)
}

pub fn load_seeds(path: impl AsRef<Path>) -> Result<Vec<SeedInstruction>, SeedError> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| SeedError::Io {
        origin: origin.clone(),
        source,
    })?;
    parse_seeds(&text, &origin)
}

pub fn builtin_seeds(language: Language) -> Vec<SeedInstruction> {
    let (text, origin) = match language {
        Language::En => (BUILTIN_EN, "builtin:en"),
        Language::Th => (BUILTIN_TH, "builtin:th"),
    };
    parse_seeds(text, origin).expect("shipped seed sets are valid")
}

/// Load a seed source: either `builtin:en`, `builtin:th` or a file path.
pub fn load_seed_source(source: &str) -> Result<Vec<SeedInstruction>, SeedError> {
    match source.strip_prefix(BUILTIN_PREFIX) {
        Some("en") => Ok(builtin_seeds(Language::En)),
        Some("th") => Ok(builtin_seeds(Language::Th)),
        Some(other) => Err(SeedError::UnknownBuiltin(other.to_string())),
        None => load_seeds(source),
    }
}

/// Accuracy of one verifier check during seed cross-validation. `target`
/// is a constraint id, or `*` for untargeted negative cases checked
/// against the whole constraint set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCheck {
    pub target: String,
    pub accuracy: Option<Accuracy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedValidation {
    pub seed_id: String,
    pub accepted: bool,
    pub checks: Vec<CvCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct CrossValidated {
    pub accepted: Vec<SeedInstruction>,
    pub verifier_cv_failures: usize,
    pub details: Vec<SeedValidation>,
}

/// Each constraint is scored on the cases targeting it plus every
/// untargeted positive case. Untargeted negative cases are scored against
/// the seed's full constraint set.
fn validate_seed(seed: &SeedInstruction, threshold: f64) -> SeedValidation {
    let mut checks = Vec::new();
    let mut reason = None;
    for spec in &seed.constraints {
        let cases: Vec<CrossValidationCase> = seed
            .cross_validation
            .iter()
            .filter(|c| match &c.constraint {
                Some(t) => *t == spec.id,
                None => c.expected_pass,
            })
            .cloned()
            .collect();
        let accuracy = cross_validate_verifier(spec, &cases).ok();
        match accuracy {
            None => {
                reason.get_or_insert_with(|| format!("constraint `{}` has no cross-validation cases", spec.id));
            }
            Some(a) if !a.meets(threshold) => {
                reason.get_or_insert_with(|| format!("constraint `{}` ({}) agreed on {a}", spec.id, spec.kind()));
            }
            Some(_) => {}
        }
        checks.push(CvCheck {
            target: spec.id.clone(),
            accuracy,
        });
    }
    let negatives: Vec<&CrossValidationCase> = seed
        .cross_validation
        .iter()
        .filter(|c| c.constraint.is_none() && !c.expected_pass)
        .collect();
    if !negatives.is_empty() {
        let agreed = negatives
            .iter()
            .filter(|c| !verify_all(&c.response, &seed.constraints).all_passed)
            .count();
        let a = Accuracy {
            agreed,
            total: negatives.len(),
        };
        if !a.meets(threshold) {
            reason.get_or_insert_with(|| format!("untargeted negative cases agreed on {a}"));
        }
        checks.push(CvCheck {
            target: "*".into(),
            accuracy: Some(a),
        });
    }
    SeedValidation {
        seed_id: seed.id.clone(),
        accepted: reason.is_none(),
        checks,
        reason,
    }
}

/// Keep seeds whose verifiers agree with their labelled cases on at least
/// `threshold` of them. `threshold` must lie in (0.5, 1].
pub fn cross_validate_seeds(seeds: &[SeedInstruction], threshold: f64) -> Result<CrossValidated, AutoifError> {
    if !(threshold > 0.5 && threshold <= 1.0) {
        return Err(AutoifError::InvalidThreshold(threshold));
    }
    let details: Vec<SeedValidation> = seeds.par_iter().map(|s| validate_seed(s, threshold)).collect();
    let accepted = seeds
        .iter()
        .zip(&details)
        .filter(|(_, d)| d.accepted)
        .map(|(s, _)| s.clone())
        .collect();
    let verifier_cv_failures = details.iter().filter(|d| !d.accepted).count();
    Ok(CrossValidated {
        accepted,
        verifier_cv_failures,
        details,
    })
}
