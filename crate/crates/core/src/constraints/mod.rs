//! Declarative response verifiers.
//!
//! A [`ConstraintSpec`] is a record `{id, kind, params}` whose `kind` names
//! one of the fixed verifier kinds in [`registered_kinds`]. Specs are
//! validated against the kind's parameter schema when they are parsed, so a
//! `ConstraintSpec` value is always executable and [`verify`] never fails.

mod registry;
mod verify;

pub use registry::{descriptor, registered_kinds, KindDescriptor, ParamSpec, ParamType};
pub use verify::{cross_validate_verifier, verify, verify_all};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use crate::script_analysis::{Allowlist, PurityPolicy};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConstraintError {
    #[error("unknown constraint kind `{0}`")]
    UnknownKind(String),
    #[error("parameter `{field}`: {reason}")]
    ParamSchemaViolation { field: String, reason: String },
    #[error("malformed constraint record: {0}")]
    Malformed(String),
    #[error("cross-validation needs at least one case")]
    EmptyCaseSet,
}

impl ConstraintError {
    pub(crate) fn violation(field: &str, reason: impl Into<String>) -> Self {
        ConstraintError::ParamSchemaViolation {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

/// Inclusive count bounds; at least one side is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub min: Option<u64>,
    pub max: Option<u64>,
}

impl Bounds {
    pub fn new(min: Option<u64>, max: Option<u64>) -> Result<Self, ConstraintError> {
        match (min, max) {
            (None, None) => Err(ConstraintError::violation("min", "at least one of `min` or `max` is required")),
            (Some(lo), Some(hi)) if lo > hi => {
                Err(ConstraintError::violation("min", format!("min ({lo}) exceeds max ({hi})")))
            }
            _ => Ok(Bounds { min, max }),
        }
    }

    pub fn contains(&self, n: u64) -> bool {
        self.min.is_none_or(|lo| n >= lo) && self.max.is_none_or(|hi| n <= hi)
    }
}

impl fmt::Display for Bounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.min, self.max) {
            (Some(lo), Some(hi)) => write!(f, "[{lo}, {hi}]"),
            (Some(lo), None) => write!(f, "[{lo}, ∞)"),
            (None, Some(hi)) => write!(f, "[0, {hi}]"),
            (None, None) => write!(f, "[0, ∞)"),
        }
    }
}

pub const DEFAULT_TERMINATORS: [&str; 3] = [".", "!", "?"];

/// A validated verifier with typed parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Constraint {
    WordCount(Bounds),
    CharCount(Bounds),
    KeywordInclude(Vec<String>),
    KeywordExclude(Vec<String>),
    StartsWith(String),
    EndsWith(String),
    LineCount(Bounds),
    BulletCount(u64),
    SentenceCount { exact: u64, terminators: Vec<String> },
    JsonObject { required_keys: Vec<String> },
    NoCodeSwitching(PurityPolicy),
    ThaiOrthographyValid,
    ThaiOnly(PurityPolicy),
    ForbiddenChars(String),
    ParagraphCount(u64),
}

impl Constraint {
    pub fn kind(&self) -> &'static str {
        match self {
            Constraint::WordCount(_) => "word_count",
            Constraint::CharCount(_) => "char_count",
            Constraint::KeywordInclude(_) => "keyword_include",
            Constraint::KeywordExclude(_) => "keyword_exclude",
            Constraint::StartsWith(_) => "starts_with",
            Constraint::EndsWith(_) => "ends_with",
            Constraint::LineCount(_) => "line_count",
            Constraint::BulletCount(_) => "bullet_count",
            Constraint::SentenceCount { .. } => "sentence_count",
            Constraint::JsonObject { .. } => "json_object",
            Constraint::NoCodeSwitching(_) => "no_code_switching",
            Constraint::ThaiOrthographyValid => "thai_orthography_valid",
            Constraint::ThaiOnly(_) => "thai_only",
            Constraint::ForbiddenChars(_) => "forbidden_chars",
            Constraint::ParagraphCount(_) => "paragraph_count",
        }
    }

    /// Build from a kind name and a params object, checking both the
    /// structural schema and the per-kind semantic rules.
    pub fn from_params(kind: &str, params: &Map<String, Value>) -> Result<Self, ConstraintError> {
        let desc = descriptor(kind).ok_or_else(|| ConstraintError::UnknownKind(kind.to_string()))?;
        desc.check_params(params)?;

        let uint = |k: &str| params.get(k).and_then(Value::as_u64);
        let string = |k: &str| params.get(k).and_then(Value::as_str).map(str::to_string);
        let list = |k: &str| -> Option<Vec<String>> {
            params.get(k).and_then(Value::as_array).map(|a| {
                a.iter().filter_map(Value::as_str).map(str::to_string).collect()
            })
        };
        let words = |k: &str| -> Result<Vec<String>, ConstraintError> {
            let words = list(k).unwrap_or_default();
            if words.is_empty() {
                return Err(ConstraintError::violation(k, "must list at least one word"));
            }
            if words.iter().any(String::is_empty) {
                return Err(ConstraintError::violation(k, "entries must be non-empty"));
            }
            Ok(words)
        };
        let non_empty = |k: &str| -> Result<String, ConstraintError> {
            match string(k) {
                Some(s) if !s.is_empty() => Ok(s),
                _ => Err(ConstraintError::violation(k, "must be a non-empty string")),
            }
        };
        let policy = || PurityPolicy {
            allow_digits_punct: params
                .get("allow_digits_punct")
                .and_then(Value::as_bool)
                .unwrap_or(true),
            allowlist: Allowlist::new(list("allowlist").unwrap_or_default()),
        };
        let bounds = || Bounds::new(uint("min"), uint("max"));

        Ok(match kind {
            "word_count" => Constraint::WordCount(bounds()?),
            "char_count" => Constraint::CharCount(bounds()?),
            "line_count" => Constraint::LineCount(bounds()?),
            "keyword_include" => Constraint::KeywordInclude(words("words")?),
            "keyword_exclude" => Constraint::KeywordExclude(words("words")?),
            "starts_with" => Constraint::StartsWith(non_empty("prefix")?),
            "ends_with" => Constraint::EndsWith(non_empty("suffix")?),
            "bullet_count" => Constraint::BulletCount(uint("exact").unwrap_or_default()),
            "sentence_count" => {
                let terminators = match list("terminators") {
                    None => DEFAULT_TERMINATORS.iter().map(|s| s.to_string()).collect(),
                    Some(t) if t.is_empty() || t.iter().any(String::is_empty) => {
                        return Err(ConstraintError::violation(
                            "terminators",
                            "must be a non-empty list of non-empty strings",
                        ))
                    }
                    Some(t) => t,
                };
                Constraint::SentenceCount {
                    exact: uint("exact").unwrap_or_default(),
                    terminators,
                }
            }
            "json_object" => Constraint::JsonObject {
                required_keys: list("required_keys").unwrap_or_default(),
            },
            "no_code_switching" => Constraint::NoCodeSwitching(policy()),
            "thai_orthography_valid" => Constraint::ThaiOrthographyValid,
            "thai_only" => Constraint::ThaiOnly(policy()),
            "forbidden_chars" => Constraint::ForbiddenChars(non_empty("set")?),
            "paragraph_count" => Constraint::ParagraphCount(uint("exact").unwrap_or_default()),
            other => unreachable!("kind `{other}` is registered but not constructible"),
        })
    }

    pub fn to_params(&self) -> Map<String, Value> {
        let mut m = Map::new();
        let strings = |v: &[String]| Value::from(v.to_vec());
        let bounds = |b: &Bounds, m: &mut Map<String, Value>| {
            if let Some(lo) = b.min {
                m.insert("min".into(), lo.into());
            }
            if let Some(hi) = b.max {
                m.insert("max".into(), hi.into());
            }
        };
        let policy = |p: &PurityPolicy, m: &mut Map<String, Value>| {
            m.insert("allow_digits_punct".into(), p.allow_digits_punct.into());
            if !p.allowlist.is_empty() {
                m.insert("allowlist".into(), strings(p.allowlist.entries()));
            }
        };
        match self {
            Constraint::WordCount(b) | Constraint::CharCount(b) | Constraint::LineCount(b) => bounds(b, &mut m),
            Constraint::KeywordInclude(w) | Constraint::KeywordExclude(w) => {
                m.insert("words".into(), strings(w));
            }
            Constraint::StartsWith(p) => {
                m.insert("prefix".into(), p.clone().into());
            }
            Constraint::EndsWith(s) => {
                m.insert("suffix".into(), s.clone().into());
            }
            Constraint::BulletCount(n) | Constraint::ParagraphCount(n) => {
                m.insert("exact".into(), (*n).into());
            }
            Constraint::SentenceCount { exact, terminators } => {
                m.insert("exact".into(), (*exact).into());
                m.insert("terminators".into(), strings(terminators));
            }
            Constraint::JsonObject { required_keys } => {
                m.insert("required_keys".into(), strings(required_keys));
            }
            Constraint::NoCodeSwitching(p) | Constraint::ThaiOnly(p) => policy(p, &mut m),
            Constraint::ThaiOrthographyValid => {}
            Constraint::ForbiddenChars(s) => {
                m.insert("set".into(), s.clone().into());
            }
        }
        m
    }
}

/// Wire form of a constraint: one line of the constraint file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRecord {
    pub id: String,
    pub kind: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ConstraintRecord", into = "ConstraintRecord")]
pub struct ConstraintSpec {
    pub id: String,
    pub constraint: Constraint,
}

impl ConstraintSpec {
    pub fn new(id: impl Into<String>, constraint: Constraint) -> Self {
        ConstraintSpec {
            id: id.into(),
            constraint,
        }
    }

    pub fn kind(&self) -> &'static str {
        self.constraint.kind()
    }
}

impl TryFrom<ConstraintRecord> for ConstraintSpec {
    type Error = ConstraintError;

    fn try_from(r: ConstraintRecord) -> Result<Self, Self::Error> {
        if r.id.trim().is_empty() {
            return Err(ConstraintError::Malformed("`id` must be non-empty".into()));
        }
        let constraint = Constraint::from_params(&r.kind, &r.params)?;
        Ok(ConstraintSpec { id: r.id, constraint })
    }
}

impl From<ConstraintSpec> for ConstraintRecord {
    fn from(s: ConstraintSpec) -> Self {
        ConstraintRecord {
            kind: s.kind().to_string(),
            params: s.constraint.to_params(),
            id: s.id,
        }
    }
}

/// Parse one record of the constraint file format.
pub fn parse_constraint_spec(doc: &str) -> Result<ConstraintSpec, ConstraintError> {
    let record: ConstraintRecord =
        serde_json::from_str(doc).map_err(|e| ConstraintError::Malformed(e.to_string()))?;
    ConstraintSpec::try_from(record)
}

#[derive(Debug, thiserror::Error)]
pub enum ConstraintFileError {
    #[error("reading constraint file: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Record { line: usize, source: ConstraintError },
}

/// Load a line-delimited constraint file. Blank lines are skipped.
pub fn load_constraints(path: impl AsRef<Path>) -> Result<Vec<ConstraintSpec>, ConstraintFileError> {
    let file = std::fs::File::open(path)?;
    let mut specs = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let spec = parse_constraint_spec(&line).map_err(|source| ConstraintFileError::Record { line: i + 1, source })?;
        specs.push(spec);
    }
    Ok(specs)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierOutcome {
    pub constraint_id: String,
    pub kind: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierReport {
    pub outcomes: Vec<VerifierOutcome>,
    pub all_passed: bool,
}

impl VerifierReport {
    pub fn failures(&self) -> impl Iterator<Item = &VerifierOutcome> {
        self.outcomes.iter().filter(|o| !o.passed)
    }
}

/// A labelled response used to check that a verifier behaves as intended
/// before it is trusted to filter data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossValidationCase {
    pub response: String,
    pub expected_pass: bool,
    /// Id of the single constraint this case targets. Untargeted cases are
    /// labelled against the whole constraint set of a seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<String>,
}

impl CrossValidationCase {
    pub fn new(response: impl Into<String>, expected_pass: bool) -> Self {
        CrossValidationCase {
            response: response.into(),
            expected_pass,
            constraint: None,
        }
    }

    pub fn targeting(mut self, constraint_id: impl Into<String>) -> Self {
        self.constraint = Some(constraint_id.into());
        self
    }
}

/// Agreement ratio between a verifier and labelled cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accuracy {
    pub agreed: usize,
    pub total: usize,
}

impl Accuracy {
    pub fn value(&self) -> f64 {
        self.agreed as f64 / self.total as f64
    }

    pub fn meets(&self, threshold: f64) -> bool {
        self.value() >= threshold
    }
}

impl fmt::Display for Accuracy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} ({:.3})", self.agreed, self.total, self.value())
    }
}

/// Default minimum cross-validation accuracy for trusting a verifier.
pub const DEFAULT_CV_THRESHOLD: f64 = 0.8;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_contains_required_kinds() {
        let names: Vec<_> = registered_kinds().iter().map(|d| d.name).collect();
        for kind in [
            "word_count",
            "char_count",
            "keyword_include",
            "keyword_exclude",
            "starts_with",
            "ends_with",
            "line_count",
            "bullet_count",
            "sentence_count",
            "json_object",
            "no_code_switching",
            "thai_orthography_valid",
            "thai_only",
            "forbidden_chars",
            "paragraph_count",
        ] {
            assert!(names.contains(&kind), "missing {kind}");
        }
    }

    #[test]
    fn every_example_validates_against_its_schema() {
        for d in registered_kinds() {
            let params = d.example_params();
            d.check_params(&params).unwrap();
            let c = Constraint::from_params(d.name, &params).unwrap();
            assert_eq!(c.kind(), d.name);
        }
    }

    #[test]
    fn parse_well_formed() {
        let spec = parse_constraint_spec(r#"{"id":"c1","kind":"word_count","params":{"min":10,"max":20}}"#).unwrap();
        assert_eq!(spec.id, "c1");
        assert_eq!(
            spec.constraint,
            Constraint::WordCount(Bounds { min: Some(10), max: Some(20) })
        );
    }

    #[test]
    fn parse_rejects_inverted_bounds() {
        let err = parse_constraint_spec(r#"{"id":"c2","kind":"word_count","params":{"min":20,"max":10}}"#).unwrap_err();
        assert!(matches!(err, ConstraintError::ParamSchemaViolation { ref field, .. } if field == "min"));
    }

    #[test]
    fn parse_rejects_unknown_kind() {
        let err = parse_constraint_spec(r#"{"id":"c3","kind":"no_such","params":{}}"#).unwrap_err();
        assert_eq!(err, ConstraintError::UnknownKind("no_such".into()));
    }

    #[test]
    fn parse_names_offending_field() {
        let cases = [
            (r#"{"id":"a","kind":"word_count","params":{"min":-1}}"#, "min"),
            (r#"{"id":"a","kind":"word_count","params":{"mn":1}}"#, "mn"),
            (r#"{"id":"a","kind":"bullet_count","params":{}}"#, "exact"),
            (r#"{"id":"a","kind":"keyword_include","params":{"words":[]}}"#, "words"),
            (r#"{"id":"a","kind":"starts_with","params":{"prefix":""}}"#, "prefix"),
            (r#"{"id":"a","kind":"thai_only","params":{"allow_digits_punct":"yes"}}"#, "allow_digits_punct"),
        ];
        for (doc, expected) in cases {
            match parse_constraint_spec(doc) {
                Err(ConstraintError::ParamSchemaViolation { field, .. }) => assert_eq!(field, expected, "{doc}"),
                other => panic!("{doc}: {other:?}"),
            }
        }
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(matches!(parse_constraint_spec("not json"), Err(ConstraintError::Malformed(_))));
        assert!(matches!(
            parse_constraint_spec(r#"{"id":"","kind":"thai_only"}"#),
            Err(ConstraintError::Malformed(_))
        ));
    }

    #[test]
    fn record_round_trip() {
        for d in registered_kinds() {
            let spec = ConstraintSpec::new("x", Constraint::from_params(d.name, &d.example_params()).unwrap());
            let line = serde_json::to_string(&spec).unwrap();
            assert_eq!(parse_constraint_spec(&line).unwrap(), spec);
        }
    }
}
