//! Script classification, code-switching exclusions and Thai orthography.
//!
//! Everything here is a pure function of its inputs.

mod classify;
mod exclusions;
mod orthography;
mod profile;

pub use classify::{classify_codepoint, is_thai, ScriptClass};
pub use exclusions::{detect_exclusions, Allowlist, ExclusionKind, ExclusionSpan};
pub use orthography::{validate_thai_orthography, OrthographyRule, OrthographyViolation};
pub use profile::{
    is_thai_pure, purity_violations, purity_violations_with, script_profile, PurityPolicy,
    ScriptProfile, ViolatingSpan,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScriptError {
    #[error("malformed exclusions: {0}")]
    MalformedExclusions(String),
}
