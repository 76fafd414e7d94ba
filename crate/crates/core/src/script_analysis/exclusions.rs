use regex::Regex;
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::io::{self, BufRead};
use std::path::Path;
use std::sync::OnceLock;

use super::classify::is_thai;

/// Why a span of text is ignored by the purity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionKind {
    Url,
    TechnicalIdentifier,
    AllowlistedName,
}

/// Byte range `[start, end)` of a text that the purity check skips.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExclusionSpan {
    pub start: usize,
    pub end: usize,
    pub kind: ExclusionKind,
}

impl ExclusionSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }
}

/// Caller-supplied names (products, people, places) that may appear in
/// otherwise-Thai text without counting as code-switching.
///
/// Entries are kept sorted and de-duplicated so that two allowlists built
/// from the same names compare equal regardless of input order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Allowlist {
    entries: Vec<String>,
}

impl Allowlist {
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut entries: Vec<String> = entries
            .into_iter()
            .map(Into::into)
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        entries.sort();
        entries.dedup();
        Allowlist { entries }
    }

    /// Parse the allowlist file format: one entry per line, `#` starts a
    /// comment line, blank lines are skipped.
    pub fn from_reader<R: BufRead>(reader: R) -> io::Result<Self> {
        let mut entries = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            entries.push(trimmed.to_string());
        }
        Ok(Allowlist::new(entries))
    }

    pub fn load(path: impl AsRef<Path>) -> io::Result<Self> {
        let file = std::fs::File::open(path)?;
        Allowlist::from_reader(io::BufReader::new(file))
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl From<Vec<String>> for Allowlist {
    fn from(v: Vec<String>) -> Self {
        Allowlist::new(v)
    }
}

impl From<Allowlist> for Vec<String> {
    fn from(a: Allowlist) -> Self {
        a.entries
    }
}

const URL_PREFIXES: [&str; 3] = ["http://", "https://", "www."];

fn token_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[A-Za-z0-9_]+(?:\.[A-Za-z0-9_]+)*").unwrap())
}

fn backtick_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"`[^`\n]+`").unwrap())
}

fn is_snake_case(token: &str) -> bool {
    token.contains('_') && token.bytes().any(|b| b.is_ascii_alphabetic())
}

fn is_camel_case(token: &str) -> bool {
    let b = token.as_bytes();
    b.first().is_some_and(u8::is_ascii_lowercase)
        && b.windows(2)
            .any(|w| w[0].is_ascii_lowercase() && w[1].is_ascii_uppercase())
}

fn is_dotted_path(token: &str) -> bool {
    let mut segments = token.split('.');
    let first = segments.next().unwrap_or("");
    let starts_ok = first
        .bytes()
        .next()
        .is_some_and(|b| b.is_ascii_alphabetic() || b == b'_');
    let mut rest = 0;
    for seg in segments {
        if seg.is_empty() {
            return false;
        }
        rest += 1;
    }
    starts_ok && rest >= 1
}

fn is_identifier_shape(token: &str) -> bool {
    !token.chars().any(is_thai)
        && (is_snake_case(token) || is_camel_case(token) || is_dotted_path(token))
}

fn url_candidates(text: &str, out: &mut Vec<ExclusionSpan>) {
    for prefix in URL_PREFIXES {
        for (start, _) in text.match_indices(prefix) {
            let end = text[start..]
                .char_indices()
                .find(|(_, c)| c.is_whitespace())
                .map(|(i, _)| start + i)
                .unwrap_or(text.len());
            out.push(ExclusionSpan {
                start,
                end,
                kind: ExclusionKind::Url,
            });
        }
    }
}

fn identifier_candidates(text: &str, out: &mut Vec<ExclusionSpan>) {
    for m in backtick_re().find_iter(text) {
        out.push(ExclusionSpan {
            start: m.start(),
            end: m.end(),
            kind: ExclusionKind::TechnicalIdentifier,
        });
    }
    for m in token_re().find_iter(text) {
        if is_identifier_shape(m.as_str()) {
            out.push(ExclusionSpan {
                start: m.start(),
                end: m.end(),
                kind: ExclusionKind::TechnicalIdentifier,
            });
        }
    }
}

fn allowlist_candidates(text: &str, allowlist: &Allowlist, out: &mut Vec<ExclusionSpan>) {
    for entry in allowlist.entries() {
        for (start, m) in text.match_indices(entry.as_str()) {
            out.push(ExclusionSpan {
                start,
                end: start + m.len(),
                kind: ExclusionKind::AllowlistedName,
            });
        }
    }
}

/// Find URL, technical-identifier and allowlisted-name spans in `text`.
///
/// Candidates from all three detectors are merged and resolved greedily:
/// earliest start first, then the longest span; a candidate overlapping an
/// already accepted span is dropped. The result is sorted and non-overlapping.
pub fn detect_exclusions(text: &str, allowlist: &Allowlist) -> Vec<ExclusionSpan> {
    if text.is_empty() {
        return Vec::new();
    }
    let mut candidates = Vec::new();
    url_candidates(text, &mut candidates);
    identifier_candidates(text, &mut candidates);
    allowlist_candidates(text, allowlist, &mut candidates);

    candidates.sort_by_key(|s| (s.start, Reverse(s.len()), s.kind));

    let mut accepted: Vec<ExclusionSpan> = Vec::new();
    let mut frontier = 0usize;
    for span in candidates {
        if span.is_empty() || span.start < frontier {
            continue;
        }
        frontier = span.end;
        accepted.push(span);
    }
    accepted
}
