use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::path::Path;

use super::sample::{ChatMessage, ChatRecord, ChatSample, Role, SampleError};
use super::CorpusError;

/// Why a line of a chat-record file was not turned into a sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RejectReason {
    InvalidUtf8,
    MalformedRecord { message: String },
    UnknownRole { index: usize, role: String },
    Invalid { error: SampleError },
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::InvalidUtf8 => f.write_str("line is not valid UTF-8"),
            RejectReason::MalformedRecord { message } => write!(f, "malformed record: {message}"),
            RejectReason::UnknownRole { index, role } => write!(f, "message {index}: unknown role `{role}`"),
            RejectReason::Invalid { error } => write!(f, "{error}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    /// 1-based line number in the input.
    pub line: usize,
    pub reason: RejectReason,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub samples: Vec<ChatSample>,
    pub diagnostics: Vec<Diagnostic>,
}

fn parse_line(bytes: &[u8], default_source: &str) -> Result<ChatSample, RejectReason> {
    let text = std::str::from_utf8(bytes).map_err(|_| RejectReason::InvalidUtf8)?;
    let record: ChatRecord =
        serde_json::from_str(text).map_err(|e| RejectReason::MalformedRecord { message: e.to_string() })?;
    let mut messages = Vec::with_capacity(record.messages.len());
    for (index, m) in record.messages.into_iter().enumerate() {
        let role: Role = m
            .role
            .parse()
            .map_err(|_| RejectReason::UnknownRole { index, role: m.role.clone() })?;
        messages.push(ChatMessage::new(role, m.content));
    }
    let source = record.source.unwrap_or_else(|| default_source.to_string());
    ChatSample::new(messages, source).map_err(|error| RejectReason::Invalid { error })
}

/// Parse chat records from raw bytes. Lines are processed in parallel but
/// samples and diagnostics come back in input order. Blank lines are
/// skipped silently; nothing in the input can cause a panic.
pub fn ingest_bytes(data: &[u8], default_source: &str) -> Ingested {
    let lines: Vec<(usize, &[u8])> = data
        .split(|b| *b == b'\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix(b"\r").unwrap_or(l)))
        .filter(|(_, l)| !l.iter().all(u8::is_ascii_whitespace))
        .collect();
    let parsed: Vec<(usize, Result<ChatSample, RejectReason>)> = lines
        .par_iter()
        .map(|(line, bytes)| (*line, parse_line(bytes, default_source)))
        .collect();

    let mut out = Ingested::default();
    for (line, result) in parsed {
        match result {
            Ok(sample) => out.samples.push(sample),
            Err(reason) => out.diagnostics.push(Diagnostic { line, reason }),
        }
    }
    out
}

pub const DEFAULT_SOURCE: &str = "unknown";

/// Read a chat-record file. Only an unreadable file is an error; bad
/// records become diagnostics.
pub fn ingest(path: impl AsRef<Path>) -> Result<Ingested, CorpusError> {
    let path = path.as_ref();
    let data = std::fs::read(path).map_err(|source| CorpusError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(ingest_bytes(&data, DEFAULT_SOURCE))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_formed_three_turns() {
        let line = r#"{"messages":[{"role":"system","content":"s"},{"role":"user","content":"a"},{"role":"assistant","content":"b"},{"role":"user","content":"c"},{"role":"assistant","content":"d"},{"role":"user","content":"e"},{"role":"assistant","content":"f"}],"source":"sc"}"#;
        let out = ingest_bytes(line.as_bytes(), "x");
        assert_eq!(out.samples.len(), 1);
        assert_eq!(out.samples[0].turns(), 3);
        assert_eq!(out.samples[0].source(), "sc");
    }

    #[test]
    fn consecutive_users_rejected() {
        let line = r#"{"messages":[{"role":"user","content":"a"},{"role":"user","content":"b"},{"role":"assistant","content":"c"}]}"#;
        let out = ingest_bytes(line.as_bytes(), "x");
        assert!(out.samples.is_empty());
        assert_eq!(out.diagnostics.len(), 1);
        assert_eq!(out.diagnostics[0].line, 1);
        assert!(matches!(
            out.diagnostics[0].reason,
            RejectReason::Invalid { error: SampleError::AlternationViolation { index: 1, .. } }
        ));
    }

    #[test]
    fn empty_input() {
        let out = ingest_bytes(b"", "x");
        assert!(out.samples.is_empty() && out.diagnostics.is_empty());
        let out = ingest_bytes(b"\n\n  \r\n", "x");
        assert!(out.samples.is_empty() && out.diagnostics.is_empty());
    }

    #[test]
    fn mixed_lines_keep_line_numbers() {
        let ok = r#"{"messages":[{"role":"user","content":"a"},{"role":"assistant","content":"b"}]}"#;
        let mut bytes = format!("{ok}\nnot json\n\n{{\"messages\":[{{\"role\":\"bot\",\"content\":\"x\"}}]}}\n").into_bytes();
        bytes.extend_from_slice(&[0xFF, 0xFE, b'\n']);
        bytes.extend_from_slice(format!("{ok}\r\n").as_bytes());
        let out = ingest_bytes(&bytes, "dflt");
        assert_eq!(out.samples.len(), 2);
        assert_eq!(out.samples[0].source(), "dflt");
        let lines: Vec<usize> = out.diagnostics.iter().map(|d| d.line).collect();
        assert_eq!(lines, [2, 4, 5]);
        assert!(matches!(out.diagnostics[1].reason, RejectReason::UnknownRole { index: 0, .. }));
        assert_eq!(out.diagnostics[2].reason, RejectReason::InvalidUtf8);
    }
}
