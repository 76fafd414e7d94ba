//! Multi-turn chat corpora: ingestion, turn filtering, deduplication,
//! two-source merging and statistics.
//!
//! The on-disk format is one JSON record per line:
//!
//! ```text
//! {"messages":[{"role":"user","content":"..."},{"role":"assistant","content":"..."}],"source":"systemchat"}
//! ```

mod dedup;
mod ingest;
mod sample;
mod stats;

pub use dedup::{canonical_form, canonical_key, dedup, normalize_text, DedupOptions, DedupOutcome, NearDupConfig};
pub use ingest::{ingest, ingest_bytes, Diagnostic, Ingested, RejectReason, DEFAULT_SOURCE};
pub use sample::{ChatMessage, ChatRecord, ChatSample, RecordMessage, Role, SampleError};
pub use stats::{stats, CorpusStats};

use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid turn bounds: need 1 <= min ({min}) <= max ({max})")]
    InvalidTurnBounds { min: usize, max: usize },
    #[error("merge needs at least one shard")]
    NoShards,
}

/// Keep samples with `min <= turns <= max`, in order. Use `usize::MAX` as
/// an open upper bound.
pub fn filter_by_turns(samples: Vec<ChatSample>, min: usize, max: usize) -> Result<Vec<ChatSample>, CorpusError> {
    if min < 1 || min > max {
        return Err(CorpusError::InvalidTurnBounds { min, max });
    }
    Ok(samples
        .into_iter()
        .filter(|s| (min..=max).contains(&s.turns()))
        .collect())
}

#[derive(Debug, Clone)]
pub struct Shard {
    pub path: PathBuf,
    pub source: String,
}

impl Shard {
    pub fn new(path: impl Into<PathBuf>, source: impl Into<String>) -> Self {
        Shard {
            path: path.into(),
            source: source.into(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MergedCorpus {
    pub samples: Vec<ChatSample>,
    pub duplicates_removed: usize,
    pub near_duplicates_removed: usize,
    /// Rejected records, keyed by the shard they came from.
    pub diagnostics: Vec<(PathBuf, Diagnostic)>,
}

/// Concatenate shards in the given order, retag every sample with its
/// shard's source, and dedup across the union. Earlier shards win ties, so
/// per-source attribution after dedup follows shard order.
pub fn merge_streams(shards: &[Shard], options: &DedupOptions) -> Result<MergedCorpus, CorpusError> {
    if shards.is_empty() {
        return Err(CorpusError::NoShards);
    }
    let mut all = Vec::new();
    let mut diagnostics = Vec::new();
    for shard in shards {
        let ingested = ingest(&shard.path)?;
        all.extend(ingested.samples.into_iter().map(|s| s.with_source(shard.source.clone())));
        diagnostics.extend(ingested.diagnostics.into_iter().map(|d| (shard.path.clone(), d)));
    }
    let out = dedup(all, options);
    Ok(MergedCorpus {
        samples: out.samples,
        duplicates_removed: out.duplicates_removed,
        near_duplicates_removed: out.near_duplicates_removed,
        diagnostics,
    })
}

pub fn write_corpus(path: impl AsRef<Path>, samples: &[ChatSample]) -> std::io::Result<()> {
    crate::jsonl::write_jsonl(path, samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_with_turns(turns: usize) -> ChatSample {
        let mut msgs = Vec::new();
        for i in 0..turns {
            msgs.push(ChatMessage::user(format!("q{i}")));
            msgs.push(ChatMessage::assistant(format!("a{i}")));
        }
        ChatSample::new(msgs, "t").unwrap()
    }

    #[test]
    fn turn_bounds() {
        let kept = filter_by_turns(vec![sample_with_turns(3), sample_with_turns(26), sample_with_turns(25)], 3, 25).unwrap();
        let turns: Vec<usize> = kept.iter().map(ChatSample::turns).collect();
        assert_eq!(turns, [3, 25]);

        let all = vec![sample_with_turns(1), sample_with_turns(40)];
        assert_eq!(filter_by_turns(all.clone(), 1, usize::MAX).unwrap(), all);

        assert!(filter_by_turns(vec![], 0, 3).is_err());
        assert!(filter_by_turns(vec![], 4, 3).is_err());
    }

    fn write_shard(dir: &Path, name: &str, prefix: &str, n: usize) -> PathBuf {
        let samples: Vec<ChatSample> = (0..n)
            .map(|i| ChatSample::pair(format!("{prefix} {i}"), "answer", "raw").unwrap())
            .collect();
        let path = dir.join(name);
        write_corpus(&path, &samples).unwrap();
        path
    }

    #[test]
    fn merge_disjoint_and_overlapping() {
        let dir = tempfile::tempdir().unwrap();
        let a = write_shard(dir.path(), "a.jsonl", "alpha", 10);
        let b = write_shard(dir.path(), "b.jsonl", "beta", 10);
        let merged = merge_streams(&[Shard::new(&a, "a"), Shard::new(&b, "b")], &DedupOptions::default()).unwrap();
        assert_eq!(merged.samples.len(), 20);
        assert_eq!(merged.duplicates_removed, 0);

        let c = write_shard(dir.path(), "c.jsonl", "alpha", 4);
        let merged = merge_streams(&[Shard::new(&a, "a"), Shard::new(&c, "c")], &DedupOptions::default()).unwrap();
        assert_eq!(merged.samples.len(), 10);
        assert_eq!(merged.duplicates_removed, 4);
        assert!(merged.samples.iter().all(|s| s.source() == "a"));
    }

    #[test]
    fn merge_requires_shards_and_readable_files() {
        assert!(matches!(merge_streams(&[], &DedupOptions::default()), Err(CorpusError::NoShards)));
        let missing = merge_streams(&[Shard::new("/nonexistent/x.jsonl", "x")], &DedupOptions::default());
        assert!(matches!(missing, Err(CorpusError::Read { .. })));
    }
}
