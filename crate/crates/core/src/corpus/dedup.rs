use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{HashMap, HashSet};
use unicode_normalization::UnicodeNormalization;

use super::sample::ChatSample;

/// NFC-normalize and collapse every whitespace run to a single space.
pub fn normalize_text(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    nfc.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Canonical form used for exact duplicate detection: `role:content`
/// per message, normalized, separated by a unit separator. The source tag
/// is not part of the key.
pub fn canonical_form(sample: &ChatSample) -> String {
    let mut out = String::new();
    for (i, m) in sample.messages().iter().enumerate() {
        if i > 0 {
            out.push('\u{1F}');
        }
        out.push_str(m.role.as_str());
        out.push(':');
        out.push_str(&normalize_text(&m.content));
    }
    out
}

pub fn canonical_key(sample: &ChatSample) -> [u8; 32] {
    Sha256::digest(canonical_form(sample).as_bytes()).into()
}

/// Optional shingle-fingerprint pass for near duplicates.
///
/// Each sample's canonical form is cut into character shingles, summarized
/// by a MinHash signature and bucketed with banded LSH; candidates whose
/// estimated Jaccard similarity reaches `threshold` are dropped (first
/// occurrence wins).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NearDupConfig {
    pub threshold: f64,
    pub shingle_chars: usize,
    pub bands: usize,
    pub rows_per_band: usize,
}

impl Default for NearDupConfig {
    fn default() -> Self {
        NearDupConfig {
            threshold: 0.85,
            shingle_chars: 5,
            bands: 16,
            rows_per_band: 4,
        }
    }
}

impl NearDupConfig {
    fn num_hashes(&self) -> usize {
        self.bands * self.rows_per_band
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DedupOptions {
    /// Disabled unless set.
    pub near_dup: Option<NearDupConfig>,
}

#[derive(Debug, Clone, Default)]
pub struct DedupOutcome {
    pub samples: Vec<ChatSample>,
    pub duplicates_removed: usize,
    pub near_duplicates_removed: usize,
}

fn fnv1a(bytes: &[u8], seed: u64) -> u64 {
    let mut h = 0xcbf29ce484222325u64 ^ seed.wrapping_mul(0x9E3779B97F4A7C15);
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

fn minhash(text: &str, cfg: &NearDupConfig) -> Vec<u64> {
    let chars: Vec<char> = text.chars().collect();
    let k = cfg.shingle_chars.max(1);
    let mut shingles: HashSet<u64> = HashSet::new();
    if chars.len() <= k {
        shingles.insert(fnv1a(text.as_bytes(), 0));
    } else {
        let mut buf = String::new();
        for w in chars.windows(k) {
            buf.clear();
            buf.extend(w);
            shingles.insert(fnv1a(buf.as_bytes(), 0));
        }
    }
    (0..cfg.num_hashes() as u64)
        .map(|i| {
            let salt = splitmix(i + 1);
            shingles
                .iter()
                .map(|s| splitmix(s ^ salt))
                .min()
                .unwrap_or(u64::MAX)
        })
        .collect()
}

fn similarity(a: &[u64], b: &[u64]) -> f64 {
    let same = a.iter().zip(b).filter(|(x, y)| x == y).count();
    same as f64 / a.len() as f64
}

/// Exact dedup on the canonical form, then the optional near-dup pass.
/// Survivors keep their relative order.
pub fn dedup(samples: Vec<ChatSample>, options: &DedupOptions) -> DedupOutcome {
    let keys: Vec<[u8; 32]> = samples.par_iter().map(canonical_key).collect();
    let mut seen = HashSet::with_capacity(samples.len());
    let mut kept = Vec::with_capacity(samples.len());
    let mut duplicates_removed = 0;
    for (sample, key) in samples.into_iter().zip(keys) {
        if seen.insert(key) {
            kept.push(sample);
        } else {
            duplicates_removed += 1;
        }
    }

    let mut near_duplicates_removed = 0;
    if let Some(cfg) = options.near_dup {
        let signatures: Vec<Vec<u64>> = kept
            .par_iter()
            .map(|s| minhash(&canonical_form(s), &cfg))
            .collect();
        let mut buckets: HashMap<(usize, u64), Vec<usize>> = HashMap::new();
        let mut survivors = Vec::with_capacity(kept.len());
        for (idx, (sample, sig)) in kept.into_iter().zip(&signatures).enumerate() {
            let band_keys: Vec<(usize, u64)> = sig
                .chunks(cfg.rows_per_band)
                .enumerate()
                .map(|(band, rows)| {
                    let bytes: Vec<u8> = rows.iter().flat_map(|r| r.to_le_bytes()).collect();
                    (band, fnv1a(&bytes, band as u64))
                })
                .collect();
            let is_dup = band_keys.iter().any(|bk| {
                buckets
                    .get(bk)
                    .is_some_and(|prev| prev.iter().any(|&j| similarity(sig, &signatures[j]) >= cfg.threshold))
            });
            if is_dup {
                near_duplicates_removed += 1;
                continue;
            }
            for bk in band_keys {
                buckets.entry(bk).or_default().push(idx);
            }
            survivors.push(sample);
        }
        kept = survivors;
    }

    DedupOutcome {
        samples: kept,
        duplicates_removed,
        near_duplicates_removed,
    }
}
