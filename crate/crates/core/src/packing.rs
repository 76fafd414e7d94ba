//! Token accounting, first-fit-decreasing sequence packing and
//! batch/step/token training-plan arithmetic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write;

use crate::corpus::ChatSample;

/// Something that turns text into a token count.
///
/// Implementations must return 0 for the empty string and satisfy
/// `count(a + b) <= count(a) + count(b) + 1`.
pub trait Tokenizer: Send + Sync {
    fn name(&self) -> &str;
    fn count(&self, text: &str) -> usize;
}

/// Counts whitespace-separated chunks. Thai text therefore counts one token
/// per space-delimited phrase.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn name(&self) -> &str {
        "whitespace"
    }

    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

/// One token per Unicode scalar value.
#[derive(Debug, Clone, Copy, Default)]
pub struct CharTokenizer;

impl Tokenizer for CharTokenizer {
    fn name(&self) -> &str {
        "chars"
    }

    fn count(&self, text: &str) -> usize {
        text.chars().count()
    }
}

pub fn tokenizer_by_name(name: &str) -> Option<Box<dyn Tokenizer>> {
    match name {
        "whitespace" => Some(Box::new(WhitespaceTokenizer)),
        "chars" => Some(Box::new(CharTokenizer)),
        _ => None,
    }
}

/// Approximate chat-template control tokens added per message.
pub const DEFAULT_MESSAGE_OVERHEAD: usize = 4;

/// Max sequence length used for training.
pub const DEFAULT_CAPACITY: usize = 8192;

pub fn count_tokens(tokenizer: &dyn Tokenizer, sample: &ChatSample, per_message_overhead: usize) -> usize {
    sample
        .messages()
        .iter()
        .map(|m| tokenizer.count(&m.content) + per_message_overhead)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedSequence {
    /// Indices into the packed input, in placement order.
    pub sample_ids: Vec<usize>,
    pub total_tokens: usize,
    pub capacity: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackResult {
    pub sequences: Vec<PackedSequence>,
    /// Items larger than the capacity. They are reported, never truncated.
    pub oversize: Vec<usize>,
}

/// Max-segment tree over bin free space, used to find the leftmost bin
/// that still fits an item in O(log n).
struct FreeSpaceTree {
    leaves: usize,
    tree: Vec<usize>,
}

impl FreeSpaceTree {
    fn new() -> Self {
        FreeSpaceTree {
            leaves: 1,
            tree: vec![0; 2],
        }
    }

    fn grow(&mut self) {
        let leaves = self.leaves * 2;
        let old = std::mem::replace(self, FreeSpaceTree {
            leaves,
            tree: vec![0; leaves * 2],
        });
        for i in 0..old.leaves {
            self.set(i, old.tree[old.leaves + i]);
        }
    }

    fn set(&mut self, bin: usize, free: usize) {
        while bin >= self.leaves {
            self.grow();
        }
        let mut i = self.leaves + bin;
        self.tree[i] = free;
        while i > 1 {
            i /= 2;
            self.tree[i] = self.tree[2 * i].max(self.tree[2 * i + 1]);
        }
    }

    fn add(&mut self, bin: usize, delta_used: usize) {
        let free = self.tree[self.leaves + bin] - delta_used;
        self.set(bin, free);
    }

    fn first_fit(&self, need: usize, bins: usize) -> Option<usize> {
        if bins == 0 || self.tree[1] < need {
            return None;
        }
        let mut i = 1;
        while i < self.leaves {
            i = if self.tree[2 * i] >= need { 2 * i } else { 2 * i + 1 };
        }
        let bin = i - self.leaves;
        (bin < bins).then_some(bin)
    }
}

/// First-fit-decreasing over `(id, tokens)` items.
///
/// Items are sorted by token count, largest first (ties by input position),
/// then each goes into the leftmost open sequence with room for it.
pub fn pack_lengths(items: &[(usize, usize)], capacity: usize) -> PackResult {
    let mut order: Vec<&(usize, usize)> = items.iter().collect();
    order.sort_by_key(|item| std::cmp::Reverse(item.1));

    let mut result = PackResult::default();
    let mut tree = FreeSpaceTree::new();
    for &&(id, tokens) in &order {
        if tokens > capacity {
            result.oversize.push(id);
            continue;
        }
        let bins = result.sequences.len();
        match tree.first_fit(tokens, bins) {
            Some(bin) => {
                let seq = &mut result.sequences[bin];
                seq.sample_ids.push(id);
                seq.total_tokens += tokens;
                tree.add(bin, tokens);
            }
            None => {
                result.sequences.push(PackedSequence {
                    sample_ids: vec![id],
                    total_tokens: tokens,
                    capacity,
                });
                tree.set(bins, capacity - tokens);
            }
        }
    }
    result
}

/// Count every sample's tokens (in parallel) and pack them. Sample ids are
/// positions in `samples`.
pub fn pack(samples: &[ChatSample], tokenizer: &dyn Tokenizer, per_message_overhead: usize, capacity: usize) -> PackResult {
    let lengths: Vec<(usize, usize)> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| (i, count_tokens(tokenizer, s, per_message_overhead)))
        .collect();
    pack_lengths(&lengths, capacity)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PackingError {
    #[error("packing efficiency of an empty sequence list is undefined")]
    EmptyInput,
    #[error("all plan inputs must be >= 1 ({0} is 0)")]
    ZeroInput(&'static str),
    #[error(
        "global batch {global_batch} is not divisible by micro batch {micro_batch} x gpus {gpu_count} = {}",
        micro_batch * gpu_count
    )]
    IndivisibleBatch { global_batch: u64, micro_batch: u64, gpu_count: u64 },
    #[error("token total overflows 64 bits")]
    Overflow,
}

/// Used tokens over offered capacity.
pub fn packing_efficiency(sequences: &[PackedSequence]) -> Result<f64, PackingError> {
    if sequences.is_empty() {
        return Err(PackingError::EmptyInput);
    }
    let used: usize = sequences.iter().map(|s| s.total_tokens).sum();
    let offered: usize = sequences.iter().map(|s| s.capacity).sum();
    Ok(used as f64 / offered as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPlan {
    pub global_batch: u64,
    pub micro_batch: u64,
    pub gpu_count: u64,
    pub grad_accum: u64,
    pub steps: u64,
    pub eff_tokens_per_sample: u64,
    pub total_tokens: u64,
}

pub fn training_plan(
    global_batch: u64,
    micro_batch: u64,
    gpu_count: u64,
    steps: u64,
    eff_tokens_per_sample: u64,
) -> Result<TrainingPlan, PackingError> {
    for (name, v) in [
        ("global_batch", global_batch),
        ("micro_batch", micro_batch),
        ("gpu_count", gpu_count),
        ("steps", steps),
        ("eff_tokens_per_sample", eff_tokens_per_sample),
    ] {
        if v == 0 {
            return Err(PackingError::ZeroInput(name));
        }
    }
    let per_pass = micro_batch.checked_mul(gpu_count).ok_or(PackingError::Overflow)?;
    if !global_batch.is_multiple_of(per_pass) {
        return Err(PackingError::IndivisibleBatch {
            global_batch,
            micro_batch,
            gpu_count,
        });
    }
    let total_tokens = global_batch
        .checked_mul(steps)
        .and_then(|x| x.checked_mul(eff_tokens_per_sample))
        .ok_or(PackingError::Overflow)?;
    Ok(TrainingPlan {
        global_batch,
        micro_batch,
        gpu_count,
        grad_accum: global_batch / per_pass,
        steps,
        eff_tokens_per_sample,
        total_tokens,
    })
}

fn group_thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Short human form: 2,097,152,000 -> "~2.1B".
pub fn approx_tokens(n: u64) -> String {
    const UNITS: [(f64, &str); 3] = [(1e12, "T"), (1e9, "B"), (1e6, "M")];
    for (scale, suffix) in UNITS {
        if n as f64 >= scale {
            return format!("~{:.1}{suffix}", n as f64 / scale);
        }
    }
    group_thousands(n)
}

impl TrainingPlan {
    /// Two-column parameter table.
    pub fn render_table(&self) -> String {
        let rows = [
            ("Global Batch Size", group_thousands(self.global_batch)),
            ("Micro-Batch Size (per GPU)", group_thousands(self.micro_batch)),
            ("GPUs", group_thousands(self.gpu_count)),
            ("Gradient Accumulation", group_thousands(self.grad_accum)),
            ("Training Steps", group_thousands(self.steps)),
            ("Effective Tokens per Sample", group_thousands(self.eff_tokens_per_sample)),
            (
                "Total Tokens",
                format!("{} ({})", group_thousands(self.total_tokens), approx_tokens(self.total_tokens)),
            ),
        ];
        let mut out = String::new();
        let _ = writeln!(out, "{:<30}{:>30}", "Parameter", "Value");
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<30}{v:>30}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ChatMessage;

    #[test]
    fn token_counts() {
        let ten = "w ".repeat(10);
        let s = ChatSample::new(vec![ChatMessage::user(&ten), ChatMessage::assistant(&ten)], "t").unwrap();
        assert_eq!(count_tokens(&WhitespaceTokenizer, &s, 4), 28);
        assert_eq!(count_tokens(&WhitespaceTokenizer, &s, 4), count_tokens(&WhitespaceTokenizer, &s, 4));
        assert_eq!(WhitespaceTokenizer.count("a b c") + DEFAULT_MESSAGE_OVERHEAD, 7);
        assert_eq!(WhitespaceTokenizer.count(""), 0);
        assert_eq!(CharTokenizer.count(""), 0);
        assert_eq!(CharTokenizer.count("กขค"), 3);
    }

    #[test]
    fn ffd_small_case() {
        let r = pack_lengths(&[(0, 5000), (1, 4000), (2, 3000)], 8192);
        let groups: Vec<Vec<usize>> = r.sequences.iter().map(|s| s.sample_ids.clone()).collect();
        assert_eq!(groups, vec![vec![0, 2], vec![1]]);
        assert_eq!(r.sequences[0].total_tokens, 8000);
        let eff = packing_efficiency(&r.sequences).unwrap();
        assert_eq!(eff, 12000.0 / 16384.0);
        assert!((eff - 0.7324).abs() < 5e-5);
    }

    #[test]
    fn oversize_reported_not_truncated() {
        let r = pack_lengths(&[(7, 9000)], 8192);
        assert!(r.sequences.is_empty());
        assert_eq!(r.oversize, [7]);
    }

    #[test]
    fn empty_input() {
        assert_eq!(pack_lengths(&[], 8192), PackResult::default());
        assert_eq!(packing_efficiency(&[]), Err(PackingError::EmptyInput));
    }

    #[test]
    fn full_sequence_efficiency() {
        let r = pack_lengths(&[(0, 8192)], 8192);
        assert_eq!(packing_efficiency(&r.sequences).unwrap(), 1.0);
    }

    #[test]
    fn many_bins_use_leftmost_fit() {
        // 6 items of 6 fill six bins of 10; then 4s fill them left to right
        let mut items: Vec<(usize, usize)> = (0..6).map(|i| (i, 6)).collect();
        items.extend((6..12).map(|i| (i, 4)));
        items.push((12, 3));
        let r = pack_lengths(&items, 10);
        assert_eq!(r.sequences.len(), 7);
        for (i, seq) in r.sequences.iter().take(6).enumerate() {
            assert_eq!(seq.sample_ids, vec![i, i + 6]);
        }
        assert_eq!(r.sequences[6].sample_ids, vec![12]);
    }

    #[test]
    fn plan_examples() {
        let p = training_plan(512, 2, 64, 4096, 1000).unwrap();
        assert_eq!(p.grad_accum, 4);
        assert_eq!(p.total_tokens, 2_097_152_000);
        let unit = training_plan(512, 2, 64, 1, 1).unwrap();
        assert_eq!((unit.grad_accum, unit.total_tokens), (4, 512));
        assert_eq!(
            training_plan(500, 3, 64, 1, 1),
            Err(PackingError::IndivisibleBatch { global_batch: 500, micro_batch: 3, gpu_count: 64 })
        );
        assert_eq!(training_plan(0, 1, 1, 1, 1), Err(PackingError::ZeroInput("global_batch")));
        assert_eq!(training_plan(u64::MAX, 1, 1, 2, 1), Err(PackingError::Overflow));
    }

    #[test]
    fn plan_table_mentions_totals() {
        let t = training_plan(512, 2, 64, 4096, 1000).unwrap().render_table();
        assert!(t.contains("Gradient Accumulation"));
        assert!(t.contains("2,097,152,000 (~2.1B)"), "{t}");
    }
}
