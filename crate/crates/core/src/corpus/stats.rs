use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write;

use super::sample::ChatSample;
use crate::script_analysis::{is_thai_pure, PurityPolicy};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub sample_count: usize,
    pub turn_histogram: BTreeMap<usize, usize>,
    /// Characters over all message contents.
    pub total_chars: usize,
    /// Fraction of samples whose assistant messages are all Thai-pure.
    pub thai_purity_rate: f64,
    pub per_source_counts: BTreeMap<String, usize>,
}

#[derive(Default)]
struct Partial {
    turns: BTreeMap<usize, usize>,
    chars: usize,
    pure: usize,
    sources: BTreeMap<String, usize>,
}

impl Partial {
    fn merge(mut self, other: Partial) -> Partial {
        for (k, v) in other.turns {
            *self.turns.entry(k).or_default() += v;
        }
        for (k, v) in other.sources {
            *self.sources.entry(k).or_default() += v;
        }
        self.chars += other.chars;
        self.pure += other.pure;
        self
    }
}

pub fn stats(samples: &[ChatSample], policy: &PurityPolicy) -> CorpusStats {
    let partial = samples
        .par_iter()
        .map(|s| {
            let mut p = Partial::default();
            p.turns.insert(s.turns(), 1);
            p.sources.insert(s.source().to_string(), 1);
            p.chars = s.messages().iter().map(|m| m.content.chars().count()).sum();
            p.pure = usize::from(s.assistant_messages().all(|m| is_thai_pure(&m.content, policy)));
            p
        })
        .reduce(Partial::default, Partial::merge);

    let n = samples.len();
    CorpusStats {
        sample_count: n,
        turn_histogram: partial.turns,
        total_chars: partial.chars,
        thai_purity_rate: if n == 0 { 0.0 } else { partial.pure as f64 / n as f64 },
        per_source_counts: partial.sources,
    }
}

impl CorpusStats {
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<24}{:>12}", "samples", self.sample_count);
        let _ = writeln!(out, "{:<24}{:>12}", "characters", self.total_chars);
        let _ = writeln!(out, "{:<24}{:>12.4}", "thai purity rate", self.thai_purity_rate);
        let _ = writeln!(out, "\n{:<24}{:>12}", "source", "samples");
        for (source, n) in &self.per_source_counts {
            let _ = writeln!(out, "{source:<24}{n:>12}");
        }
        let _ = writeln!(out, "\n{:<24}{:>12}", "turns", "samples");
        for (turns, n) in &self.turn_histogram {
            let _ = writeln!(out, "{turns:<24}{n:>12}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ChatMessage;

    fn multi(turns: usize, answer: &str) -> ChatSample {
        let mut msgs = Vec::new();
        for _ in 0..turns {
            msgs.push(ChatMessage::user("ถาม"));
            msgs.push(ChatMessage::assistant(answer));
        }
        ChatSample::new(msgs, "s").unwrap()
    }

    #[test]
    fn histogram_of_turns() {
        let s = stats(&[multi(3, "ตอบ"), multi(5, "ตอบ")], &PurityPolicy::default());
        assert_eq!(s.turn_histogram, BTreeMap::from([(3, 1), (5, 1)]));
        assert_eq!(s.sample_count, 2);
        assert_eq!(s.per_source_counts, BTreeMap::from([("s".to_string(), 2)]));
    }

    #[test]
    fn purity_rate_counts_contaminated_samples() {
        let corpus = [multi(1, "ตอบ"), multi(2, "ตอบ"), multi(1, "ตอบ"), multi(1, "ตอบ mixed")];
        let s = stats(&corpus, &PurityPolicy::default());
        assert_eq!(s.thai_purity_rate, 0.75);
    }

    #[test]
    fn empty_corpus_is_zeros() {
        assert_eq!(stats(&[], &PurityPolicy::default()), CorpusStats::default());
    }

    #[test]
    fn counts_characters_of_all_messages() {
        let s = stats(&[ChatSample::pair("ab", "กขค", "x").unwrap()], &PurityPolicy::default());
        assert_eq!(s.total_chars, 5);
    }
}
