use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::ops::Range;

use super::classify::{classify_codepoint, ScriptClass};
use super::exclusions::{detect_exclusions, Allowlist, ExclusionSpan};
use super::ScriptError;

/// Character census of a text after exclusions are applied.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScriptProfile {
    counts: [usize; 6],
    pub excluded_chars: usize,
    pub total_chars: usize,
}

impl ScriptProfile {
    pub fn count(&self, class: ScriptClass) -> usize {
        self.counts[class.index()]
    }

    pub fn counted_chars(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Non-zero buckets only, in [`ScriptClass`] order.
    pub fn counts(&self) -> BTreeMap<ScriptClass, usize> {
        ScriptClass::ALL
            .iter()
            .filter(|c| self.count(**c) > 0)
            .map(|c| (*c, self.count(*c)))
            .collect()
    }
}

impl Serialize for ScriptProfile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            counts: BTreeMap<ScriptClass, usize>,
            excluded_chars: usize,
            total_chars: usize,
        }
        Repr {
            counts: self.counts(),
            excluded_chars: self.excluded_chars,
            total_chars: self.total_chars,
        }
        .serialize(s)
    }
}

fn check_exclusions(text: &str, exclusions: &[ExclusionSpan]) -> Result<Vec<ExclusionSpan>, ScriptError> {
    let mut sorted = exclusions.to_vec();
    sorted.sort_by_key(|s| (s.start, s.end));
    let mut frontier = 0usize;
    for span in &sorted {
        if span.start >= span.end {
            return Err(ScriptError::MalformedExclusions(format!(
                "empty or inverted span {}..{}",
                span.start, span.end
            )));
        }
        if span.end > text.len() {
            return Err(ScriptError::MalformedExclusions(format!(
                "span {}..{} exceeds text length {}",
                span.start,
                span.end,
                text.len()
            )));
        }
        if !text.is_char_boundary(span.start) || !text.is_char_boundary(span.end) {
            return Err(ScriptError::MalformedExclusions(format!(
                "span {}..{} is not on character boundaries",
                span.start, span.end
            )));
        }
        if span.start < frontier {
            return Err(ScriptError::MalformedExclusions(format!(
                "span {}..{} overlaps a previous span ending at {}",
                span.start, span.end, frontier
            )));
        }
        frontier = span.end;
    }
    Ok(sorted)
}

/// Walk `text` and call `f(byte_offset, char, excluded)` for each character.
fn walk(text: &str, sorted: &[ExclusionSpan], mut f: impl FnMut(usize, char, bool)) {
    let mut spans = sorted.iter().peekable();
    for (i, c) in text.char_indices() {
        while spans.peek().is_some_and(|s| s.end <= i) {
            spans.next();
        }
        let excluded = spans.peek().is_some_and(|s| s.start <= i && i < s.end);
        f(i, c, excluded);
    }
}

pub fn script_profile(text: &str, exclusions: &[ExclusionSpan]) -> Result<ScriptProfile, ScriptError> {
    let sorted = check_exclusions(text, exclusions)?;
    let mut profile = ScriptProfile::default();
    walk(text, &sorted, |_, c, excluded| {
        profile.total_chars += 1;
        if excluded {
            profile.excluded_chars += 1;
        } else {
            profile.counts[classify_codepoint(c).index()] += 1;
        }
    });
    Ok(profile)
}

/// What the purity check tolerates besides Thai and whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PurityPolicy {
    /// ASCII digits and common punctuation never fail purity when set.
    pub allow_digits_punct: bool,
    pub allowlist: Allowlist,
}

impl Default for PurityPolicy {
    fn default() -> Self {
        PurityPolicy {
            allow_digits_punct: true,
            allowlist: Allowlist::default(),
        }
    }
}

impl PurityPolicy {
    pub fn strict() -> Self {
        PurityPolicy {
            allow_digits_punct: false,
            allowlist: Allowlist::default(),
        }
    }

    pub fn with_allowlist(mut self, allowlist: Allowlist) -> Self {
        self.allowlist = allowlist;
        self
    }

    pub fn violates(&self, class: ScriptClass) -> bool {
        match class {
            ScriptClass::Thai | ScriptClass::Whitespace => false,
            ScriptClass::Digit | ScriptClass::CommonPunct => !self.allow_digits_punct,
            ScriptClass::Latin | ScriptClass::OtherScript => true,
        }
    }
}

/// A maximal run of same-class characters that fails the purity check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolatingSpan {
    pub start: usize,
    pub end: usize,
    pub class: ScriptClass,
}

impl ViolatingSpan {
    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }
}

/// Violating runs of `text` given an explicit exclusion set.
pub fn purity_violations_with(
    text: &str,
    exclusions: &[ExclusionSpan],
    allow_digits_punct: bool,
) -> Result<Vec<ViolatingSpan>, ScriptError> {
    let sorted = check_exclusions(text, exclusions)?;
    let policy = PurityPolicy {
        allow_digits_punct,
        allowlist: Allowlist::default(),
    };
    let mut out: Vec<ViolatingSpan> = Vec::new();
    walk(text, &sorted, |i, c, excluded| {
        if excluded {
            return;
        }
        let class = classify_codepoint(c);
        if !policy.violates(class) {
            return;
        }
        let end = i + c.len_utf8();
        match out.last_mut() {
            Some(last) if last.end == i && last.class == class => last.end = end,
            _ => out.push(ViolatingSpan { start: i, end, class }),
        }
    });
    Ok(out)
}

/// Violating runs of `text` after detecting exclusions under `policy`.
pub fn purity_violations(text: &str, policy: &PurityPolicy) -> Vec<ViolatingSpan> {
    let exclusions = detect_exclusions(text, &policy.allowlist);
    purity_violations_with(text, &exclusions, policy.allow_digits_punct)
        .expect("detected exclusions are always well-formed")
}

/// True iff no Latin or other-script characters remain once URLs,
/// identifiers and allowlisted names are skipped.
pub fn is_thai_pure(text: &str, policy: &PurityPolicy) -> bool {
    purity_violations(text, policy).is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::script_analysis::ExclusionKind;

    #[test]
    fn profile_all_thai() {
        let p = script_profile("กข", &[]).unwrap();
        assert_eq!(p.counts(), BTreeMap::from([(ScriptClass::Thai, 2)]));
        assert_eq!((p.excluded_chars, p.total_chars), (0, 2));
    }

    #[test]
    fn profile_empty() {
        assert_eq!(script_profile("", &[]).unwrap(), ScriptProfile::default());
    }

    #[test]
    fn profile_mixed_hand_count() {
        let p = script_profile("กข ab", &[]).unwrap();
        assert_eq!(
            p.counts(),
            BTreeMap::from([
                (ScriptClass::Thai, 2),
                (ScriptClass::Latin, 2),
                (ScriptClass::Whitespace, 1),
            ])
        );
        assert_eq!(p.total_chars, 5);
    }

    #[test]
    fn profile_counts_excluded_chars_once() {
        let text = "ดู https://a.co";
        let spans = detect_exclusions(text, &Allowlist::default());
        let p = script_profile(text, &spans).unwrap();
        assert_eq!(p.excluded_chars, "https://a.co".chars().count());
        assert_eq!(p.count(ScriptClass::Latin), 0);
        assert_eq!(p.counted_chars() + p.excluded_chars, p.total_chars);
    }

    #[test]
    fn malformed_exclusions_rejected() {
        let span = |start, end| ExclusionSpan { start, end, kind: ExclusionKind::Url };
        assert!(script_profile("abc", &[span(0, 9)]).is_err());
        assert!(script_profile("abc", &[span(0, 2), span(1, 3)]).is_err());
        assert!(script_profile("abc", &[span(2, 2)]).is_err());
        // byte 1 is inside the three-byte encoding of ก
        assert!(script_profile("กa", &[span(1, 3)]).is_err());
    }

    #[test]
    fn purity_examples() {
        let policy = PurityPolicy::default();
        assert!(is_thai_pure("สวัสดีครับ", &policy));
        assert!(!is_thai_pure("สวัสดี 你好", &policy));
        assert!(is_thai_pure("ไปที่ https://a.co ครับ", &policy));
        assert!(!is_thai_pure("สวัสดี hello", &policy));
        assert!(is_thai_pure("", &policy));
    }

    #[test]
    fn digits_and_punct_follow_policy() {
        let text = "ราคา 120 บาท!";
        assert!(is_thai_pure(text, &PurityPolicy::default()));
        assert!(!is_thai_pure(text, &PurityPolicy::strict()));
        assert!(is_thai_pure("ราคา ๑๒๐ บาท", &PurityPolicy::strict()));
    }

    #[test]
    fn allowlist_rescues_proper_nouns() {
        let text = "ฉันชอบใช้ ChatGPT มาก";
        assert!(!is_thai_pure(text, &PurityPolicy::default()));
        let policy = PurityPolicy::default().with_allowlist(Allowlist::new(["ChatGPT"]));
        assert!(is_thai_pure(text, &policy));
    }

    #[test]
    fn violating_spans_merge_runs() {
        let v = purity_violations("กhiข中文", &PurityPolicy::default());
        assert_eq!(
            v,
            vec![
                ViolatingSpan { start: 3, end: 5, class: ScriptClass::Latin },
                ViolatingSpan { start: 8, end: 14, class: ScriptClass::OtherScript },
            ]
        );
    }
}
