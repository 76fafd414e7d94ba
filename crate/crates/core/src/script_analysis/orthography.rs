//! Thai cluster validation.
//!
//! A cluster is a base consonant followed by the combining marks stacked on
//! it. The validator walks the text once and keeps only the state of the
//! current cluster, so it runs in linear time and never allocates per
//! character. Rules:
//!
//! * **R1** a leading vowel (เ แ โ ใ ไ) must be immediately followed by a
//!   consonant.
//! * **R2** above/below vowels, tone marks and above signs must attach to a
//!   consonant in the current cluster.
//! * **R3** a cluster holds at most one above vowel, one below vowel and one
//!   tone mark.
//! * **R4** a tone mark may not precede an above or below vowel in the same
//!   cluster.
//!
//! Characters outside the Thai block end the current cluster and are never
//! violations themselves.

use serde::{Deserialize, Serialize};
use std::fmt;

use super::classify::is_thai;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrthographyRule {
    DanglingLeadingVowel,
    OrphanCombiningMark,
    DuplicateAboveVowel,
    DuplicateBelowVowel,
    DuplicateToneMark,
    MarkOrderError,
}

impl fmt::Display for OrthographyRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OrthographyRule::DanglingLeadingVowel => "DanglingLeadingVowel",
            OrthographyRule::OrphanCombiningMark => "OrphanCombiningMark",
            OrthographyRule::DuplicateAboveVowel => "DuplicateAboveVowel",
            OrthographyRule::DuplicateBelowVowel => "DuplicateBelowVowel",
            OrthographyRule::DuplicateToneMark => "DuplicateToneMark",
            OrthographyRule::MarkOrderError => "MarkOrderError",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrthographyViolation {
    /// Character index (not byte offset) of the offending code point.
    pub offset: usize,
    pub rule: OrthographyRule,
    pub context: String,
}

impl fmt::Display for OrthographyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {} near {:?}", self.rule, self.offset, self.context)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ThaiCategory {
    Consonant,
    LeadingVowel,
    AboveVowel,
    BelowVowel,
    ToneMark,
    AboveSign,
    /// Following vowels, digits, punctuation and unassigned points of the block.
    Other,
}

pub(crate) fn thai_category(c: char) -> Option<ThaiCategory> {
    if !is_thai(c) {
        return None;
    }
    Some(match c {
        '\u{0E01}'..='\u{0E2E}' => ThaiCategory::Consonant,
        '\u{0E40}'..='\u{0E44}' => ThaiCategory::LeadingVowel,
        '\u{0E31}' | '\u{0E34}'..='\u{0E37}' | '\u{0E47}' => ThaiCategory::AboveVowel,
        '\u{0E38}'..='\u{0E3A}' => ThaiCategory::BelowVowel,
        '\u{0E48}'..='\u{0E4B}' => ThaiCategory::ToneMark,
        '\u{0E4C}'..='\u{0E4E}' => ThaiCategory::AboveSign,
        _ => ThaiCategory::Other,
    })
}

#[derive(Debug, Default, Clone, Copy)]
struct Cluster {
    above: bool,
    below: bool,
    tone: bool,
}

const CONTEXT_RADIUS: usize = 2;

fn context(chars: &[char], offset: usize) -> String {
    let lo = offset.saturating_sub(CONTEXT_RADIUS);
    let hi = (offset + CONTEXT_RADIUS + 1).min(chars.len());
    chars[lo..hi].iter().collect()
}

pub fn validate_thai_orthography(text: &str) -> Vec<OrthographyViolation> {
    let chars: Vec<char> = text.chars().collect();
    let mut found: Vec<(usize, OrthographyRule)> = Vec::new();
    let mut cluster: Option<Cluster> = None;
    let mut pending_leading: Option<usize> = None;

    for (i, &c) in chars.iter().enumerate() {
        let category = thai_category(c);
        if category != Some(ThaiCategory::Consonant) {
            if let Some(at) = pending_leading.take() {
                found.push((at, OrthographyRule::DanglingLeadingVowel));
            }
        }
        let Some(category) = category else {
            cluster = None;
            continue;
        };
        match category {
            ThaiCategory::Consonant => {
                pending_leading = None;
                cluster = Some(Cluster::default());
            }
            ThaiCategory::LeadingVowel => {
                pending_leading = Some(i);
                cluster = None;
            }
            ThaiCategory::Other => cluster = None,
            ThaiCategory::AboveVowel
            | ThaiCategory::BelowVowel
            | ThaiCategory::ToneMark
            | ThaiCategory::AboveSign => {
                let Some(cl) = cluster.as_mut() else {
                    found.push((i, OrthographyRule::OrphanCombiningMark));
                    continue;
                };
                let rule = match category {
                    ThaiCategory::AboveVowel if cl.above => Some(OrthographyRule::DuplicateAboveVowel),
                    ThaiCategory::BelowVowel if cl.below => Some(OrthographyRule::DuplicateBelowVowel),
                    ThaiCategory::AboveVowel | ThaiCategory::BelowVowel if cl.tone => {
                        Some(OrthographyRule::MarkOrderError)
                    }
                    ThaiCategory::ToneMark if cl.tone => Some(OrthographyRule::DuplicateToneMark),
                    _ => None,
                };
                match category {
                    ThaiCategory::AboveVowel => cl.above = true,
                    ThaiCategory::BelowVowel => cl.below = true,
                    ThaiCategory::ToneMark => cl.tone = true,
                    _ => {}
                }
                if let Some(rule) = rule {
                    found.push((i, rule));
                }
            }
        }
    }
    if let Some(at) = pending_leading {
        found.push((at, OrthographyRule::DanglingLeadingVowel));
    }

    // dangling vowels are reported after the fact, so restore offset order
    found.sort_by_key(|(offset, _)| *offset);
    found
        .into_iter()
        .map(|(offset, rule)| OrthographyViolation {
            offset,
            rule,
            context: context(&chars, offset),
        })
        .collect()
}
