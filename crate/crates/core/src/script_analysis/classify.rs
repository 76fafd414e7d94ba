use serde::{Deserialize, Serialize};
use std::fmt;

/// Coarse script bucket used by the purity check.
///
/// Every Unicode scalar value maps to exactly one bucket. The Thai block
/// (U+0E00..=U+0E7F) maps to [`ScriptClass::Thai`] in its entirety, including
/// the Thai digits, so Thai numerals never count as contamination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptClass {
    Thai,
    Latin,
    Digit,
    CommonPunct,
    Whitespace,
    OtherScript,
}

impl ScriptClass {
    pub const ALL: [ScriptClass; 6] = [
        ScriptClass::Thai,
        ScriptClass::Latin,
        ScriptClass::Digit,
        ScriptClass::CommonPunct,
        ScriptClass::Whitespace,
        ScriptClass::OtherScript,
    ];

    pub(crate) fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScriptClass::Thai => "thai",
            ScriptClass::Latin => "latin",
            ScriptClass::Digit => "digit",
            ScriptClass::CommonPunct => "common_punct",
            ScriptClass::Whitespace => "whitespace",
            ScriptClass::OtherScript => "other_script",
        }
    }
}

impl fmt::Display for ScriptClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const THAI_BLOCK_START: char = '\u{0E00}';
pub const THAI_BLOCK_END: char = '\u{0E7F}';

#[inline]
pub fn is_thai(c: char) -> bool {
    (THAI_BLOCK_START..=THAI_BLOCK_END).contains(&c)
}

#[inline]
fn is_latin_letter(c: char) -> bool {
    match c {
        'A'..='Z' | 'a'..='z' => true,
        // Latin-1 Supplement letters, minus the multiplication and division signs.
        '\u{00C0}'..='\u{00FF}' => c != '\u{00D7}' && c != '\u{00F7}',
        // Latin Extended-A, Latin Extended-B, IPA Extensions.
        '\u{0100}'..='\u{02AF}' => true,
        // Latin Extended Additional.
        '\u{1E00}'..='\u{1EFF}' => true,
        // Latin Extended-C/D/E and the fullwidth forms are left to OtherScript.
        _ => false,
    }
}

#[inline]
fn is_common_punct(c: char) -> bool {
    match c {
        _ if c.is_ascii_punctuation() => true,
        // Latin-1 punctuation and symbols (inverted marks, currency, guillemets, ...).
        '\u{00A1}'..='\u{00BF}' | '\u{00D7}' | '\u{00F7}' => true,
        // General Punctuation: dashes, curly quotes, ellipsis, bullets.
        '\u{2010}'..='\u{2027}' | '\u{2030}'..='\u{205E}' => true,
        // Currency symbols (includes the baht sign's neighbours).
        '\u{20A0}'..='\u{20CF}' => true,
        _ => false,
    }
}

/// Classify a single scalar value. Total and deterministic.
pub fn classify_codepoint(c: char) -> ScriptClass {
    if is_thai(c) {
        ScriptClass::Thai
    } else if c.is_ascii_digit() {
        ScriptClass::Digit
    } else if c.is_whitespace() {
        ScriptClass::Whitespace
    } else if is_latin_letter(c) {
        ScriptClass::Latin
    } else if is_common_punct(c) {
        ScriptClass::CommonPunct
    } else {
        ScriptClass::OtherScript
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn block_membership() {
        assert_eq!(classify_codepoint('\u{0E01}'), ScriptClass::Thai);
        assert_eq!(classify_codepoint('A'), ScriptClass::Latin);
        assert_eq!(classify_codepoint('\u{4E2D}'), ScriptClass::OtherScript);
    }

    #[test]
    fn thai_digits_are_thai() {
        for c in '\u{0E50}'..='\u{0E59}' {
            assert_eq!(classify_codepoint(c), ScriptClass::Thai);
        }
        assert_eq!(classify_codepoint('7'), ScriptClass::Digit);
    }

    #[test]
    fn latin_extended_and_punct() {
        assert_eq!(classify_codepoint('é'), ScriptClass::Latin);
        assert_eq!(classify_codepoint('Ž'), ScriptClass::Latin);
        assert_eq!(classify_codepoint('ệ'), ScriptClass::Latin);
        assert_eq!(classify_codepoint('×'), ScriptClass::CommonPunct);
        assert_eq!(classify_codepoint('“'), ScriptClass::CommonPunct);
        assert_eq!(classify_codepoint('…'), ScriptClass::CommonPunct);
        assert_eq!(classify_codepoint('-'), ScriptClass::CommonPunct);
        assert_eq!(classify_codepoint('\n'), ScriptClass::Whitespace);
        assert_eq!(classify_codepoint('\u{00A0}'), ScriptClass::Whitespace);
    }

    #[test]
    fn fullwidth_cjk_punct_is_other_script() {
        assert_eq!(classify_codepoint('，'), ScriptClass::OtherScript);
        assert_eq!(classify_codepoint('。'), ScriptClass::OtherScript);
        assert_eq!(classify_codepoint('Ａ'), ScriptClass::OtherScript);
    }

    #[test]
    fn hindi_and_cyrillic_are_other_script() {
        assert_eq!(classify_codepoint('ह'), ScriptClass::OtherScript);
        assert_eq!(classify_codepoint('ж'), ScriptClass::OtherScript);
    }

    proptest! {
        #[test]
        fn total_over_all_scalars(c in any::<char>()) {
            let class = classify_codepoint(c);
            prop_assert!(ScriptClass::ALL.contains(&class));
            prop_assert_eq!(class == ScriptClass::Thai, is_thai(c));
        }
    }
}
