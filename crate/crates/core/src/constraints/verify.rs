use serde_json::Value;

use super::{
    Accuracy, Bounds, Constraint, ConstraintError, ConstraintSpec, CrossValidationCase, VerifierOutcome,
    VerifierReport,
};
use crate::script_analysis::{is_thai, purity_violations, validate_thai_orthography, PurityPolicy};

const BULLET_MARKERS: [&str; 3] = ["* ", "- ", "• "];

pub(crate) fn word_count(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

pub(crate) fn char_count(text: &str) -> u64 {
    text.chars().count() as u64
}

/// Lines as `str::lines` sees them: a trailing newline does not start a new
/// line and the empty string has none.
pub(crate) fn line_count(text: &str) -> u64 {
    text.lines().count() as u64
}

fn bullet_count(text: &str) -> u64 {
    text.lines()
        .filter(|l| {
            let l = l.trim_start();
            BULLET_MARKERS.iter().any(|m| l.starts_with(m))
        })
        .count() as u64
}

fn sentence_count(text: &str, terminators: &[String]) -> u64 {
    let mut count = 0;
    let mut segment_has_content = false;
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if let Some(t) = terminators.iter().find(|t| rest.starts_with(t.as_str())) {
            if segment_has_content {
                count += 1;
            }
            segment_has_content = false;
            rest = &rest[t.len()..];
            continue;
        }
        if !c.is_whitespace() {
            segment_has_content = true;
        }
        rest = &rest[c.len_utf8()..];
    }
    if segment_has_content {
        count += 1;
    }
    count
}

fn paragraph_count(text: &str) -> u64 {
    let mut count = 0;
    let mut in_paragraph = false;
    for line in text.lines() {
        if line.trim().is_empty() {
            in_paragraph = false;
        } else if !in_paragraph {
            in_paragraph = true;
            count += 1;
        }
    }
    count
}

fn strip_code_fence(text: &str) -> &str {
    let t = text.trim();
    let Some(body) = t.strip_prefix("```") else {
        return t;
    };
    let Some(body) = body.strip_suffix("```") else {
        return t;
    };
    // drop the info string (```json) up to the first newline
    match body.find('\n') {
        Some(i) => body[i + 1..].trim(),
        None => body.trim(),
    }
}

fn check_bounds(what: &str, n: u64, bounds: &Bounds) -> (bool, String) {
    let passed = bounds.contains(n);
    let verdict = if passed { "within" } else { "outside" };
    (passed, format!("{what} {n} {verdict} {bounds}"))
}

fn check_exact(what: &str, n: u64, exact: u64) -> (bool, String) {
    if n == exact {
        (true, format!("{what} is {n} as required"))
    } else {
        (false, format!("{what} is {n}, expected {exact}"))
    }
}

fn check_purity(text: &str, policy: &PurityPolicy, require_thai: bool) -> (bool, String) {
    let violations = purity_violations(text, policy);
    if let Some(v) = violations.first() {
        return (
            false,
            format!(
                "{} violating span(s); first is {} text {:?} at byte {}",
                violations.len(),
                v.class,
                &text[v.range()],
                v.start
            ),
        );
    }
    if require_thai && !text.chars().any(is_thai) {
        return (false, "no Thai characters present".into());
    }
    (true, "no unexpected non-Thai characters".into())
}

fn evaluate(response: &str, constraint: &Constraint) -> (bool, String) {
    match constraint {
        Constraint::WordCount(b) => check_bounds("word count", word_count(response), b),
        Constraint::CharCount(b) => check_bounds("character count", char_count(response), b),
        Constraint::LineCount(b) => check_bounds("line count", line_count(response), b),
        Constraint::KeywordInclude(words) => {
            let missing: Vec<&str> = words
                .iter()
                .filter(|w| !response.contains(w.as_str()))
                .map(String::as_str)
                .collect();
            if missing.is_empty() {
                (true, "all required keywords present".into())
            } else {
                (false, format!("missing keywords: {}", missing.join(", ")))
            }
        }
        Constraint::KeywordExclude(words) => {
            let present: Vec<&str> = words
                .iter()
                .filter(|w| response.contains(w.as_str()))
                .map(String::as_str)
                .collect();
            if present.is_empty() {
                (true, "no forbidden keywords present".into())
            } else {
                (false, format!("forbidden keywords present: {}", present.join(", ")))
            }
        }
        Constraint::StartsWith(prefix) => {
            if response.trim_start().starts_with(prefix.as_str()) {
                (true, format!("starts with {prefix:?}"))
            } else {
                (false, format!("does not start with {prefix:?}"))
            }
        }
        Constraint::EndsWith(suffix) => {
            if response.trim_end().ends_with(suffix.as_str()) {
                (true, format!("ends with {suffix:?}"))
            } else {
                (false, format!("does not end with {suffix:?}"))
            }
        }
        Constraint::BulletCount(n) => check_exact("bullet count", bullet_count(response), *n),
        Constraint::SentenceCount { exact, terminators } => {
            check_exact("sentence count", sentence_count(response, terminators), *exact)
        }
        Constraint::ParagraphCount(n) => check_exact("paragraph count", paragraph_count(response), *n),
        Constraint::JsonObject { required_keys } => match serde_json::from_str::<Value>(strip_code_fence(response)) {
            Ok(Value::Object(obj)) => {
                let missing: Vec<&str> = required_keys
                    .iter()
                    .filter(|k| !obj.contains_key(k.as_str()))
                    .map(String::as_str)
                    .collect();
                if missing.is_empty() {
                    (true, "valid JSON object with required keys".into())
                } else {
                    (false, format!("JSON object missing keys: {}", missing.join(", ")))
                }
            }
            Ok(_) => (false, "JSON value is not an object".into()),
            Err(e) => (false, format!("not valid JSON: {e}")),
        },
        Constraint::NoCodeSwitching(policy) => check_purity(response, policy, false),
        Constraint::ThaiOnly(policy) => check_purity(response, policy, true),
        Constraint::ThaiOrthographyValid => {
            let violations = validate_thai_orthography(response);
            match violations.first() {
                None => (true, "Thai orthography valid".into()),
                Some(v) => (false, format!("{} orthography violation(s); first: {v}", violations.len())),
            }
        }
        Constraint::ForbiddenChars(set) => match response.chars().find(|c| set.contains(*c)) {
            None => (true, "no forbidden characters".into()),
            Some(c) => (false, format!("forbidden character {c:?} present")),
        },
    }
}

/// Run one verifier. Never fails: a response that cannot satisfy the
/// constraint simply does not pass.
pub fn verify(response: &str, spec: &ConstraintSpec) -> VerifierOutcome {
    let (passed, detail) = evaluate(response, &spec.constraint);
    VerifierOutcome {
        constraint_id: spec.id.clone(),
        kind: spec.kind().to_string(),
        passed,
        detail,
    }
}

pub fn verify_all(response: &str, specs: &[ConstraintSpec]) -> VerifierReport {
    let outcomes: Vec<VerifierOutcome> = specs.iter().map(|s| verify(response, s)).collect();
    let all_passed = outcomes.iter().all(|o| o.passed);
    VerifierReport { outcomes, all_passed }
}

pub fn cross_validate_verifier(
    spec: &ConstraintSpec,
    cases: &[CrossValidationCase],
) -> Result<Accuracy, ConstraintError> {
    if cases.is_empty() {
        return Err(ConstraintError::EmptyCaseSet);
    }
    let agreed = cases
        .iter()
        .filter(|c| verify(&c.response, spec).passed == c.expected_pass)
        .count();
    Ok(Accuracy {
        agreed,
        total: cases.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::parse_constraint_spec;
    use proptest::prelude::*;

    fn spec(doc: &str) -> ConstraintSpec {
        parse_constraint_spec(doc).unwrap()
    }

    fn words(min: u64, max: u64) -> ConstraintSpec {
        ConstraintSpec::new("w", Constraint::WordCount(Bounds::new(Some(min), Some(max)).unwrap()))
    }

    #[test]
    fn word_count_exact() {
        assert!(verify("a b c", &words(3, 3)).passed);
        assert!(!verify("a b", &words(3, 3)).passed);
        assert!(verify("  a\n\tb   c ", &words(3, 3)).passed);
    }

    #[test]
    fn thai_only_rejects_latin() {
        let s = spec(r#"{"id":"t","kind":"thai_only","params":{}}"#);
        let out = verify("สวัสดี hello", &s);
        assert!(!out.passed);
        assert!(out.detail.contains("latin"), "{}", out.detail);
        assert!(verify("สวัสดีครับ", &s).passed);
        // thai_only needs some Thai; no_code_switching does not
        assert!(!verify("123", &s).passed);
        assert!(verify("123", &spec(r#"{"id":"n","kind":"no_code_switching"}"#)).passed);
    }

    #[test]
    fn orthography_failure_names_rule() {
        let s = spec(r#"{"id":"o","kind":"thai_orthography_valid","params":{}}"#);
        let out = verify("เ", &s);
        assert!(!out.passed);
        assert!(out.detail.contains("DanglingLeadingVowel"), "{}", out.detail);
    }

    #[test]
    fn verify_all_examples() {
        let include_a = spec(r#"{"id":"k","kind":"keyword_include","params":{"words":["a"]}}"#);
        assert!(verify_all("a b c", &[words(3, 3), include_a]).all_passed);
        assert!(!verify_all("a b c", &[words(4, 9)]).all_passed);
        let empty = verify_all("anything", &[]);
        assert!(empty.all_passed && empty.outcomes.is_empty());
    }

    #[test]
    fn outcomes_keep_spec_order_and_details() {
        let specs = [words(1, 1), words(3, 3), spec(r#"{"id":"e","kind":"ends_with","params":{"suffix":"c"}}"#)];
        let report = verify_all("a b c\n", &specs);
        let passed: Vec<bool> = report.outcomes.iter().map(|o| o.passed).collect();
        assert_eq!(passed, [false, true, true]);
        assert!(report.outcomes.iter().all(|o| !o.detail.is_empty()));
        assert_eq!(report.failures().count(), 1);
    }

    #[test]
    fn cross_validation_examples() {
        let s = words(3, 3);
        let cases = [CrossValidationCase::new("a b c", true), CrossValidationCase::new("a b", false)];
        assert_eq!(cross_validate_verifier(&s, &cases).unwrap().value(), 1.0);
        let bad = [CrossValidationCase::new("a b c", false)];
        assert_eq!(cross_validate_verifier(&s, &bad).unwrap().value(), 0.0);
        assert_eq!(cross_validate_verifier(&s, &[]), Err(ConstraintError::EmptyCaseSet));
    }

    #[test]
    fn formatting_kinds() {
        let bullets = spec(r#"{"id":"b","kind":"bullet_count","params":{"exact":2}}"#);
        assert!(verify("intro\n* one\n  - two\nend", &bullets).passed);
        assert!(!verify("*no space\n- one", &bullets).passed);

        let sentences = spec(r#"{"id":"s","kind":"sentence_count","params":{"exact":3}}"#);
        assert!(verify("One. Two! Three?", &sentences).passed);
        assert!(verify("One... Two! Three", &sentences).passed);
        assert!(!verify("One. Two.", &sentences).passed);

        let thai_sentences = spec(r#"{"id":"s","kind":"sentence_count","params":{"exact":2,"terminators":[" "]}}"#);
        assert!(verify("วันนี้อากาศดี เราไปเที่ยวกัน", &thai_sentences).passed);

        let paragraphs = spec(r#"{"id":"p","kind":"paragraph_count","params":{"exact":2}}"#);
        assert!(verify("first\nstill first\n\n \nsecond\n", &paragraphs).passed);
        assert!(!verify("only one", &paragraphs).passed);

        let lines = spec(r#"{"id":"l","kind":"line_count","params":{"max":2}}"#);
        assert!(verify("a\nb\n", &lines).passed);
        assert!(!verify("a\nb\nc", &lines).passed);
    }

    #[test]
    fn json_object_kind() {
        let s = spec(r#"{"id":"j","kind":"json_object","params":{"required_keys":["title"]}}"#);
        assert!(verify(r#"{"title": "ก"}"#, &s).passed);
        assert!(verify("```json\n{\"title\": 1}\n```", &s).passed);
        assert!(!verify(r#"{"name": 1}"#, &s).passed);
        assert!(!verify("[1,2]", &s).passed);
        assert!(!verify("ไม่ใช่ JSON", &s).passed);
    }

    #[test]
    fn string_kinds() {
        let starts = spec(r#"{"id":"s","kind":"starts_with","params":{"prefix":"สรุป"}}"#);
        assert!(verify("  สรุปคือ", &starts).passed);
        assert!(!verify("โดยสรุป", &starts).passed);
        let exclude = spec(r#"{"id":"x","kind":"keyword_exclude","params":{"words":["ไม่"]}}"#);
        assert!(!verify("ไม่ได้", &exclude).passed);
        let forbidden = spec(r#"{"id":"f","kind":"forbidden_chars","params":{"set":"!?"}}"#);
        assert!(verify("ดีมาก", &forbidden).passed);
        assert!(!verify("ดีมาก!", &forbidden).passed);
        let chars = spec(r#"{"id":"c","kind":"char_count","params":{"min":3,"max":3}}"#);
        assert!(verify("กขค", &chars).passed);
    }

    proptest! {
        #[test]
        fn widening_word_bounds_preserves_pass(
            text in "[a-c \n]{0,24}",
            lo in 0u64..8, span in 0u64..8, widen_lo in 0u64..8, widen_hi in 0u64..8,
        ) {
            let hi = lo + span;
            if verify(&text, &words(lo, hi)).passed {
                let wider = words(lo.saturating_sub(widen_lo), hi + widen_hi);
                prop_assert!(verify(&text, &wider).passed);
            }
        }

        #[test]
        fn verify_is_deterministic(text in "\\PC{0,40}") {
            let s = spec(r#"{"id":"t","kind":"thai_only"}"#);
            prop_assert_eq!(verify(&text, &s), verify(&text, &s));
        }
    }
}
