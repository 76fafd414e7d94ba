use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::atomic::{AtomicBool, Ordering};

use super::seeds::{Language, SeedInstruction};
use super::{AutoifError, PipelineReport};
use crate::constraints::verify_all;
use crate::corpus::{normalize_text, ChatMessage};
use crate::llm_client::{CompletionRequest, Generator, GeneratorError};

const AUGMENT_SYSTEM_EN: &str =
    "You rewrite instructions. Keep every requirement of the original instruction and reply with the rewritten instruction only.";
const AUGMENT_SYSTEM_TH: &str =
    "คุณมีหน้าที่เขียนคำสั่งใหม่ โดยคงข้อกำหนดทุกข้อของคำสั่งเดิมไว้ และตอบกลับเฉพาะคำสั่งที่เขียนใหม่เท่านั้น";
const RESPOND_SYSTEM_EN: &str = "You are a helpful assistant. Follow every requirement in the instruction exactly.";
const RESPOND_SYSTEM_TH: &str = "คุณเป็นผู้ช่วยที่ตอบเป็นภาษาไทย และปฏิบัติตามข้อกำหนดทุกข้อในคำสั่งอย่างเคร่งครัด";

/// An instruction produced by augmentation, tied back to its seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub text: String,
    pub origin_seed: String,
    pub language: Language,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationMeta {
    pub generator: String,
    pub seed: u64,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub instruction: String,
    pub response: String,
    pub origin_seed: String,
    pub generation_meta: GenerationMeta,
}

#[derive(Debug, Clone, Default)]
pub struct AugmentOutcome {
    pub instructions: Vec<Instruction>,
    pub requests: usize,
    pub failed_requests: usize,
    pub duplicates_removed: usize,
}

#[derive(Debug, Clone, Default)]
pub struct GenerateOutcome {
    pub pairs: Vec<CandidatePair>,
    pub requests: usize,
    pub failed_requests: usize,
}

fn quote(text: &str) -> String {
    text.lines().map(|l| format!("> {l}")).collect::<Vec<_>>().join("\n")
}

pub fn augmentation_request(seed: &SeedInstruction, variant: usize) -> CompletionRequest {
    let n = variant + 1;
    let (system, user) = match seed.language {
        Language::En => (
            AUGMENT_SYSTEM_EN,
            format!("Rewrite the instruction below in a different way (variant {n}).\n\n{}", quote(&seed.text)),
        ),
        Language::Th => (
            AUGMENT_SYSTEM_TH,
            format!("เขียนคำสั่งด้านล่างใหม่ในรูปแบบอื่น (แบบที่ {n})\n\n{}", quote(&seed.text)),
        ),
    };
    CompletionRequest::new(vec![ChatMessage::system(system), ChatMessage::user(user)], variant as u64)
}

pub fn response_request(instruction: &Instruction, sample: usize) -> CompletionRequest {
    let system = match instruction.language {
        Language::En => RESPOND_SYSTEM_EN,
        Language::Th => RESPOND_SYSTEM_TH,
    };
    CompletionRequest::new(
        vec![ChatMessage::system(system), ChatMessage::user(instruction.text.clone())],
        sample as u64,
    )
}

/// Fan requests out over the current rayon pool, in order. Once a request
/// exhausts its retries before anything has succeeded, the endpoint is
/// treated as down and remaining requests are skipped.
fn run_requests(generator: &dyn Generator, requests: &[CompletionRequest]) -> Vec<Result<String, GeneratorError>> {
    let any_ok = AtomicBool::new(false);
    let tripped = AtomicBool::new(false);
    requests
        .par_iter()
        .map(|req| {
            if tripped.load(Ordering::Relaxed) {
                return Err(GeneratorError::Unavailable {
                    attempts: 0,
                    last_error: "skipped: generator is unreachable".into(),
                });
            }
            let out = generator
                .complete(req)
                .and_then(|s| if s.trim().is_empty() { Err(GeneratorError::MalformedResponse("empty content".into())) } else { Ok(s) });
            match &out {
                Ok(_) => any_ok.store(true, Ordering::Relaxed),
                Err(GeneratorError::Unavailable { .. }) if !any_ok.load(Ordering::Relaxed) => {
                    tripped.store(true, Ordering::Relaxed)
                }
                Err(_) => {}
            }
            out
        })
        .collect()
}

fn all_failed(results: &[Result<String, GeneratorError>]) -> Option<AutoifError> {
    if results.is_empty() || results.iter().any(Result::is_ok) {
        return None;
    }
    let last_error = results
        .iter()
        .find_map(|r| r.as_ref().err())
        .map(ToString::to_string)
        .unwrap_or_default();
    Some(AutoifError::GeneratorUnavailable {
        failed: results.len(),
        last_error,
    })
}

/// Ask the generator for `per_seed` rewrites of every seed. Exact
/// duplicates (after whitespace and Unicode normalization) are dropped,
/// keeping the first. Individual failures are counted; the stage fails
/// only when every request fails.
pub fn augment_instructions(
    seeds: &[SeedInstruction],
    generator: &dyn Generator,
    per_seed: usize,
) -> Result<AugmentOutcome, AutoifError> {
    if per_seed == 0 {
        return Err(AutoifError::InvalidParameter("per_seed must be at least 1".into()));
    }
    let jobs: Vec<(&SeedInstruction, CompletionRequest)> = seeds
        .iter()
        .flat_map(|s| (0..per_seed).map(move |v| (s, augmentation_request(s, v))))
        .collect();
    let requests: Vec<CompletionRequest> = jobs.iter().map(|(_, r)| r.clone()).collect();
    let results = run_requests(generator, &requests);
    if let Some(e) = all_failed(&results) {
        return Err(e);
    }

    let mut out = AugmentOutcome {
        requests: requests.len(),
        ..Default::default()
    };
    let mut seen = HashSet::new();
    for ((seed, _), result) in jobs.iter().zip(results) {
        match result {
            Ok(text) => {
                let text = text.trim().to_string();
                if seen.insert(normalize_text(&text)) {
                    out.instructions.push(Instruction {
                        text,
                        origin_seed: seed.id.clone(),
                        language: seed.language,
                    });
                } else {
                    out.duplicates_removed += 1;
                }
            }
            Err(e) => {
                log::debug!("augmentation for seed {} failed: {e}", seed.id);
                out.failed_requests += 1;
            }
        }
    }
    Ok(out)
}

/// Sample `k` responses per instruction. Pairs come back grouped by
/// instruction in input order.
pub fn generate_responses(
    instructions: &[Instruction],
    generator: &dyn Generator,
    k: usize,
) -> Result<GenerateOutcome, AutoifError> {
    if k == 0 {
        return Err(AutoifError::InvalidParameter("k must be at least 1".into()));
    }
    let jobs: Vec<(&Instruction, usize)> = instructions.iter().flat_map(|i| (0..k).map(move |j| (i, j))).collect();
    let requests: Vec<CompletionRequest> = jobs.iter().map(|(i, j)| response_request(i, *j)).collect();
    let results = run_requests(generator, &requests);
    if let Some(e) = all_failed(&results) {
        return Err(e);
    }

    let mut out = GenerateOutcome {
        requests: requests.len(),
        ..Default::default()
    };
    for ((instruction, j), result) in jobs.iter().zip(results) {
        match result {
            Ok(response) => out.pairs.push(CandidatePair {
                instruction: instruction.text.clone(),
                response,
                origin_seed: instruction.origin_seed.clone(),
                generation_meta: GenerationMeta {
                    generator: generator.name().to_string(),
                    seed: *j as u64,
                    temperature: generator.temperature(),
                },
            }),
            Err(e) => {
                log::debug!("generation for seed {} failed: {e}", instruction.origin_seed);
                out.failed_requests += 1;
            }
        }
    }
    Ok(out)
}

/// Keep pairs whose response passes every constraint of their seed. The
/// returned report fills only the filtering tallies.
pub fn filter_validated(
    pairs: &[CandidatePair],
    seeds: &[SeedInstruction],
) -> Result<(Vec<CandidatePair>, PipelineReport), AutoifError> {
    let by_id: HashMap<&str, &SeedInstruction> = seeds.iter().map(|s| (s.id.as_str(), s)).collect();
    for p in pairs {
        if !by_id.contains_key(p.origin_seed.as_str()) {
            return Err(AutoifError::UnknownSeedReference(p.origin_seed.clone()));
        }
    }
    let verdicts: Vec<_> = pairs
        .par_iter()
        .map(|p| verify_all(&p.response, &by_id[p.origin_seed.as_str()].constraints))
        .collect();

    let mut validated = Vec::new();
    let mut rejection_by_constraint: BTreeMap<String, usize> = BTreeMap::new();
    for (pair, verdict) in pairs.iter().zip(&verdicts) {
        if verdict.all_passed {
            validated.push(pair.clone());
        } else {
            for f in verdict.failures() {
                *rejection_by_constraint.entry(f.kind.clone()).or_default() += 1;
            }
        }
    }
    let report = PipelineReport {
        responses_generated: pairs.len(),
        pairs_validated: validated.len(),
        pairs_rejected: pairs.len() - validated.len(),
        rejection_by_constraint,
        ..Default::default()
    };
    Ok((validated, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoif::seeds::builtin_seeds;
    use crate::constraints::parse_constraint_spec;
    use crate::llm_client::{MockGenerator, ScriptedGenerator};

    fn seed(id: &str, constraints: &[&str]) -> SeedInstruction {
        SeedInstruction {
            id: id.into(),
            language: Language::En,
            text: "Say something.".into(),
            constraints: constraints.iter().map(|c| parse_constraint_spec(c).unwrap()).collect(),
            cross_validation: vec![],
        }
    }

    fn pair(seed: &str, response: &str) -> CandidatePair {
        CandidatePair {
            instruction: "i".into(),
            response: response.into(),
            origin_seed: seed.into(),
            generation_meta: GenerationMeta { generator: "t".into(), seed: 0, temperature: 0.0 },
        }
    }

    const TWO_WORDS: &str = r#"{"id":"w","kind":"word_count","params":{"min":2,"max":2}}"#;

    #[test]
    fn mock_gives_distinct_variants() {
        let seeds = vec![seed("s", &[TWO_WORDS])];
        let out = augment_instructions(&seeds, &MockGenerator::new(1), 3).unwrap();
        assert_eq!(out.instructions.len(), 3);
        assert!(out.instructions.iter().all(|i| i.origin_seed == "s"));
    }

    #[test]
    fn duplicate_variants_are_dropped() {
        let seeds = vec![seed("s", &[TWO_WORDS])];
        let out = augment_instructions(&seeds, &ScriptedGenerator::new(["same"]), 3).unwrap();
        assert_eq!(out.instructions.len(), 1);
        assert_eq!(out.duplicates_removed, 2);
    }

    #[test]
    fn full_seed_set_stays_within_budget() {
        let mut seeds = builtin_seeds(Language::En);
        seeds.extend(builtin_seeds(Language::Th));
        let out = augment_instructions(&seeds, &MockGenerator::new(42), 40).unwrap();
        assert!(out.instructions.len() <= 3000);
        assert_eq!(out.instructions.len() + out.duplicates_removed + out.failed_requests, 3000);
    }

    #[test]
    fn partial_failures_are_counted() {
        let seeds = vec![seed("s", &[TWO_WORDS])];
        let gen = ScriptedGenerator::with_results(vec![
            Ok("a".into()),
            Err(GeneratorError::MalformedResponse("x".into())),
        ]);
        let out = augment_instructions(&seeds, &gen, 2).unwrap();
        assert_eq!(out.instructions.len(), 1);
        assert_eq!(out.failed_requests, 1);

        let down = ScriptedGenerator::with_results(vec![Err(GeneratorError::Unavailable { attempts: 3, last_error: "x".into() })]);
        assert!(matches!(augment_instructions(&seeds, &down, 2), Err(AutoifError::GeneratorUnavailable { .. })));
    }

    #[test]
    fn response_cardinality() {
        let inst = |t: &str| Instruction { text: t.into(), origin_seed: "s".into(), language: Language::En };
        let g = MockGenerator::new(9);
        assert_eq!(generate_responses(&[inst("a"), inst("b")], &g, 2).unwrap().pairs.len(), 4);
        assert!(generate_responses(&[], &g, 5).unwrap().pairs.is_empty());
        let once = generate_responses(&[inst("a")], &g, 1).unwrap().pairs;
        let twice = generate_responses(&[inst("a")], &g, 1).unwrap().pairs;
        assert_eq!(serde_json::to_string(&once).unwrap(), serde_json::to_string(&twice).unwrap());
        assert_eq!(once[0].generation_meta.generator, "mock");
        assert!(matches!(generate_responses(&[inst("a")], &g, 0), Err(AutoifError::InvalidParameter(_))));
    }

    #[test]
    fn filtering_tallies_rejections() {
        let seeds = vec![seed("s", &[TWO_WORDS])];
        let (ok, report) = filter_validated(&[pair("s", "two words"), pair("s", "three words here")], &seeds).unwrap();
        assert_eq!(ok.len(), 1);
        assert_eq!(report.pairs_rejected, 1);
        assert_eq!(report.rejection_by_constraint["word_count"], 1);
        assert!(matches!(filter_validated(&[pair("nope", "x")], &seeds), Err(AutoifError::UnknownSeedReference(_))));
    }

    #[test]
    fn sixty_of_hundred_pass() {
        let seeds = vec![seed("s", &[TWO_WORDS])];
        let pairs: Vec<CandidatePair> = (0..100).map(|i| pair("s", if i % 5 < 3 { "ok then" } else { "no" })).collect();
        let (ok, report) = filter_validated(&pairs, &seeds).unwrap();
        assert_eq!(ok.len(), 60);
        assert_eq!(report.pairs_validated + report.pairs_rejected, report.responses_generated);
    }
}
