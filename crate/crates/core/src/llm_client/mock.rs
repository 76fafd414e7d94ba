use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{CompletionRequest, Generator, GeneratorError};
use crate::script_analysis::is_thai;

const THAI_SENTENCES: &[&str] = &[
    "ภาษาไทยเป็นภาษาราชการของประเทศไทย",
    "การอ่านหนังสือทุกวันช่วยพัฒนาความคิด",
    "ควรดื่มน้ำให้เพียงพอในแต่ละวัน",
    "การออกกำลังกายสม่ำเสมอทำให้ร่างกายแข็งแรง",
    "กรุงเทพมหานครเป็นเมืองหลวงของประเทศไทย",
    "อาหารไทยมีรสชาติหลากหลายและกลมกล่อม",
    "การวางแผนล่วงหน้าช่วยลดความเครียด",
    "ครอบครัวเป็นสิ่งสำคัญในชีวิตของทุกคน",
    "การเรียนรู้สิ่งใหม่ต้องใช้ความอดทน",
    "ฤดูฝนในประเทศไทยเริ่มประมาณเดือนพฤษภาคม",
    "ควรนอนหลับพักผ่อนอย่างน้อยเจ็ดชั่วโมง",
    "การประหยัดพลังงานช่วยรักษาสิ่งแวดล้อม",
    "ตลาดน้ำเป็นสถานที่ท่องเที่ยวที่มีชื่อเสียง",
    "การฟังอย่างตั้งใจช่วยให้เข้าใจผู้อื่นมากขึ้น",
];

const ENGLISH_SENTENCES: &[&str] = &[
    "Reading every day helps you think more clearly.",
    "Drinking enough water keeps the body healthy.",
    "Regular exercise builds strength over time.",
    "Planning ahead reduces stress at work.",
    "Bangkok is the capital city of Thailand.",
    "Learning something new takes patience.",
    "Saving energy protects the environment.",
    "Good sleep improves memory and focus.",
    "Listening carefully helps you understand others.",
    "Thai food balances sweet, sour, salty and spicy flavors.",
];

const CONTAMINANTS: &[&str] = &["OK", "meeting", "deadline", "update", "中文", "ข้อมูล data"];

const THAI_OPENERS: &[&str] = &["กรุณา", "โปรด", "ช่วย", "ขอให้"];
const ENGLISH_OPENERS: &[&str] = &["Please", "Kindly", "Could you", "Now"];

/// Offline generator whose output is a pure function of its seed and the
/// request. It never opens a socket.
///
/// If the last user message contains lines starting with `> `, the quoted
/// text is treated as an instruction to rewrite and a numbered variant of
/// it is returned. Otherwise the mock writes a short answer in the script
/// of the prompt, occasionally slipping in a foreign word.
#[derive(Debug, Clone)]
pub struct MockGenerator {
    seed: u64,
    temperature: f64,
    contamination: f64,
}

impl MockGenerator {
    pub fn new(seed: u64) -> Self {
        MockGenerator {
            seed,
            temperature: 0.7,
            contamination: 0.1,
        }
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    /// Probability that a Thai answer contains a foreign word.
    pub fn with_contamination(mut self, p: f64) -> Self {
        self.contamination = p.clamp(0.0, 1.0);
        self
    }

    fn rng_for(&self, request: &CompletionRequest) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(request.seed.to_le_bytes());
        for m in &request.messages {
            h.update(m.role.as_str().as_bytes());
            h.update([0x1f]);
            h.update(m.content.as_bytes());
            h.update([0x1e]);
        }
        ChaCha8Rng::from_seed(h.finalize().into())
    }

    fn rewrite(&self, rng: &mut ChaCha8Rng, quoted: &str, thai: bool, n: u64) -> String {
        let already_polite = ["กรุณา", "โปรด", "Please"].iter().any(|p| quoted.starts_with(p));
        let opener = if thai { THAI_OPENERS } else { ENGLISH_OPENERS }.choose(rng).unwrap();
        let body = if already_polite || rng.random_bool(0.5) {
            quoted.to_string()
        } else if thai {
            format!("{opener}{quoted}")
        } else {
            let mut chars = quoted.chars();
            let first: String = chars.next().map(|c| c.to_lowercase().collect()).unwrap_or_default();
            format!("{opener} {first}{}", chars.as_str())
        };
        if thai {
            format!("{body} (แบบที่ {n})")
        } else {
            format!("{body} (variant {n})")
        }
    }

    fn answer(&self, rng: &mut ChaCha8Rng, thai: bool) -> String {
        let bank = if thai { THAI_SENTENCES } else { ENGLISH_SENTENCES };
        let n = rng.random_range(1..=6);
        let mut sentences: Vec<String> = (0..n).map(|_| bank.choose(rng).unwrap().to_string()).collect();
        if thai && rng.random_bool(self.contamination) {
            let i = rng.random_range(0..sentences.len());
            let word = CONTAMINANTS.choose(rng).unwrap();
            sentences[i] = format!("{} {word}", sentences[i]);
        }
        match rng.random_range(0..3) {
            0 => sentences.iter().map(|s| format!("- {s}")).collect::<Vec<_>>().join("\n"),
            1 => sentences.join("\n\n"),
            _ => sentences.join(" "),
        }
    }
}

impl Generator for MockGenerator {
    fn name(&self) -> &str {
        "mock"
    }

    fn temperature(&self) -> f64 {
        self.temperature
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, GeneratorError> {
        let last = request
            .messages
            .iter()
            .rev()
            .find(|m| m.role == crate::corpus::Role::User)
            .or(request.messages.last())
            .ok_or(GeneratorError::EmptyMessages)?;
        let mut rng = self.rng_for(request);
        let quoted: Vec<&str> = last
            .content
            .lines()
            .filter_map(|l| l.strip_prefix("> "))
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        if quoted.is_empty() {
            let thai = last.content.chars().any(is_thai);
            Ok(self.answer(&mut rng, thai))
        } else {
            let text = quoted.join(" ");
            let thai = text.chars().any(is_thai);
            Ok(self.rewrite(&mut rng, &text, thai, request.seed + 1))
        }
    }
}

/// Returns fixed replies in rotation, ignoring the request. Useful for
/// exercising duplicate handling.
#[derive(Debug)]
pub struct ScriptedGenerator {
    replies: Vec<Result<String, GeneratorError>>,
    next: AtomicUsize,
}

impl ScriptedGenerator {
    pub fn new<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        ScriptedGenerator {
            replies: replies.into_iter().map(|s| Ok(s.into())).collect(),
            next: AtomicUsize::new(0),
        }
    }

    pub fn with_results(replies: Vec<Result<String, GeneratorError>>) -> Self {
        ScriptedGenerator { replies, next: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.next.load(Ordering::SeqCst)
    }
}

impl Generator for ScriptedGenerator {
    fn name(&self) -> &str {
        "scripted"
    }

    fn temperature(&self) -> f64 {
        0.0
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, GeneratorError> {
        if request.messages.is_empty() {
            return Err(GeneratorError::EmptyMessages);
        }
        if self.replies.is_empty() {
            return Err(GeneratorError::Unavailable { attempts: 1, last_error: "no scripted replies".into() });
        }
        let i = self.next.fetch_add(1, Ordering::SeqCst);
        self.replies[i % self.replies.len()].clone()
    }
}
