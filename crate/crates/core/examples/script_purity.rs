//! Classify characters, find exclusions and check Thai purity and orthography.
//!
//! cargo run --example script_purity

use thaicurate::script_analysis::{
    detect_exclusions, is_thai_pure, purity_violations, script_profile, validate_thai_orthography, Allowlist,
    PurityPolicy,
};

fn main() {
    let allowlist = Allowlist::new(["OpenAI"]);
    let policy = PurityPolicy::default().with_allowlist(allowlist.clone());
    let texts = [
        "สวัสดีครับ วันนี้อากาศดีมาก",
        "ดูรายละเอียดที่ https://example.com/docs ได้เลย",
        "เรียกฟังก์ชัน load_config() ก่อน",
        "บริษัท OpenAI เปิดตัวโมเดลใหม่",
        "ผลลัพธ์ดี very good มาก",
        "ภาษาไทย 漢字 ปนกัน",
    ];
    for text in texts {
        let exclusions = detect_exclusions(text, &allowlist);
        let profile = script_profile(text, &exclusions).expect("detected exclusions are well-formed");
        println!("{text}");
        println!("  pure={} profile={}", is_thai_pure(text, &policy), serde_json::to_string(&profile).unwrap());
        for span in purity_violations(text, &policy) {
            println!("  violation {:?} {:?}", span.class, &text[span.range()]);
        }
    }

    println!();
    for text in ["เก", "เ", "ก\u{0E48}\u{0E48}", "ก\u{0E48}\u{0E34}", "\u{0E34}ก"] {
        let v = validate_thai_orthography(text);
        let rendered: Vec<String> = v.iter().map(ToString::to_string).collect();
        println!("{text:?}: {}", if rendered.is_empty() { "ok".to_string() } else { rendered.join("; ") });
    }
}
