//! Parse constraint specs, verify responses and cross-validate a verifier.
//!
//! cargo run --example constraint_verify

use thaicurate::constraints::{
    cross_validate_verifier, parse_constraint_spec, registered_kinds, verify_all, CrossValidationCase,
};

fn main() -> anyhow::Result<()> {
    println!("registered kinds:");
    for kind in registered_kinds() {
        println!("  {:<22} {}", kind.name, kind.summary);
    }

    let specs = [
        r#"{"id":"c1","kind":"bullet_count","params":{"exact":3}}"#,
        r#"{"id":"c2","kind":"thai_only","params":{}}"#,
        r#"{"id":"c3","kind":"keyword_include","params":{"words":["ข้าว"]}}"#,
    ]
    .iter()
    .map(|s| parse_constraint_spec(s))
    .collect::<Result<Vec<_>, _>>()?;

    for response in ["- ข้าวผัด\n- ข้าวมันไก่\n- ต้มยำ", "- rice\n- noodles", "ข้าวเหนียวมะม่วง"] {
        let report = verify_all(response, &specs);
        println!("\n{response:?} all_passed={}", report.all_passed);
        for o in &report.outcomes {
            println!("  {} {:<16} {} {}", o.constraint_id, o.kind, if o.passed { "pass" } else { "FAIL" }, o.detail);
        }
    }

    let cases = vec![
        CrossValidationCase::new("ภาษาไทยล้วน", true),
        CrossValidationCase::new("ภาษาไทย mixed", false),
        CrossValidationCase::new("English only", false),
    ];
    let accuracy = cross_validate_verifier(&specs[1], &cases)?;
    println!("\nthai_only cross-validation accuracy {accuracy}");
    Ok(())
}
