//! Render the shipped benchmark tables with deltas, plus a code-switching score.
//!
//! cargo run --example benchmark_report

use thaicurate::metrics::{builtin_tables, code_switching_score_texts, emit_report, Report, ReportFormat};
use thaicurate::script_analysis::PurityPolicy;

fn main() -> anyhow::Result<()> {
    let outputs = [
        "กรุงเทพเป็นเมืองหลวงของประเทศไทย",
        "อาหารไทยมีรสชาติจัดจ้าน",
        "ลองใช้คำสั่ง cargo_build ดู",
        "This answer drifted into English",
    ];
    let score = code_switching_score_texts(&outputs, &PurityPolicy::default())?;
    let report = Report {
        baseline: Some("Qwen3-32B".into()),
        tables: builtin_tables(),
        code_switching: Some(score),
        ..Default::default()
    };
    print!("{}", emit_report(&report, ReportFormat::Human)?);
    Ok(())
}
