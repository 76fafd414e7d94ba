//! Run the synthesis pipeline offline with the mock generator.
//!
//! cargo run --example autoif_mock

use thaicurate::autoif::{run_pipeline, PipelineConfig};
use thaicurate::llm_client::GeneratorConfig;

fn main() -> anyhow::Result<()> {
    let dir = tempfile_dir()?;
    let config = PipelineConfig {
        seed_files: vec!["builtin:en".into(), "builtin:th".into()],
        output: dir.join("autoif.jsonl"),
        report: None,
        per_seed: 3,
        k: 2,
        threshold: 0.8,
        jobs: None,
        generator: GeneratorConfig::mock(2024),
    };
    let run = run_pipeline(&config)?;
    println!("{}", serde_json::to_string_pretty(&run.report)?);
    println!("shard:  {}", run.shard_path.display());
    println!("report: {}", run.report_path.display());
    let first = std::fs::read_to_string(&run.shard_path)?;
    if let Some(line) = first.lines().next() {
        println!("first record: {line}");
    }
    Ok(())
}

fn tempfile_dir() -> std::io::Result<std::path::PathBuf> {
    let dir = std::env::temp_dir().join("thaicurate-autoif-example");
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}
