//! Send one request to an OpenAI-compatible endpoint, or to the mock when
//! no endpoint is configured.
//!
//! GENERATOR_BASE_URL=http://localhost:8000/v1 GENERATOR_MODEL=my-model \
//!     cargo run --example generator_client -- "แนะนำอาหารไทยสามอย่าง"

use thaicurate::llm_client::{CompletionRequest, GeneratorConfig};

fn main() -> anyhow::Result<()> {
    let prompt = std::env::args().nth(1).unwrap_or_else(|| "ช่วยแนะนำอาหารไทยสามอย่าง".into());
    let mut config = GeneratorConfig::from_env();
    if config.base_url.is_empty() {
        eprintln!("no GENERATOR_BASE_URL set, using the mock generator");
        config.mock_seed = Some(1);
    }
    let generator = config.build()?;
    println!("generator: {} (temperature {})", generator.name(), generator.temperature());
    for seed in 0..2 {
        let reply = generator.complete(&CompletionRequest::user(prompt.clone(), seed))?;
        println!("--- seed {seed}\n{reply}");
    }
    Ok(())
}
