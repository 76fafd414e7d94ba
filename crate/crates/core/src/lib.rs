pub mod constraints;
pub mod corpus;
pub mod jsonl;
pub mod script_analysis;
pub mod packing;
pub mod metrics;
pub mod llm_client;
pub mod autoif;
pub mod cli;
