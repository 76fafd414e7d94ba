//! Build two small shards, merge them with dedup and print statistics.
//!
//! cargo run --example corpus_merge

use thaicurate::corpus::{self, ChatMessage, ChatSample, DedupOptions, NearDupConfig, Shard};
use thaicurate::script_analysis::PurityPolicy;

fn conversation(i: usize, turns: usize) -> ChatSample {
    let mut messages = vec![ChatMessage::system("คุณคือผู้ช่วยที่ตอบเป็นภาษาไทย")];
    for t in 0..turns {
        messages.push(ChatMessage::user(format!("คำถามข้อ {t} ในบทสนทนา {i}")));
        messages.push(ChatMessage::assistant(format!("คำตอบข้อ {t} ในบทสนทนา {i}")));
    }
    ChatSample::new(messages, "systemchat").unwrap()
}

fn main() -> anyhow::Result<()> {
    let dir = std::env::temp_dir().join("thaicurate-corpus-example");
    std::fs::create_dir_all(&dir)?;

    let mut systemchat: Vec<ChatSample> = (0..12).map(|i| conversation(i, 2 + i % 5)).collect();
    systemchat.push(conversation(0, 2));
    let autoif: Vec<ChatSample> = (0..8)
        .map(|i| ChatSample::pair(format!("เขียนประโยคที่ {i}"), format!("นี่คือประโยคที่ {i}"), "autoif").unwrap())
        .collect();
    corpus::write_corpus(dir.join("systemchat.jsonl"), &systemchat)?;
    corpus::write_corpus(dir.join("autoif.jsonl"), &autoif)?;

    let ingested = corpus::ingest(dir.join("systemchat.jsonl"))?;
    let kept = corpus::filter_by_turns(ingested.samples, 3, 25)?;
    println!("systemchat: {} samples with 3..=25 turns", kept.len());
    corpus::write_corpus(dir.join("systemchat.filtered.jsonl"), &kept)?;

    let options = DedupOptions { near_dup: Some(NearDupConfig::default()) };
    let merged = corpus::merge_streams(
        &[
            Shard::new(dir.join("systemchat.filtered.jsonl"), "systemchat"),
            Shard::new(dir.join("autoif.jsonl"), "autoif"),
        ],
        &options,
    )?;
    println!(
        "merged: {} samples, {} exact and {} near duplicates removed\n",
        merged.samples.len(),
        merged.duplicates_removed,
        merged.near_duplicates_removed
    );
    print!("{}", corpus::stats(&merged.samples, &PurityPolicy::default()).render_table());
    Ok(())
}
