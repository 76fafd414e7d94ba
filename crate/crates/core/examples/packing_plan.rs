//! Pack samples first-fit-decreasing and compute a training plan.
//!
//! cargo run --example packing_plan

use thaicurate::corpus::ChatSample;
use thaicurate::packing::{pack, pack_lengths, packing_efficiency, tokenizer_by_name, training_plan};

fn main() -> anyhow::Result<()> {
    let result = pack_lengths(&[(0, 5000), (1, 4000), (2, 3000)], 8192);
    for (i, seq) in result.sequences.iter().enumerate() {
        println!("sequence {i}: samples {:?}, {} / {} tokens", seq.sample_ids, seq.total_tokens, seq.capacity);
    }
    println!("efficiency {:.4}\n", packing_efficiency(&result.sequences)?);

    let samples: Vec<ChatSample> = (1..=20)
        .map(|n| ChatSample::pair("เล่าเรื่อง", vec!["คำ"; n * 7].join(" "), "demo").unwrap())
        .collect();
    let tokenizer = tokenizer_by_name("whitespace").unwrap();
    let packed = pack(&samples, tokenizer.as_ref(), 4, 256);
    println!(
        "{} samples -> {} sequences of 256 tokens, efficiency {:.4}\n",
        samples.len(),
        packed.sequences.len(),
        packing_efficiency(&packed.sequences)?
    );

    let plan = training_plan(512, 2, 64, 4096, 1000)?;
    print!("{}", plan.render_table());
    Ok(())
}
