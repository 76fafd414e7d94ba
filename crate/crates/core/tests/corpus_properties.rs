use proptest::prelude::*;
use thaicurate::corpus::{
    self, canonical_key, dedup, filter_by_turns, ingest_bytes, ChatSample, DedupOptions, NearDupConfig, Shard,
};
use thaicurate::packing::{pack_lengths, training_plan};

fn sample() -> impl Strategy<Value = ChatSample> {
    let text = prop_oneof![
        Just("สวัสดี".to_string()),
        Just("สวัสดี ".to_string()),
        Just("hello world".to_string()),
        Just("ขอบคุณ".to_string()),
        "[a-cก-ค][a-cก-ค ]{0,5}",
    ];
    (prop::collection::vec((text.clone(), text), 1..4), prop::sample::select(vec!["a", "b"])).prop_map(
        |(turns, source)| {
            let messages = turns
                .into_iter()
                .flat_map(|(u, a)| [corpus::ChatMessage::user(u), corpus::ChatMessage::assistant(a)])
                .collect();
            ChatSample::new(messages, source).unwrap()
        },
    )
}

fn options() -> impl Strategy<Value = DedupOptions> {
    prop_oneof![Just(DedupOptions::default()), Just(DedupOptions { near_dup: Some(NearDupConfig::default()) })]
}

fn is_subsequence(sub: &[ChatSample], of: &[ChatSample]) -> bool {
    let mut it = of.iter();
    sub.iter().all(|s| it.any(|o| o == s))
}

proptest! {
    #[test]
    fn ingest_never_panics(data in prop::collection::vec(any::<u8>(), 0..512)) {
        let out = ingest_bytes(&data, "fuzz");
        let nonblank = data.split(|b| *b == b'\n').filter(|l| !l.iter().all(u8::is_ascii_whitespace)).count();
        prop_assert_eq!(out.samples.len() + out.diagnostics.len(), nonblank);
    }

    #[test]
    fn ingest_survives_json_shaped_noise(lines in prop::collection::vec(
        prop_oneof![
            Just(r#"{"messages":[{"role":"user","content":"a"},{"role":"assistant","content":"b"}]}"#.to_string()),
            Just(r#"{"messages":[]}"#.to_string()),
            Just(r#"{"messages":[{"role":"robot","content":"x"}]}"#.to_string()),
            Just(r#"{"messages":[{"role":"assistant","content":"x"}]}"#.to_string()),
            "\\{\"messages\":\\[[^\n]{0,20}",
        ],
        0..20,
    )) {
        let data = lines.join("\n");
        let out = ingest_bytes(data.as_bytes(), "fuzz");
        for d in &out.diagnostics {
            prop_assert!(d.line >= 1 && d.line <= lines.len());
        }
    }

    #[test]
    fn dedup_is_idempotent_and_order_stable(samples in prop::collection::vec(sample(), 0..30), opts in options()) {
        let once = dedup(samples.clone(), &opts);
        let twice = dedup(once.samples.clone(), &opts);
        prop_assert_eq!(&twice.samples, &once.samples);
        prop_assert_eq!(twice.duplicates_removed + twice.near_duplicates_removed, 0);
        prop_assert!(is_subsequence(&once.samples, &samples));
        prop_assert_eq!(
            once.samples.len() + once.duplicates_removed + once.near_duplicates_removed,
            samples.len()
        );
        let mut keys: Vec<_> = once.samples.iter().map(canonical_key).collect();
        keys.sort_unstable();
        keys.dedup();
        prop_assert_eq!(keys.len(), once.samples.len());
    }

    #[test]
    fn turn_filter_keeps_order(samples in prop::collection::vec(sample(), 0..30), lo in 1usize..4, span in 0usize..3) {
        let kept = filter_by_turns(samples.clone(), lo, lo + span).unwrap();
        prop_assert!(kept.iter().all(|s| (lo..=lo + span).contains(&s.turns())));
        prop_assert!(is_subsequence(&kept, &samples));
        prop_assert_eq!(kept.len(), samples.iter().filter(|s| (lo..=lo + span).contains(&s.turns())).count());
    }

    #[test]
    fn merging_a_shard_with_itself_is_the_shard(samples in prop::collection::vec(sample(), 1..20)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let expected = dedup(samples.iter().map(|s| s.clone().with_source("x")).collect(), &DedupOptions::default());
        corpus::write_corpus(&path, &samples).unwrap();
        let merged = corpus::merge_streams(
            &[Shard::new(&path, "x"), Shard::new(&path, "x")],
            &DedupOptions::default(),
        ).unwrap();
        prop_assert_eq!(merged.samples, expected.samples);
    }

    #[test]
    fn packing_conserves_ids(sizes in prop::collection::vec(1usize..120, 0..200), capacity in 1usize..100) {
        let items: Vec<(usize, usize)> = sizes.iter().copied().enumerate().collect();
        let result = pack_lengths(&items, capacity);
        let mut ids: Vec<usize> = result.sequences.iter().flat_map(|s| s.sample_ids.clone()).chain(result.oversize.clone()).collect();
        ids.sort_unstable();
        prop_assert_eq!(ids, (0..sizes.len()).collect::<Vec<_>>());
        prop_assert!(result.sequences.iter().all(|s| s.total_tokens <= capacity && !s.sample_ids.is_empty()));
    }

    #[test]
    fn accepted_plans_satisfy_accumulation(mb in 1u64..16, gpus in 1u64..64, accum in 1u64..16, extra in 0u64..3) {
        let global = mb * gpus * accum + extra;
        match training_plan(global, mb, gpus, 10, 100) {
            Ok(plan) => {
                prop_assert_eq!(plan.grad_accum * plan.micro_batch * plan.gpu_count, plan.global_batch);
                prop_assert_eq!(plan.total_tokens, global * 10 * 100);
            }
            Err(_) => prop_assert!(global % (mb * gpus) != 0),
        }
    }
}

#[test]
fn ingest_reports_line_numbers() {
    let data = b"{\"messages\":[{\"role\":\"user\",\"content\":\"a\"},{\"role\":\"assistant\",\"content\":\"b\"}]}\n\nnot json\n\xff\xfe\n";
    let out = ingest_bytes(data, "t");
    assert_eq!(out.samples.len(), 1);
    let lines: Vec<usize> = out.diagnostics.iter().map(|d| d.line).collect();
    assert_eq!(lines, [3, 4]);
}
