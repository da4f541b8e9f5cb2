mod common {
    pub mod goldens;
}

use std::collections::BTreeMap;
use std::sync::Arc;

use common::goldens;
use gameeval::corpus::example_games;
use gameeval::llm::{
    apply_direct_filter, build_prompt, estimate_tokens, extract_think, parse_response, Answer, FailureReason, Gateway,
    ParseOutcome, PromptMode, ProviderConfig, Query, SampleKey, StubProvider, TraceRecord, DEFAULT_PROSE_BUDGET,
};
use gameeval::store::{load_records, write_records};
use proptest::prelude::*;

#[test]
fn prompts_match_the_transcribed_goldens() {
    let mismatches = goldens::golden_mismatches();
    assert!(mismatches.is_empty(), "{mismatches:#?}");
}

#[test]
fn worked_replies_parse() {
    assert!(goldens::worked_replies_parse());
}

#[test]
fn every_example_game_has_a_prompt_in_every_mode() {
    for spec in example_games() {
        for query in [Query::Payoff, Query::Funness] {
            for mode in [PromptMode::Direct, PromptMode::Cot, PromptMode::Reasoning] {
                let p = build_prompt(&spec, query, mode, false).unwrap();
                assert!(p.user.contains("Board size: "), "{}", spec.game_id);
                assert!(p.user.contains("Win conditions: "), "{}", spec.game_id);
            }
        }
    }
}

fn key(query: Query) -> SampleKey {
    SampleKey { evaluator_id: "m-direct".into(), game_id: "g".into(), query, rollout: 0 }
}

fn direct_record(text: &str, query: Query) -> TraceRecord {
    TraceRecord {
        key: key(query),
        prompt_mode: PromptMode::Direct,
        raw_text: text.to_string(),
        trace_text: None,
        reasoning_tokens: None,
        parse: parse_response(text, query),
        coder_labels: BTreeMap::new(),
    }
}

fn query() -> impl Strategy<Value = Query> {
    prop_oneof![Just(Query::Payoff), Just(Query::Funness)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn parser_is_total(text in ".{0,300}", q in query()) {
        match parse_response(&text, q) {
            ParseOutcome::Ok(Answer::Payoff { q1, q2 }) => {
                prop_assert!((0.0..=100.0).contains(&q1) && (0.0..=100.0).contains(&q2));
            }
            ParseOutcome::Ok(Answer::Funness { rating }) => prop_assert!((0.0..=100.0).contains(&rating)),
            ParseOutcome::Failed(_) | ParseOutcome::Filtered => {}
        }
    }

    #[test]
    fn parser_is_total_near_markers(
        junk in prop::collection::vec(prop_oneof![
            Just("RESPONSE".to_string()), Just("-Q1".to_string()), Just("-Q2".to_string()),
            Just(" = ".to_string()), Just(":".to_string()), Just("**".to_string()),
            "[0-9.+-]{0,6}", "[ a-z\n]{0,5}",
        ], 0..20),
        q in query(),
    ) {
        let text: String = junk.concat();
        let _ = parse_response(&text, q);
    }

    #[test]
    fn last_marker_wins(a in 0u32..=100, b in 0u32..=100, c in 0u32..=100, d in 0u32..=100) {
        let text = format!("Draft: RESPONSE-Q1 = {a}, RESPONSE-Q2 = {b}.\nFinal:\nRESPONSE-Q1 = {c}\nRESPONSE-Q2 = {d}");
        prop_assert_eq!(
            parse_response(&text, Query::Payoff),
            ParseOutcome::Ok(Answer::Payoff { q1: c as f64, q2: d as f64 })
        );
    }

    #[test]
    fn out_of_range_is_never_clamped(v in 101u32..100_000) {
        prop_assert_eq!(parse_response(&format!("RESPONSE = {v}"), Query::Funness), ParseOutcome::Failed(FailureReason::OutOfRange));
    }

    /// Replies that lead with the answer survive the filter; replies with
    /// more prose than the budget ahead of the first marker are filtered.
    #[test]
    fn filter_is_sound(prose in "[a-zA-Z ,.]{0,120}", v in 0u32..=100) {
        let text = format!("{prose}\nRESPONSE = {v}");
        let filtered = apply_direct_filter(direct_record(&text, Query::Funness), DEFAULT_PROSE_BUDGET);
        let count = prose.chars().filter(|c| !c.is_whitespace()).count();
        if count > DEFAULT_PROSE_BUDGET {
            prop_assert_eq!(filtered.parse, ParseOutcome::Filtered);
        } else {
            prop_assert_eq!(filtered.parse, ParseOutcome::Ok(Answer::Funness { rating: v as f64 }));
        }
    }

    #[test]
    fn filter_never_rescues_a_failed_parse(text in ".{0,200}") {
        let record = direct_record(&text, Query::Payoff);
        let before = record.parse.clone();
        let after = apply_direct_filter(record, DEFAULT_PROSE_BUDGET).parse;
        if !matches!(before, ParseOutcome::Ok(_)) {
            prop_assert_eq!(after, before);
        }
    }

    #[test]
    fn think_extraction_keeps_the_answer(trace in "[a-z ]{1,80}", v in 0u32..=100) {
        let (text, got) = extract_think(&format!("<think>{trace}</think>\nRESPONSE = {v}"));
        prop_assert_eq!(text, format!("RESPONSE = {v}"));
        prop_assert_eq!(got.as_deref(), Some(trace.trim()));
    }
}

fn median(mut xs: Vec<u64>) -> f64 {
    xs.sort_unstable();
    let n = xs.len();
    if n % 2 == 1 { xs[n / 2] as f64 } else { (xs[n / 2 - 1] + xs[n / 2]) as f64 / 2.0 }
}

#[test]
fn token_median_is_reproducible_from_stored_traces() {
    let gateway = Gateway::new(Arc::new(StubProvider::deterministic()), ProviderConfig::default()).unwrap();
    let mut records = Vec::new();
    for spec in example_games() {
        let prompt = build_prompt(&spec, Query::Payoff, PromptMode::Cot, false).unwrap();
        for rollout in 0..5 {
            let completion = gateway.complete(&prompt.system, &prompt.user, Some(rollout as u64)).unwrap();
            let k = SampleKey { evaluator_id: "stub-cot".into(), game_id: spec.game_id.clone(), query: Query::Payoff, rollout };
            records.push(TraceRecord::from_completion(k, PromptMode::Cot, completion));
        }
    }
    let live = median(records.iter().map(|r| r.reasoning_tokens.unwrap()).collect());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traces.jsonl");
    write_records(&path, &records).unwrap();
    let stored: Vec<TraceRecord> = load_records(&path).unwrap().records;
    assert_eq!(stored, records);
    let recomputed: Vec<u64> = stored.iter().map(|r| estimate_tokens(r.trace_text.as_deref().unwrap())).collect();
    assert_eq!(median(recomputed), live);
}
