use std::collections::BTreeSet;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use gameeval::corpus::{example_games, CategoryTemplate};
use gameeval::game::{Board, Category, GameSpec};
use gameeval::harness::{load_run, run_evaluator, Evaluator, RunOptions, RunRecord};
use gameeval::llm::{Gateway, Provider, ProviderConfig, ProviderError, Query, RawCompletion, StubProvider};
use gameeval::metrics::combine_payoff;

fn two_games() -> Vec<GameSpec> {
    vec![GameSpec::tic_tac_toe(), CategoryTemplate::standard(Category::KInARowLoses).instantiate(Board::square(4), 3)]
}

fn gateway(provider: Arc<StubProvider>) -> Gateway {
    let config = ProviderConfig { max_retries: 1, initial_backoff_ms: 1, ..Default::default() };
    Gateway::new(provider, config).unwrap()
}

fn keys(records: &[RunRecord]) -> BTreeSet<(String, u32)> {
    records.iter().map(|r| r.key()).map(|k| (k.game_id, k.rollout)).collect()
}

#[test]
fn resume_after_interrupt_makes_only_the_missing_calls() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("samples.jsonl");
    let corpus = two_games();
    let opts = RunOptions { rollouts: 20, parallelism: 1, ..Default::default() };

    let cancel = Arc::new(AtomicBool::new(false));
    let trip = cancel.clone();
    let inner = StubProvider::deterministic();
    let counter = Arc::new(AtomicU64::new(0));
    let seen = counter.clone();
    let provider = Arc::new(StubProvider::new(move |req| {
        if seen.fetch_add(1, Ordering::SeqCst) + 1 == 25 {
            trip.store(true, Ordering::SeqCst);
        }
        inner.send(&ProviderConfig::default(), req)
    }));
    let gw = gateway(provider.clone());
    let ev = Evaluator::Llm { id: "stub-cot".into(), gateway: &gw };
    let first = run_evaluator(&corpus, &ev, &opts, &log, &cancel).unwrap();
    assert!(first.interrupted);
    assert_eq!((first.samples, provider.calls()), (25, 25));
    assert_eq!(load_run(&log).unwrap().len(), 25);

    let resumed = Arc::new(StubProvider::deterministic());
    let gw = gateway(resumed.clone());
    let ev = Evaluator::Llm { id: "stub-cot".into(), gateway: &gw };
    let second = run_evaluator(&corpus, &ev, &opts, &log, &AtomicBool::new(false)).unwrap();
    assert!(!second.interrupted);
    assert_eq!((second.skipped, second.samples, resumed.calls()), (25, 15, 15));
    let records = load_run(&log).unwrap();
    assert_eq!(records.len(), 40);
    assert_eq!(keys(&records).len(), 40);

    // An uninterrupted run over the same plan gives the same samples.
    let fresh_log = dir.path().join("fresh.jsonl");
    let gw = gateway(Arc::new(StubProvider::deterministic()));
    let ev = Evaluator::Llm { id: "stub-cot".into(), gateway: &gw };
    run_evaluator(&corpus, &ev, &opts, &fresh_log, &AtomicBool::new(false)).unwrap();
    let mut a: Vec<_> = records.iter().map(|r| (r.key(), r.sample().cloned())).collect();
    let mut b: Vec<_> = load_run(&fresh_log).unwrap().iter().map(|r| (r.key(), r.sample().cloned())).collect();
    a.sort_by(|x, y| x.0.cmp(&y.0));
    b.sort_by(|x, y| x.0.cmp(&y.0));
    assert_eq!(a, b);
}

#[test]
fn rerunning_a_complete_run_calls_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("samples.jsonl");
    let opts = RunOptions { rollouts: 3, ..Default::default() };
    let provider = Arc::new(StubProvider::deterministic());
    let gw = gateway(provider.clone());
    let ev = Evaluator::Llm { id: "stub-cot".into(), gateway: &gw };
    run_evaluator(&example_games(), &ev, &opts, &log, &AtomicBool::new(false)).unwrap();
    let calls = provider.calls();
    let again = run_evaluator(&example_games(), &ev, &opts, &log, &AtomicBool::new(false)).unwrap();
    assert_eq!(provider.calls(), calls);
    assert_eq!((again.planned, again.skipped, again.calls), (36, 36, 0));
}

#[test]
fn flaky_provider_accounting_adds_up() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("samples.jsonl");
    let n = Arc::new(AtomicU64::new(0));
    let seen = n.clone();
    let provider = Arc::new(StubProvider::new(move |_| match seen.fetch_add(1, Ordering::SeqCst) % 5 {
        0 | 1 => Err(ProviderError::Transient("503".into())),
        2 => Ok(RawCompletion::text("I cannot say.")),
        _ => Ok(RawCompletion::text("RESPONSE-Q1 = 50\nRESPONSE-Q2 = 10")),
    }));
    let gw = gateway(provider.clone());
    let ev = Evaluator::Llm { id: "flaky".into(), gateway: &gw };
    let opts = RunOptions { rollouts: 10, parallelism: 3, ..Default::default() };
    let s = run_evaluator(&two_games(), &ev, &opts, &log, &AtomicBool::new(false)).unwrap();
    assert_eq!(s.planned, 20);
    assert_eq!(s.samples + s.failures, 20);
    assert!(s.failures > 0 && s.samples > 0);
    let records = load_run(&log).unwrap();
    assert_eq!(records.len(), 20);
    assert_eq!(records.iter().filter(|r| r.sample().is_some()).count(), s.samples);
    for r in &records {
        if let RunRecord::Failure { reason, .. } = r {
            assert!(reason.starts_with("provider: ") || reason == "missing_marker", "{reason}");
        }
    }
    assert_eq!(provider.calls(), n.load(Ordering::SeqCst));
}

#[test]
fn stored_payoff_is_bit_identical_to_the_combination() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("samples.jsonl");
    let gw = gateway(Arc::new(StubProvider::deterministic()));
    let ev = Evaluator::Llm { id: "stub-cot".into(), gateway: &gw };
    let opts = RunOptions { rollouts: 5, ..Default::default() };
    run_evaluator(&example_games(), &ev, &opts, &log, &AtomicBool::new(false)).unwrap();
    let records = load_run(&log).unwrap();
    assert_eq!(records.len(), 60);
    for s in records.iter().filter_map(RunRecord::sample) {
        assert_eq!(s.query, Query::Payoff);
        let want = combine_payoff(s.q1_win_given_not_draw.unwrap(), s.q2_draw.unwrap()).unwrap();
        assert_eq!(s.payoff.unwrap().to_bits(), want.to_bits());
    }
}
