//! Batch runs of an evaluator over a corpus.
//!
//! Each run appends one [`RunRecord`] per (game, rollout) to its sample log:
//! either a judgment or a failure. Keys already in the log are skipped, so an
//! interrupted run picks up where it stopped.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::agents::{agent_payoff_estimate, AgentConfig};
use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::llm::{
    build_prompt, code_trace, Answer, Gateway, Label, ParseOutcome, ProviderConfig, ProviderError, Query, SampleKey, TraceRecord,
};
use crate::metrics::{combine_payoff, Judgments};
use crate::store::{load_records, RecordWriter};

pub const DEFAULT_ROLLOUTS: u32 = 20;
pub const DEFAULT_PARALLELISM: usize = 4;

/// One judgment of one game by one evaluator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JudgmentSample {
    pub evaluator_id: String,
    pub game_id: String,
    pub query: Query,
    pub q1_win_given_not_draw: Option<f64>,
    pub q2_draw: Option<f64>,
    pub funness: Option<f64>,
    pub payoff: Option<f64>,
    pub rollout_index: u32,
    pub reasoning_tokens: Option<u64>,
    /// Outcome of every simulated game, for agent evaluators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_game_payoffs: Option<Vec<i8>>,
}

impl JudgmentSample {
    pub(crate) fn empty(evaluator_id: String, game_id: String, query: Query, rollout_index: u32) -> JudgmentSample {
        JudgmentSample {
            evaluator_id,
            game_id,
            query,
            q1_win_given_not_draw: None,
            q2_draw: None,
            funness: None,
            payoff: None,
            rollout_index,
            reasoning_tokens: None,
            per_game_payoffs: None,
        }
    }

    pub fn from_answer(key: &SampleKey, answer: Answer, reasoning_tokens: Option<u64>) -> Result<JudgmentSample> {
        let mut s = JudgmentSample::empty(key.evaluator_id.clone(), key.game_id.clone(), key.query, key.rollout);
        s.reasoning_tokens = reasoning_tokens;
        match (key.query, answer) {
            (Query::Payoff, Answer::Payoff { q1, q2 }) => {
                s.q1_win_given_not_draw = Some(q1);
                s.q2_draw = Some(q2);
                s.payoff = Some(combine_payoff(q1, q2)?);
            }
            (Query::Funness, Answer::Funness { rating }) => s.funness = Some(rating),
            (q, a) => return Err(Error::Data(format!("{q} sample cannot hold answer {a:?}"))),
        }
        Ok(s)
    }

    /// The judged quantity: payoff or funness rating.
    pub fn value(&self) -> Option<f64> {
        match self.query {
            Query::Payoff => self.payoff,
            Query::Funness => self.funness,
        }
    }

    pub fn key(&self) -> SampleKey {
        SampleKey {
            evaluator_id: self.evaluator_id.clone(),
            game_id: self.game_id.clone(),
            query: self.query,
            rollout: self.rollout_index,
        }
    }
}

/// One line of a run's sample log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunRecord {
    Sample {
        sample: JudgmentSample,
        #[serde(default)]
        trace: Option<TraceRecord>,
    },
    Failure {
        key: SampleKey,
        reason: String,
        #[serde(default)]
        trace: Option<TraceRecord>,
    },
}

impl RunRecord {
    pub fn key(&self) -> SampleKey {
        match self {
            RunRecord::Sample { sample, .. } => sample.key(),
            RunRecord::Failure { key, .. } => key.clone(),
        }
    }

    pub fn trace(&self) -> Option<&TraceRecord> {
        match self {
            RunRecord::Sample { trace, .. } | RunRecord::Failure { trace, .. } => trace.as_ref(),
        }
    }

    pub fn sample(&self) -> Option<&JudgmentSample> {
        match self {
            RunRecord::Sample { sample, .. } => Some(sample),
            RunRecord::Failure { .. } => None,
        }
    }
}

/// Serializable description of an evaluator, kept in the run manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EvaluatorConfig {
    Agents { p1: AgentConfig, p2: AgentConfig, n_games: u32 },
    Llm { provider: ProviderConfig },
}

pub enum Evaluator<'a> {
    /// Self-play between two agents; one sample per game.
    Agents { id: String, p1: AgentConfig, p2: AgentConfig, n_games: u32 },
    Llm { id: String, gateway: &'a Gateway },
}

impl Evaluator<'_> {
    pub fn id(&self) -> &str {
        match self {
            Evaluator::Agents { id, .. } | Evaluator::Llm { id, .. } => id,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub query: Query,
    pub rollouts: u32,
    pub seed: u64,
    pub parallelism: usize,
    /// Extra attempts for a reply that cannot be parsed.
    pub parse_retries: u32,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { query: Query::Payoff, rollouts: DEFAULT_ROLLOUTS, seed: 0, parallelism: DEFAULT_PARALLELISM, parse_retries: 1 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub planned: usize,
    pub skipped: usize,
    pub samples: usize,
    pub failures: usize,
    pub calls: u64,
    pub interrupted: bool,
}

/// Files of one run under the data directory.
#[derive(Clone, Debug, PartialEq)]
pub struct RunPaths {
    pub dir: PathBuf,
}

impl RunPaths {
    pub fn new(data_dir: &Path, run_id: &str) -> RunPaths {
        RunPaths { dir: data_dir.join("runs").join(run_id) }
    }

    pub fn manifest(&self) -> PathBuf {
        self.dir.join("manifest.json")
    }

    pub fn samples(&self) -> PathBuf {
        self.dir.join("samples.jsonl")
    }

    pub fn codes(&self) -> PathBuf {
        self.dir.join("codes.jsonl")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub evaluator_id: String,
    pub evaluator: EvaluatorConfig,
    pub corpus_path: Option<PathBuf>,
    pub query: Query,
    pub rollouts: u32,
    pub seed: u64,
    pub parallelism: usize,
}

impl RunManifest {
    /// Writes the manifest, or checks that an existing one describes the
    /// same run. Parallelism may change between resumes.
    pub fn write_or_check(&self, path: &Path) -> Result<()> {
        if path.exists() {
            let old = RunManifest::read(path)?;
            let same = RunManifest { parallelism: self.parallelism, ..old.clone() };
            if &same != self {
                return Err(Error::Config(format!(
                    "{} describes a different run; choose a new run id",
                    path.display()
                )));
            }
            return Ok(());
        }
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<RunManifest> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn load_run(log: &Path) -> Result<Vec<RunRecord>> {
    Ok(load_records(log)?.records)
}

/// Judgment values grouped by game.
pub fn judgments_by_game<'a>(samples: impl IntoIterator<Item = &'a JudgmentSample>) -> Judgments {
    let mut out = Judgments::new();
    for s in samples {
        if let Some(v) = s.value() {
            out.entry(s.game_id.clone()).or_default().push(v);
        }
    }
    out
}

fn rollout_seed(seed: u64, game_id: &str, rollout: u32) -> u64 {
    let mut bytes = seed.to_le_bytes().to_vec();
    bytes.extend_from_slice(game_id.as_bytes());
    bytes.push(0);
    bytes.extend_from_slice(&rollout.to_le_bytes());
    crate::fnv1a(&bytes)
}

/// Runs `evaluator` over `corpus`, appending to `log`. Agent evaluators
/// produce one sample per game from `n_games` self-play games and ignore
/// `rollouts`. Setting `cancel` stops new work; tasks already started are
/// finished and written first.
pub fn run_evaluator(
    corpus: &[GameSpec],
    evaluator: &Evaluator<'_>,
    options: &RunOptions,
    log: &Path,
    cancel: &AtomicBool,
) -> Result<RunSummary> {
    if corpus.is_empty() {
        return Err(Error::Config("corpus is empty".into()));
    }
    if options.rollouts == 0 {
        return Err(Error::Config("rollouts must be at least 1".into()));
    }
    if options.parallelism == 0 {
        return Err(Error::Config("parallelism must be at least 1".into()));
    }
    let rollouts = match evaluator {
        Evaluator::Agents { .. } if options.query == Query::Funness => {
            return Err(Error::Config("agent evaluators only answer the payoff query".into()));
        }
        Evaluator::Agents { .. } => 1,
        Evaluator::Llm { .. } => options.rollouts,
    };
    let done: BTreeSet<SampleKey> = load_run(log)?.iter().map(RunRecord::key).collect();
    let mut tasks = Vec::new();
    let mut summary = RunSummary::default();
    for spec in corpus {
        for rollout in 0..rollouts {
            summary.planned += 1;
            let key = SampleKey { evaluator_id: evaluator.id().to_string(), game_id: spec.game_id.clone(), query: options.query, rollout };
            if done.contains(&key) {
                summary.skipped += 1;
            } else {
                tasks.push((spec, key));
            }
        }
    }
    if tasks.is_empty() {
        return Ok(summary);
    }
    let mut writer = RecordWriter::open(log)?;
    match evaluator {
        Evaluator::Agents { p1, p2, n_games, .. } => {
            for (spec, key) in tasks {
                if cancel.load(Ordering::SeqCst) {
                    summary.interrupted = true;
                    break;
                }
                let est = agent_payoff_estimate(spec, p1, p2, *n_games, rollout_seed(options.seed, &key.game_id, 0))?;
                let decided = est.p_win + est.p_loss;
                let q1 = if est.p_draw < 1.0 { 100.0 * est.p_win / decided } else { 50.0 };
                let q2 = 100.0 * est.p_draw;
                let mut sample = JudgmentSample::from_answer(&key, Answer::Payoff { q1: q1.clamp(0.0, 100.0), q2 }, None)?;
                sample.per_game_payoffs = Some(est.per_game_payoffs);
                writer.append(&RunRecord::Sample { sample, trace: None })?;
                summary.samples += 1;
            }
        }
        Evaluator::Llm { gateway, .. } => run_llm(&tasks, gateway, options, writer, cancel, &mut summary)?,
    }
    Ok(summary)
}

fn run_llm(
    tasks: &[(&GameSpec, SampleKey)],
    gateway: &Gateway,
    options: &RunOptions,
    writer: RecordWriter,
    cancel: &AtomicBool,
    summary: &mut RunSummary,
) -> Result<()> {
    let writer = Mutex::new(writer);
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let abort: Mutex<Option<Error>> = Mutex::new(None);
    let (samples, failures, calls) = (AtomicUsize::new(0), AtomicUsize::new(0), AtomicU64::new(0));
    let fail = |e: Error| {
        stop.store(true, Ordering::SeqCst);
        abort.lock().expect("abort lock").get_or_insert(e);
    };
    std::thread::scope(|s| {
        for _ in 0..options.parallelism.min(tasks.len()) {
            s.spawn(|| loop {
                if cancel.load(Ordering::SeqCst) || stop.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((spec, key)) = tasks.get(i) else { break };
                let record = match llm_task(spec, key, gateway, options, &calls) {
                    Ok(r) => r,
                    Err(e) => {
                        fail(e);
                        break;
                    }
                };
                let counter = if matches!(record, RunRecord::Sample { .. }) { &samples } else { &failures };
                if let Err(e) = writer.lock().expect("writer lock").append(&record) {
                    fail(e);
                    break;
                }
                counter.fetch_add(1, Ordering::SeqCst);
            });
        }
    });
    summary.samples += samples.into_inner();
    summary.failures += failures.into_inner();
    summary.calls += calls.into_inner();
    if let Some(e) = abort.into_inner().expect("abort lock") {
        return Err(e);
    }
    summary.interrupted = next.load(Ordering::SeqCst) < tasks.len();
    Ok(())
}

fn llm_task(spec: &GameSpec, key: &SampleKey, gateway: &Gateway, options: &RunOptions, calls: &AtomicU64) -> Result<RunRecord> {
    let config = gateway.config();
    let prompt = build_prompt(spec, key.query, config.prompt_mode, config.r1_inline_system)?;
    let seed = rollout_seed(options.seed, &key.game_id, key.rollout);
    let mut attempt = 0;
    loop {
        calls.fetch_add(1, Ordering::SeqCst);
        let completion = match gateway.complete(&prompt.system, &prompt.user, Some(seed.wrapping_add(attempt as u64))) {
            Ok(c) => c,
            Err(e @ (ProviderError::Auth(_) | ProviderError::Fatal(_))) => return Err(e.into()),
            Err(e) => {
                log::warn!("{} {} rollout {}: {e}", key.evaluator_id, key.game_id, key.rollout);
                return Ok(RunRecord::Failure { key: key.clone(), reason: format!("provider: {e}"), trace: None });
            }
        };
        let trace = TraceRecord::from_completion(key.clone(), config.prompt_mode, completion);
        match trace.parse.clone() {
            ParseOutcome::Ok(answer) => {
                let sample = JudgmentSample::from_answer(key, answer, trace.reasoning_tokens)?;
                return Ok(RunRecord::Sample { sample, trace: Some(trace) });
            }
            ParseOutcome::Failed(reason) if attempt < options.parse_retries => {
                log::debug!("{} {} rollout {}: {reason}; retrying", key.evaluator_id, key.game_id, key.rollout);
                attempt += 1;
            }
            outcome => {
                let reason = match outcome {
                    ParseOutcome::Failed(r) => r.to_string(),
                    _ => "filtered".to_string(),
                };
                log::warn!("{} {} rollout {}: {reason}", key.evaluator_id, key.game_id, key.rollout);
                return Ok(RunRecord::Failure { key: key.clone(), reason, trace: Some(trace) });
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CodeSummary {
    pub coded: usize,
    pub skipped: usize,
    pub without_trace: usize,
    pub calls: u64,
    pub interrupted: bool,
}

/// Codes every trace in `records` for each of `labels`, appending coded
/// traces to `codes_log`. Traces already coded there are skipped.
pub fn code_run(
    records: &[RunRecord],
    coder: &Gateway,
    labels: &[Label],
    codes_log: &Path,
    cancel: &AtomicBool,
) -> Result<CodeSummary> {
    let done: BTreeSet<SampleKey> = load_records::<TraceRecord>(codes_log)?.records.into_iter().map(|r| r.key).collect();
    let mut writer = RecordWriter::open(codes_log)?;
    let mut summary = CodeSummary::default();
    for trace in records.iter().filter_map(RunRecord::trace) {
        let Some(text) = trace.trace_text.as_deref().filter(|t| !t.trim().is_empty()) else {
            summary.without_trace += 1;
            continue;
        };
        if done.contains(&trace.key) {
            summary.skipped += 1;
            continue;
        }
        if cancel.load(Ordering::SeqCst) {
            summary.interrupted = true;
            break;
        }
        let mut coded = trace.clone();
        coded.coder_labels = BTreeMap::new();
        for &label in labels {
            summary.calls += 1;
            coded.coder_labels.insert(label, code_trace(coder, text, label)?);
        }
        writer.append(&coded)?;
        summary.coded += 1;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::agents::AgentKind;
    use crate::llm::{PromptMode, StubProvider};

    fn stub_gateway(provider: StubProvider) -> (Arc<StubProvider>, Gateway) {
        let provider = Arc::new(provider);
        let config = ProviderConfig { provider_id: "stub".into(), model_name: "stub".into(), ..Default::default() };
        let gateway = Gateway::new(provider.clone(), config).unwrap();
        (provider, gateway)
    }

    #[test]
    fn agent_pair_gives_one_sample_per_game() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("s.jsonl");
        let ev = Evaluator::Agents {
            id: "random".into(),
            p1: AgentConfig::new(AgentKind::Random),
            p2: AgentConfig::new(AgentKind::Random),
            n_games: 50,
        };
        let opts = RunOptions { rollouts: 20, ..Default::default() };
        let summary = run_evaluator(&[GameSpec::tic_tac_toe()], &ev, &opts, &log, &AtomicBool::new(false)).unwrap();
        assert_eq!(summary.samples, 1);
        let records = load_run(&log).unwrap();
        let s = records[0].sample().unwrap();
        let payoffs = s.per_game_payoffs.as_ref().unwrap();
        assert_eq!(payoffs.len(), 50);
        let mean = payoffs.iter().map(|&p| p as f64).sum::<f64>() / 50.0;
        assert!((s.payoff.unwrap() - mean).abs() < 1e-9);
    }

    #[test]
    fn agents_reject_funness() {
        let ev = Evaluator::Agents {
            id: "a".into(),
            p1: AgentConfig::new(AgentKind::Random),
            p2: AgentConfig::new(AgentKind::Random),
            n_games: 1,
        };
        let opts = RunOptions { query: Query::Funness, ..Default::default() };
        let err = run_evaluator(&[GameSpec::tic_tac_toe()], &ev, &opts, Path::new("/nonexistent/x"), &AtomicBool::new(false));
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn unparseable_reply_is_retried_once_then_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("s.jsonl");
        let (provider, gateway) = stub_gateway(StubProvider::canned("no idea"));
        let ev = Evaluator::Llm { id: "stub".into(), gateway: &gateway };
        let opts = RunOptions { rollouts: 3, ..Default::default() };
        let summary = run_evaluator(&[GameSpec::tic_tac_toe()], &ev, &opts, &log, &AtomicBool::new(false)).unwrap();
        assert_eq!((summary.samples, summary.failures), (0, 3));
        assert_eq!(provider.calls(), 6);
        let records = load_run(&log).unwrap();
        assert!(matches!(&records[0], RunRecord::Failure { reason, .. } if reason == "missing_marker"));
    }

    #[test]
    fn auth_errors_abort() {
        let dir = tempfile::tempdir().unwrap();
        let (provider, gateway) = stub_gateway(StubProvider::new(|_| Err(ProviderError::Auth("bad key".into()))));
        let ev = Evaluator::Llm { id: "stub".into(), gateway: &gateway };
        let err = run_evaluator(&[GameSpec::tic_tac_toe()], &ev, &RunOptions::default(), &dir.path().join("s"), &AtomicBool::new(false));
        assert!(matches!(err, Err(Error::Provider(ProviderError::Auth(_)))));
        assert!(provider.calls() <= DEFAULT_PARALLELISM as u64);
    }

    #[test]
    fn direct_mode_prose_is_filtered() {
        let dir = tempfile::tempdir().unwrap();
        let provider = Arc::new(StubProvider::canned(
            "The first player moves first and can take the centre, which is strong. RESPONSE-Q1 = 60 and RESPONSE-Q2 = 50",
        ));
        let config = ProviderConfig { prompt_mode: PromptMode::Direct, ..Default::default() };
        let gateway = Gateway::new(provider, config).unwrap();
        let ev = Evaluator::Llm { id: "d".into(), gateway: &gateway };
        let opts = RunOptions { rollouts: 1, ..Default::default() };
        let log = dir.path().join("s");
        run_evaluator(&[GameSpec::tic_tac_toe()], &ev, &opts, &log, &AtomicBool::new(false)).unwrap();
        assert!(matches!(&load_run(&log).unwrap()[0], RunRecord::Failure { reason, .. } if reason == "filtered"));
    }

    #[test]
    fn record_round_trip() {
        let key = SampleKey { evaluator_id: "e".into(), game_id: "g".into(), query: Query::Payoff, rollout: 2 };
        let sample = JudgmentSample::from_answer(&key, Answer::Payoff { q1: 60.0, q2: 50.0 }, Some(7)).unwrap();
        let rec = RunRecord::Sample { sample, trace: None };
        let text = serde_json::to_string(&rec).unwrap();
        assert_eq!(serde_json::from_str::<RunRecord>(&text).unwrap(), rec);
    }

    #[test]
    fn manifest_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = RunManifest {
            run_id: "r".into(),
            evaluator_id: "e".into(),
            evaluator: EvaluatorConfig::Llm { provider: ProviderConfig::default() },
            corpus_path: None,
            query: Query::Payoff,
            rollouts: 20,
            seed: 1,
            parallelism: 4,
        };
        m.write_or_check(&path).unwrap();
        RunManifest { parallelism: 1, ..m.clone() }.write_or_check(&path).unwrap();
        assert!(RunManifest { seed: 2, ..m }.write_or_check(&path).is_err());
    }
}
