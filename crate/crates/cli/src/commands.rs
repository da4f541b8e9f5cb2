use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use gameeval::agents::{AgentConfig, AgentKind};
use gameeval::corpus::{example_games, generate_corpus, read_corpus, write_corpus, CategoryTemplate};
use gameeval::game::{Category, GameSpec};
use gameeval::harness::{
    code_run, judgments_by_game, load_run, run_evaluator, Evaluator, EvaluatorConfig, RunManifest, RunOptions, RunPaths, RunRecord,
    RunSummary,
};
use gameeval::llm::{
    aggregate_codes, build_prompt, CodeGroup, Gateway, Label, OpenAiCompatible, PromptMode, Provider, Query, SampleKey, StubProvider,
    TraceRecord,
};
use gameeval::metrics::{evaluate, evaluate_grouped, mean, write_reports, Judgments, Metric};
use gameeval::solver::{game_theoretic_payoff, MctsEstimateConfig, SolveRecord, SolverPolicy};
use gameeval::store::{self, ingest_human_judgments, load_records, write_records};
use gameeval::{Error, Result};

use crate::config::Config;
use crate::{
    AgentArg, Cli, CodeTracesArgs, Command, CompareArgs, CorpusGenArgs, GroupArg, LlmRunArgs, MetricArg, ModeArg, QueryArg, ReportArgs,
    SimulateArgs, SolveArgs, CANCEL,
};

pub fn run(cli: Cli) -> Result<()> {
    let config = Config::load(cli.config.as_deref())?;
    let data_dir = cli.data_dir.clone().or_else(|| config.data_dir.clone()).unwrap_or_else(store::data_dir);
    match cli.command {
        Command::CorpusGen(args) => corpus_gen(&config, args),
        Command::Solve(args) => solve(&config, &data_dir, args),
        Command::Simulate(args) => simulate(&config, &data_dir, args),
        Command::LlmRun(args) => llm_run(&config, &data_dir, args),
        Command::CodeTraces(args) => code_traces(&config, &data_dir, args),
        Command::Compare(args) => compare(&config, &data_dir, args),
        Command::Report(args) => report(&data_dir, args),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        None => Ok(Box::new(io::stdout().lock())),
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            Ok(Box::new(File::create(p).map_err(|e| Error::io(p, e))?))
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(format!("writing table: {e}"))
}

fn absolute(path: &Path) -> PathBuf {
    fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf())
}

fn query(q: QueryArg) -> Query {
    match q {
        QueryArg::Payoff => Query::Payoff,
        QueryArg::Funness => Query::Funness,
    }
}

fn corpus_gen(config: &Config, args: CorpusGenArgs) -> Result<()> {
    let corpus = if args.examples_only {
        example_games()
    } else {
        let templates = if args.categories.is_empty() {
            CategoryTemplate::all_standard()
        } else {
            args.categories
                .iter()
                .map(|l| {
                    Category::from_label(l)
                        .map(CategoryTemplate::standard)
                        .ok_or_else(|| Error::Config(format!("unknown category {l:?}")))
                })
                .collect::<Result<_>>()?
        };
        let count = args.count.unwrap_or(config.corpus.count_per_category);
        generate_corpus(&templates, count, args.seed.unwrap_or(config.corpus.seed))?
    };
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_corpus(&args.out, &corpus)?;
    println!("wrote {} games to {}", corpus.len(), args.out.display());
    Ok(())
}

fn solve(config: &Config, data_dir: &Path, args: SolveArgs) -> Result<()> {
    let corpus = read_corpus(&args.corpus)?;
    let s = &config.solver;
    let mut mcts = MctsEstimateConfig::with_iterations(args.mcts_iterations.unwrap_or(s.mcts_iterations));
    mcts.seed = args.seed.unwrap_or(s.seed);
    let policy = SolverPolicy {
        node_budget: args.budget.unwrap_or(s.node_budget),
        exact_max_cells: args.exact_max_cells.unwrap_or(s.exact_max_cells),
        mcts: (s.mcts_fallback && !args.no_mcts).then_some(mcts),
    };
    let out = args.out.unwrap_or_else(|| data_dir.join("solutions.jsonl"));
    let mut table = csv::Writer::from_writer(io::stdout().lock());
    table.write_record(["game_id", "value", "method", "nodes_or_iterations"]).map_err(csv_err)?;
    let mut records = Vec::new();
    for spec in &corpus {
        if CANCEL.load(std::sync::atomic::Ordering::SeqCst) {
            return Err(Error::Interrupted);
        }
        let r = game_theoretic_payoff(spec, &policy)?;
        let value = r.value.map(|v| v.to_string()).unwrap_or_default();
        let method = serde_plain(&r.method);
        table.write_record([&r.game_id, &value, &method, &r.nodes_or_iterations.to_string()]).map_err(csv_err)?;
        table.flush().map_err(|e| Error::Data(e.to_string()))?;
        records.push(r);
    }
    write_records(&out, &records)?;
    eprintln!("wrote {} solutions to {}", records.len(), out.display());
    Ok(())
}

/// A unit enum variant's serde name.
fn serde_plain<T: serde::Serialize>(v: &T) -> String {
    match toml::Value::try_from(v) {
        Ok(toml::Value::String(s)) => s,
        _ => String::new(),
    }
}

fn finish(run_id: &str, summary: &RunSummary) -> Result<()> {
    println!(
        "run {run_id}: {} new samples, {} failures, {} already done, {} calls",
        summary.samples, summary.failures, summary.skipped, summary.calls
    );
    if summary.interrupted {
        eprintln!("run {run_id} interrupted; run the same command again to resume");
        return Err(Error::Interrupted);
    }
    Ok(())
}

fn simulate(config: &Config, data_dir: &Path, args: SimulateArgs) -> Result<()> {
    let corpus = read_corpus(&args.corpus)?;
    let kind = |a: AgentArg| match a {
        AgentArg::Random => AgentKind::Random,
        AgentArg::Intuitive => AgentKind::Intuitive,
        AgentArg::Expert => AgentKind::Expert,
        AgentArg::Mcts => AgentKind::Mcts,
    };
    let p1 = AgentConfig { kind: kind(args.p1), ..config.simulate.agent };
    let p2 = AgentConfig { kind: kind(args.p2.unwrap_or(args.p1)), ..config.simulate.agent };
    let run_id = args.run_id.unwrap_or_else(|| {
        if p1.kind == p2.kind {
            p1.kind.name().to_string()
        } else {
            format!("{}-vs-{}", p1.kind.name(), p2.kind.name())
        }
    });
    let n_games = args.n_games.unwrap_or(config.simulate.n_games);
    let seed = args.seed.unwrap_or(config.simulate.seed);
    let paths = RunPaths::new(data_dir, &run_id);
    let manifest = RunManifest {
        run_id: run_id.clone(),
        evaluator_id: run_id.clone(),
        evaluator: EvaluatorConfig::Agents { p1, p2, n_games },
        corpus_path: Some(absolute(&args.corpus)),
        query: Query::Payoff,
        rollouts: 1,
        seed,
        parallelism: 1,
    };
    manifest.write_or_check(&paths.manifest())?;
    let evaluator = Evaluator::Agents { id: run_id.clone(), p1, p2, n_games };
    let options = RunOptions { query: Query::Payoff, rollouts: 1, seed, parallelism: 1, parse_retries: 0 };
    let summary = run_evaluator(&corpus, &evaluator, &options, &paths.samples(), &CANCEL)?;
    finish(&run_id, &summary)
}

fn backend(provider_id: &str, timeout_secs: u64) -> Result<Arc<dyn Provider>> {
    if provider_id == "stub" {
        return Ok(Arc::new(StubProvider::deterministic()));
    }
    Ok(Arc::new(OpenAiCompatible::new(Duration::from_secs(timeout_secs))?))
}

fn llm_run(config: &Config, data_dir: &Path, args: LlmRunArgs) -> Result<()> {
    let corpus = read_corpus(&args.corpus)?;
    let mut provider = config.llm.provider.clone();
    if let Some(p) = args.provider_id {
        provider.provider_id = p;
    }
    if let Some(m) = args.model {
        provider.model_name = m;
        if !config.llm_temperature_set {
            provider.temperature = gameeval::llm::ProviderConfig::default_temperature(&provider.model_name);
        }
    }
    if let Some(m) = args.prompt_mode {
        provider.prompt_mode = match m {
            ModeArg::Direct => PromptMode::Direct,
            ModeArg::Cot => PromptMode::Cot,
            ModeArg::Reasoning => PromptMode::Reasoning,
        };
    }
    provider.validate()?;
    let query = query(args.query);
    let options = RunOptions {
        query,
        rollouts: args.rollouts.unwrap_or(config.llm.rollouts),
        seed: args.seed.unwrap_or(config.llm.seed),
        parallelism: args.parallelism.unwrap_or(config.llm.parallelism),
        parse_retries: config.llm.parse_retries,
    };
    let evaluator_id = format!("{}-{}", provider.model_name, serde_plain(&provider.prompt_mode));
    let run_id = args.run_id.unwrap_or_else(|| format!("{evaluator_id}-{query}"));
    let paths = RunPaths::new(data_dir, &run_id);

    if args.dry_run {
        let done: BTreeSet<SampleKey> = load_run(&paths.samples())?.iter().map(RunRecord::key).collect();
        let mut planned = 0;
        let mut out = io::stdout().lock();
        let io_err = |e: io::Error| Error::Data(format!("writing prompts: {e}"));
        for spec in &corpus {
            let prompt = build_prompt(spec, query, provider.prompt_mode, provider.r1_inline_system)?;
            writeln!(out, "=== {} ===", spec.game_id).map_err(io_err)?;
            if !prompt.system.is_empty() {
                writeln!(out, "--- system ---\n{}", prompt.system).map_err(io_err)?;
            }
            writeln!(out, "--- user ---\n{}", prompt.user).map_err(io_err)?;
            planned += (0..options.rollouts)
                .filter(|&rollout| {
                    let key = SampleKey { evaluator_id: evaluator_id.clone(), game_id: spec.game_id.clone(), query, rollout };
                    !done.contains(&key)
                })
                .count();
        }
        writeln!(out, "planned calls: {planned} (at most {} with parse retries)", planned * (1 + options.parse_retries as usize))
            .map_err(io_err)?;
        return Ok(());
    }

    let manifest = RunManifest {
        run_id: run_id.clone(),
        evaluator_id: evaluator_id.clone(),
        evaluator: EvaluatorConfig::Llm { provider: provider.clone() },
        corpus_path: Some(absolute(&args.corpus)),
        query,
        rollouts: options.rollouts,
        seed: options.seed,
        parallelism: options.parallelism,
    };
    manifest.write_or_check(&paths.manifest())?;
    let gateway = Gateway::new(backend(&provider.provider_id, provider.timeout_secs)?, provider)?;
    let evaluator = Evaluator::Llm { id: evaluator_id, gateway: &gateway };
    let summary = run_evaluator(&corpus, &evaluator, &options, &paths.samples(), &CANCEL)?;
    finish(&run_id, &summary)
}

fn code_traces(config: &Config, data_dir: &Path, args: CodeTracesArgs) -> Result<()> {
    let paths = RunPaths::new(data_dir, &args.run);
    let records = load_run(&paths.samples())?;
    if records.is_empty() {
        return Err(Error::Data(format!("run {} has no records", args.run)));
    }
    let labels: Vec<Label> = if args.labels.is_empty() {
        Label::ALL.to_vec()
    } else {
        args.labels
            .iter()
            .map(|l| Label::from_name(l.trim()).ok_or_else(|| Error::Config(format!("unknown label {l:?}"))))
            .collect::<Result<_>>()?
    };
    let coder = config.coder.clone();
    let gateway = Gateway::new(backend(&coder.provider_id, coder.timeout_secs)?, coder)?;
    let summary = code_run(&records, &gateway, &labels, &paths.codes(), &CANCEL)?;
    println!(
        "run {}: coded {} traces, {} already coded, {} without a trace, {} coder calls",
        args.run, summary.coded, summary.skipped, summary.without_trace, summary.calls
    );
    if summary.interrupted {
        return Err(Error::Interrupted);
    }
    Ok(())
}

enum Source {
    Human,
    Optimal,
    Run(String),
}

impl Source {
    fn parse(name: &str) -> Source {
        match name {
            "human" => Source::Human,
            "optimal" => Source::Optimal,
            id => Source::Run(id.to_string()),
        }
    }
}

fn read_manifest(data_dir: &Path, run_id: &str) -> Result<RunManifest> {
    let path = RunPaths::new(data_dir, run_id).manifest();
    if !path.exists() {
        return Err(Error::Data(format!("no run {run_id:?} under {}", data_dir.display())));
    }
    RunManifest::read(&path)
}

fn manifest_corpus(manifest: &RunManifest) -> Result<Vec<GameSpec>> {
    let path = manifest
        .corpus_path
        .as_ref()
        .ok_or_else(|| Error::Config(format!("run {} records no corpus; pass --corpus", manifest.run_id)))?;
    read_corpus(path)
}

struct CompareContext<'a> {
    data_dir: &'a Path,
    query: Query,
    corpus: Option<Vec<GameSpec>>,
    human: Option<PathBuf>,
    solutions: PathBuf,
}

impl CompareContext<'_> {
    fn judgments(&self, source: &Source) -> Result<Judgments> {
        match source {
            Source::Human => {
                let path = self.human.as_ref().ok_or_else(|| Error::Config("--human is required for the human source".into()))?;
                let corpus = self.corpus.as_ref().ok_or_else(|| Error::Config("--corpus is required for the human source".into()))?;
                let known: BTreeSet<String> = corpus.iter().map(|s| s.game_id.clone()).collect();
                let ingest = ingest_human_judgments(path, self.query, &known)?;
                if !ingest.rejections.is_empty() {
                    eprintln!("{}: rejected {} rows", path.display(), ingest.rejections.len());
                }
                Ok(judgments_by_game(&ingest.samples))
            }
            Source::Optimal => {
                if self.query != Query::Payoff {
                    return Err(Error::Config("optimal values exist only for the payoff query".into()));
                }
                if !self.solutions.exists() {
                    return Err(Error::Data(format!("{} not found; run solve first", self.solutions.display())));
                }
                let records = load_records::<SolveRecord>(&self.solutions)?.records;
                Ok(records.into_iter().filter_map(|r| r.value.map(|v| (r.game_id, vec![v as f64]))).collect())
            }
            Source::Run(id) => {
                let manifest = read_manifest(self.data_dir, id)?;
                if manifest.query != self.query {
                    return Err(Error::Config(format!("run {id} answers {}, not {}", manifest.query, self.query)));
                }
                let records = load_run(&RunPaths::new(self.data_dir, id).samples())?;
                Ok(judgments_by_game(records.iter().filter_map(RunRecord::sample)))
            }
        }
    }
}

fn compare(config: &Config, data_dir: &Path, args: CompareArgs) -> Result<()> {
    let metric = match args.metric {
        MetricArg::R2 => Metric::R2,
        MetricArg::Accuracy => Metric::Accuracy,
        MetricArg::Dev => Metric::MeanAbsDev,
        MetricArg::Wasserstein => Metric::Wasserstein,
        MetricArg::Splithalf => Metric::SplitHalf,
    };
    let candidate = Source::parse(&args.a);
    let reference = match (&args.reference, metric) {
        (Some(r), _) => Some(Source::parse(r)),
        (None, Metric::SplitHalf) => None,
        (None, _) => return Err(Error::Config(format!("--reference is required for {metric}"))),
    };
    let first_run = [Some(&candidate), reference.as_ref()].into_iter().flatten().find_map(|s| match s {
        Source::Run(id) => Some(id.clone()),
        _ => None,
    });
    let manifest = first_run.as_deref().map(|id| read_manifest(data_dir, id)).transpose()?;
    let query = match (&manifest, args.query) {
        (_, Some(q)) => query(q),
        (Some(m), None) => m.query,
        (None, None) => Query::Payoff,
    };
    let corpus = match (&args.corpus, &manifest) {
        (Some(p), _) => Some(read_corpus(p)?),
        (None, Some(m)) if m.corpus_path.is_some() => Some(manifest_corpus(m)?),
        _ => None,
    };
    let ctx = CompareContext {
        data_dir,
        query,
        corpus,
        human: args.human.clone(),
        solutions: args.solutions.clone().unwrap_or_else(|| data_dir.join("solutions.jsonl")),
    };
    let cand = ctx.judgments(&candidate)?;
    let refs = match &reference {
        Some(r) => ctx.judgments(r)?,
        None => cand.clone(),
    };
    let range = match query {
        Query::Payoff => (-1.0, 1.0),
        Query::Funness => (0.0, 100.0),
    };
    let mut params = config.metrics.params(range);
    if let Some(n) = args.n_boot {
        params.bootstrap.n_boot = n;
    }
    if let Some(s) = args.seed {
        params.bootstrap.seed = s;
    }
    let comparison_id = match &args.reference {
        Some(r) if metric != Metric::SplitHalf => format!("{}~{r}", args.a),
        _ => args.a.clone(),
    };
    let mut reports = vec![evaluate(&comparison_id, metric, &cand, &refs, &params)?];
    if args.by_category {
        let corpus = ctx.corpus.as_ref().ok_or_else(|| Error::Config("--by-category needs a corpus".into()))?;
        let group_of: BTreeMap<String, String> = corpus.iter().map(|s| (s.game_id.clone(), s.category.label().to_string())).collect();
        reports.extend(evaluate_grouped(&comparison_id, metric, &cand, &refs, &group_of, &params));
    }
    write_reports(output(args.out.as_deref())?, &reports)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn sd(xs: &[f64]) -> Option<f64> {
    (xs.len() >= 2).then(|| {
        let m = mean(xs);
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
    })
}

fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

fn report(data_dir: &Path, args: ReportArgs) -> Result<()> {
    let manifest = read_manifest(data_dir, &args.run)?;
    let paths = RunPaths::new(data_dir, &args.run);
    let corpus = match (&args.corpus, args.group_by) {
        (Some(p), _) => read_corpus(p)?,
        (None, GroupArg::Traits | GroupArg::Category) => manifest_corpus(&manifest)?,
        (None, _) => Vec::new(),
    };
    let category_of: BTreeMap<String, String> = corpus.iter().map(|s| (s.game_id.clone(), s.category.label().to_string())).collect();
    let traits_of: BTreeMap<String, u32> = corpus.iter().map(|s| (s.game_id.clone(), s.novelty_traits())).collect();
    let mut table = csv::Writer::from_writer(output(args.out.as_deref())?);

    if args.codes {
        let by = match args.group_by {
            GroupArg::Model => CodeGroup::Model,
            GroupArg::Game => CodeGroup::Game,
            GroupArg::Category => CodeGroup::Category,
            GroupArg::Traits => return Err(Error::Config("code rates group by model, game or category".into())),
        };
        let coded = load_records::<TraceRecord>(&paths.codes())?.records;
        let rates = aggregate_codes(&coded, by, &category_of)?;
        table.write_record(["group", "label", "rate", "payoff_rate", "funness_rate", "n_traces"]).map_err(csv_err)?;
        for r in rates {
            table
                .write_record([
                    r.group,
                    r.label.name().to_string(),
                    r.rate.to_string(),
                    fmt_opt(r.payoff_rate),
                    fmt_opt(r.funness_rate),
                    r.n_traces.to_string(),
                ])
                .map_err(csv_err)?;
        }
        return table.flush().map_err(|e| Error::Data(e.to_string()));
    }

    let records = load_run(&paths.samples())?;
    let group = |game_id: &str, evaluator_id: &str| -> Result<String> {
        match args.group_by {
            GroupArg::Game => Ok(game_id.to_string()),
            GroupArg::Model => Ok(evaluator_id.to_string()),
            GroupArg::Category => {
                category_of.get(game_id).cloned().ok_or_else(|| Error::Data(format!("game {game_id} is not in the corpus")))
            }
            GroupArg::Traits => traits_of
                .get(game_id)
                .map(|t| t.to_string())
                .ok_or_else(|| Error::Data(format!("game {game_id} is not in the corpus"))),
        }
    };
    let mut groups: BTreeMap<String, Vec<&RunRecord>> = BTreeMap::new();
    if args.group_by == GroupArg::Traits {
        for t in 0..=6 {
            groups.insert(t.to_string(), Vec::new());
        }
    }
    for r in &records {
        let key = r.key();
        groups.entry(group(&key.game_id, &key.evaluator_id)?).or_default().push(r);
    }

    if args.tokens {
        table.write_record(["group", "n_samples", "n_with_tokens", "mean_tokens", "median_tokens"]).map_err(csv_err)?;
        for (g, rs) in &groups {
            let samples: Vec<_> = rs.iter().filter_map(|r| r.sample()).collect();
            let tokens: Vec<f64> = samples.iter().filter_map(|s| s.reasoning_tokens.map(|t| t as f64)).collect();
            let mean_tokens = (!tokens.is_empty()).then(|| mean(&tokens));
            table
                .write_record([
                    g.clone(),
                    samples.len().to_string(),
                    tokens.len().to_string(),
                    fmt_opt(mean_tokens),
                    fmt_opt(median(&tokens)),
                ])
                .map_err(csv_err)?;
        }
    } else {
        table.write_record(["group", "n_games", "n_samples", "n_failures", "mean", "sd"]).map_err(csv_err)?;
        for (g, rs) in &groups {
            let values: Vec<f64> = rs.iter().filter_map(|r| r.sample()).filter_map(|s| s.value()).collect();
            let games: BTreeSet<String> = rs.iter().map(|r| r.key().game_id).collect();
            let failures = rs.iter().filter(|r| r.sample().is_none()).count();
            let m = (!values.is_empty()).then(|| mean(&values));
            table
                .write_record([
                    g.clone(),
                    games.len().to_string(),
                    values.len().to_string(),
                    failures.to_string(),
                    fmt_opt(m),
                    fmt_opt(sd(&values)),
                ])
                .map_err(csv_err)?;
        }
    }
    table.flush().map_err(|e| Error::Data(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn plain_names() {
        assert_eq!(serde_plain(&PromptMode::Cot), "cot");
        assert_eq!(serde_plain(&gameeval::solver::SolveMethod::Exact), "exact");
    }
}
