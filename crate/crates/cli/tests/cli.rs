use std::path::Path;
use std::process::{Command, Output};

use gameeval::corpus::write_corpus;
use gameeval::game::GameSpec;

fn run(data: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gameeval"))
        .args(args)
        .env("GAMEEVAL_DATA_DIR", data)
        .env_remove("RUST_LOG")
        .env_remove("OPENAI_API_KEY")
        .current_dir(data)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn rows(table: &str) -> Vec<Vec<String>> {
    csv::Reader::from_reader(table.as_bytes()).records().map(|r| r.unwrap().iter().map(str::to_string).collect()).collect()
}

fn examples(data: &Path) {
    stdout(&run(data, &["corpus-gen", "--examples-only", "--out", "corpus.json"]));
}

#[test]
fn solve_reports_tic_tac_toe_as_a_draw() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&dir.path().join("ttt.json"), &[GameSpec::tic_tac_toe()]).unwrap();
    let out = stdout(&run(dir.path(), &["solve", "--corpus", "ttt.json", "--budget", "5e7"]));
    let table = rows(&out);
    assert_eq!(table.len(), 1);
    assert_eq!(&table[0][..3], ["tic-tac-toe", "0", "exact"]);
    assert!(dir.path().join("solutions.jsonl").exists());
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "bogus = 1\n").unwrap();
    assert_eq!(run(dir.path(), &["--config", "bad.toml", "report", "--run", "x"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["report", "--run", "missing"]).status.code(), Some(3));
    assert_eq!(run(dir.path(), &["solve", "--corpus", "missing.json"]).status.code(), Some(3));
    assert_eq!(run(dir.path(), &["solve", "--corpus", "x", "--budget", "lots"]).status.code(), Some(2));
    examples(dir.path());
    let no_key = run(dir.path(), &["llm-run", "--corpus", "corpus.json", "--provider-id", "openai", "--model", "gpt-4o"]);
    assert_eq!(no_key.status.code(), Some(4));
    assert_eq!(run(dir.path(), &["simulate", "--corpus", "corpus.json", "--p1", "expert", "--p2", "nobody"]).status.code(), Some(2));
}

#[test]
fn dry_run_plans_without_calling_out() {
    let dir = tempfile::tempdir().unwrap();
    examples(dir.path());
    let args = ["llm-run", "--corpus", "corpus.json", "--provider-id", "openai", "--model", "gpt-4o", "--rollouts", "3", "--dry-run"];
    let out = stdout(&run(dir.path(), &args));
    assert_eq!(out.matches("=== ").count(), 12);
    assert!(out.contains("--- system ---") && out.contains("--- user ---"));
    assert!(out.contains("planned calls: 36 (at most 72 with parse retries)"));
    assert!(!dir.path().join("runs").exists());
}

#[test]
fn reports_and_comparisons_are_complete() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    examples(d);
    let first = stdout(&run(d, &["llm-run", "--corpus", "corpus.json", "--rollouts", "4", "--run-id", "s"]));
    assert!(first.contains("48 new samples"), "{first}");

    let traits = rows(&stdout(&run(d, &["report", "--run", "s", "--group-by", "traits"])));
    let groups: Vec<&str> = traits.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(groups, ["0", "1", "2", "3", "4", "5", "6"]);
    assert_eq!(traits.iter().map(|r| r[2].parse::<usize>().unwrap()).sum::<usize>(), 48);

    stdout(&run(d, &["solve", "--corpus", "corpus.json", "--no-mcts", "--budget", "1e5", "--exact-max-cells", "9"]));
    let acc = rows(&stdout(&run(d, &["compare", "--a", "s", "--reference", "optimal", "--metric", "accuracy", "--solutions", "solutions.jsonl"])));
    assert_eq!(acc.len(), 1);
    let value: f64 = acc[0][3].parse().unwrap();
    assert!((0.0..=1.0).contains(&value));
    assert_eq!(acc[0][1], "accuracy");

    let dev = rows(&stdout(&run(d, &["compare", "--a", "s", "--reference", "optimal", "--metric", "dev", "--solutions", "solutions.jsonl"])));
    let (lo, v, hi): (f64, f64, f64) = (dev[0][4].parse().unwrap(), dev[0][3].parse().unwrap(), dev[0][5].parse().unwrap());
    assert!(lo <= v && v <= hi && v >= 0.0);

    let out_path = d.join("cmp.csv");
    stdout(&run(d, &["compare", "--a", "s", "--metric", "splithalf", "--out", out_path.to_str().unwrap()]));
    assert_eq!(rows(&std::fs::read_to_string(out_path).unwrap()).len(), 1);
}

#[test]
fn simulate_writes_one_sample_per_game() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&dir.path().join("ttt.json"), &[GameSpec::tic_tac_toe(), GameSpec::k_in_a_row(2, 2, 2)]).unwrap();
    let out = stdout(&run(dir.path(), &["simulate", "--corpus", "ttt.json", "--p1", "random", "--p2", "random", "--n-games", "50"]));
    assert!(out.contains("2 new samples"), "{out}");
    let report = rows(&stdout(&run(dir.path(), &["report", "--run", "random", "--group-by", "game"])));
    assert_eq!(report.len(), 2);
}
