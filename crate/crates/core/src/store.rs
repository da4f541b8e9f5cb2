//! Append-only record files and human-judgment ingestion.
//!
//! Record files hold one JSON envelope per line, `{"v":1,"record":{...}}`.
//! Every append ends with a newline and an fsync, so a crash can only leave
//! a partial last line. Loading skips such a line with a warning, and opening
//! a file for appending cuts it off first. Any other malformed line is an
//! error that names its byte offset.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::JudgmentSample;
use crate::llm::Query;
use crate::metrics::combine_payoff;

pub const RECORD_VERSION: u32 = 1;
pub const DATA_DIR_ENV: &str = "GAMEEVAL_DATA_DIR";

/// `$GAMEEVAL_DATA_DIR`, or `gameeval-data` in the working directory.
pub fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("gameeval-data"))
}

#[derive(Serialize)]
struct EnvelopeOut<'a, T> {
    v: u32,
    record: &'a T,
}

#[derive(Deserialize)]
struct EnvelopeIn<T> {
    v: u32,
    record: T,
}

#[derive(Debug)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub warnings: Vec<String>,
}

/// Reads every complete record. A missing file holds no records.
pub fn load_records<T: DeserializeOwned>(path: &Path) -> Result<Loaded<T>> {
    let mut bytes = Vec::new();
    match File::open(path) {
        Ok(mut f) => {
            f.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Ok(Loaded { records: Vec::new(), warnings: Vec::new() });
        }
        Err(e) => return Err(Error::io(path, e)),
    }
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    let mut offset = 0;
    while offset < bytes.len() {
        let Some(len) = bytes[offset..].iter().position(|&b| b == b'\n') else {
            let w = format!("{}: ignoring partial final record at byte {offset}", path.display());
            log::warn!("{w}");
            warnings.push(w);
            break;
        };
        let line = &bytes[offset..offset + len];
        if !line.iter().all(u8::is_ascii_whitespace) {
            let env: EnvelopeIn<T> = serde_json::from_slice(line)
                .map_err(|e| Error::Data(format!("{}: corrupt record at byte {offset}: {e}", path.display())))?;
            if env.v != RECORD_VERSION {
                return Err(Error::Data(format!(
                    "{}: record at byte {offset} has unsupported version {}",
                    path.display(),
                    env.v
                )));
            }
            records.push(env.record);
        }
        offset += len + 1;
    }
    Ok(Loaded { records, warnings })
}

/// Single writer for one record file.
pub struct RecordWriter {
    file: File,
    path: PathBuf,
}

impl RecordWriter {
    /// Opens for appending, creating parent directories, and drops a
    /// partial final line left by an interrupted write.
    pub fn open(path: &Path) -> Result<RecordWriter> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(path).map_err(|e| Error::io(path, e))?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
        if bytes.last().is_some_and(|&b| b != b'\n') {
            let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
            log::warn!("{}: truncating partial final record at byte {keep}", path.display());
            file.set_len(keep as u64).map_err(|e| Error::io(path, e))?;
            file.seek(SeekFrom::End(0)).map_err(|e| Error::io(path, e))?;
        }
        Ok(RecordWriter { file, path: path.to_path_buf() })
    }

    pub fn append<T: Serialize>(&mut self, record: &T) -> Result<()> {
        let mut line = serde_json::to_vec(&EnvelopeOut { v: RECORD_VERSION, record })?;
        line.push(b'\n');
        self.file.write_all(&line).map_err(|e| Error::io(&self.path, e))?;
        self.file.sync_data().map_err(|e| Error::io(&self.path, e))?;
        Ok(())
    }
}

/// Writes `records` to a fresh file, replacing any existing one.
pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    if path.exists() {
        fs::remove_file(path).map_err(|e| Error::io(path, e))?;
    }
    let mut w = RecordWriter::open(path)?;
    for r in records {
        w.append(r)?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowRejection {
    /// 1-based line number in the input file, counting the header.
    pub line: u64,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct HumanIngest {
    pub samples: Vec<JudgmentSample>,
    pub rejections: Vec<RowRejection>,
    pub per_game: BTreeMap<String, usize>,
}

/// Reads human judgments from CSV. Payoff files carry `participant_id`,
/// `game_id`, `q1`, `q2`; funness files carry `participant_id`, `game_id`,
/// `rating`. Bad rows are collected as rejections and skipped.
pub fn ingest_human_judgments(path: &Path, query: Query, known_games: &BTreeSet<String>) -> Result<HumanIngest> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| Error::Data(format!("{}: {e}", path.display())))?.clone();
    let value_cols: &[&str] = match query {
        Query::Payoff => &["q1", "q2"],
        Query::Funness => &["rating"],
    };
    let mut col = BTreeMap::new();
    for name in ["participant_id", "game_id"].iter().chain(value_cols) {
        let i = headers
            .iter()
            .position(|h| h == *name)
            .ok_or_else(|| Error::Data(format!("{}: missing column {name}", path.display())))?;
        col.insert(*name, i);
    }
    let mut out = HumanIngest::default();
    for (row, result) in reader.records().enumerate() {
        let line = row as u64 + 2;
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                out.rejections.push(RowRejection { line, reason: e.to_string() });
                continue;
            }
        };
        let field = |name: &str| record.get(col[name]).unwrap_or("");
        let mut problems = Vec::new();
        let participant = field("participant_id");
        if participant.is_empty() {
            problems.push("empty participant_id".to_string());
        }
        let game_id = field("game_id").to_string();
        if !known_games.contains(&game_id) {
            problems.push(format!("unknown game_id {game_id:?}"));
        }
        let mut values = Vec::new();
        for &name in value_cols {
            match field(name).parse::<f64>() {
                Ok(v) if (0.0..=100.0).contains(&v) => values.push(v),
                Ok(v) => problems.push(format!("{name} = {v} is outside [0, 100]")),
                Err(_) => problems.push(format!("{name} = {:?} is not a number", field(name))),
            }
        }
        if !problems.is_empty() {
            out.rejections.push(RowRejection { line, reason: problems.join("; ") });
            continue;
        }
        let count = out.per_game.entry(game_id.clone()).or_default();
        let mut sample = JudgmentSample::empty(format!("human:{participant}"), game_id, query, *count as u32);
        *count += 1;
        match query {
            Query::Payoff => {
                sample.q1_win_given_not_draw = Some(values[0]);
                sample.q2_draw = Some(values[1]);
                sample.payoff = Some(combine_payoff(values[0], values[1])?);
            }
            Query::Funness => sample.funness = Some(values[0]),
        }
        out.samples.push(sample);
    }
    for r in &out.rejections {
        log::warn!("{}:{}: rejected: {}", path.display(), r.line, r.reason);
    }
    Ok(out)
}
