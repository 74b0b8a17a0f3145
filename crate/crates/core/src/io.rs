//! Comma-separated tables with a `#` metadata block.
//!
//! Every file written here starts with lines of the form `# key: value`
//! (tool version, config hash, seed, ...) followed by a header row.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::inference::PredictionRecord;
use crate::model::{PopulationParams, UserRecord};
use crate::simulator::TruthRecord;

pub const USERS_HEADER: [&str; 7] = [
    "user_id",
    "posting_rate",
    "friend_count",
    "stance",
    "topic_posts",
    "total_posts",
    "responses",
];

pub const PREDICTIONS_HEADER: [&str; 5] = ["user_id", "predicted_mean", "predicted_std", "observed", "abs_error"];

pub const TRUTH_HEADER: [&str; 4] = ["user_id", "true_p_topic", "true_p_visible", "responses"];

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Ordered `key: value` pairs written as the leading comment block.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Metadata {
    pub entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new(config_sha256: &str, seed: u64) -> Self {
        Self {
            entries: vec![
                ("tool".into(), TOOL_VERSION.into()),
                ("config_sha256".into(), config_sha256.into()),
                ("seed".into(), seed.to_string()),
            ],
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        self.entries.iter().cloned().collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: line as usize,
        message: message.into(),
    }
}

/// Reads the leading `# key: value` block of a file.
pub fn read_metadata(path: &Path) -> Result<Metadata> {
    let file = File::open(path).map_err(|e| file_error(path, e))?;
    let mut entries = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| file_error(path, e))?;
        let Some(rest) = line.strip_prefix('#') else { break };
        if let Some((k, v)) = rest.trim().split_once(':') {
            entries.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    Ok(Metadata { entries })
}

/// Writes the metadata block, a header and the rows.
pub fn write_table<I>(path: &Path, meta: &Metadata, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let file = File::create(path).map_err(|e| file_error(path, e))?;
    let mut out = BufWriter::new(file);
    for (k, v) in &meta.entries {
        writeln!(out, "# {k}: {v}")?;
    }
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(header).map_err(|e| file_error(path, e))?;
    for row in rows {
        writer.write_record(&row).map_err(|e| file_error(path, e))?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| file_error(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| file_error(path, e))
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| file_error(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn check_header(path: &Path, rdr: &mut csv::Reader<File>, expected: &[&str]) -> Result<()> {
    let header = rdr
        .headers()
        .map_err(|e| file_error(path, e))?
        .clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(file_error(path, "file is empty (no header row)"));
    }
    let line = header.position().map(|p| p.line()).unwrap_or(1);
    if header.iter().ne(expected.iter().copied()) {
        return Err(parse_error(
            path,
            line,
            format!(
                "header must be exactly {:?}, found {:?}",
                expected.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    Ok(())
}

fn field<T: std::str::FromStr>(path: &Path, line: u64, name: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>()
        .map_err(|e| parse_error(path, line, format!("column {name}: cannot parse {raw:?}: {e}")))
}

/// Reads a users file. Rows are checked against the record invariants (and
/// against `pop` when given); errors carry the file line number.
pub fn read_users(path: &Path, pop: Option<&PopulationParams>) -> Result<Vec<UserRecord>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &USERS_HEADER)?;
    let mut users = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_error(path, line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let user = UserRecord {
            user_id: row[0].to_string(),
            posting_rate: field(path, line, "posting_rate", &row[1])?,
            friend_count: field(path, line, "friend_count", &row[2])?,
            stance: row[3]
                .parse()
                .map_err(|e: Error| parse_error(path, line, format!("column stance: {e}")))?,
            topic_posts: field(path, line, "topic_posts", &row[4])?,
            total_posts: field(path, line, "total_posts", &row[5])?,
            responses: field(path, line, "responses", &row[6])?,
        };
        if user.user_id.is_empty() {
            return Err(parse_error(path, line, "empty user_id"));
        }
        user.validate(pop).map_err(|e| parse_error(path, line, e.to_string()))?;
        if !seen.insert(user.user_id.clone()) {
            return Err(parse_error(path, line, format!("duplicate user_id {}", user.user_id)));
        }
        users.push(user);
    }
    if users.is_empty() {
        return Err(file_error(path, "no user rows"));
    }
    Ok(users)
}

pub fn write_users(path: &Path, meta: &Metadata, users: &[UserRecord]) -> Result<()> {
    write_table(
        path,
        meta,
        &USERS_HEADER,
        users.iter().map(|u| {
            vec![
                u.user_id.clone(),
                u.posting_rate.to_string(),
                u.friend_count.to_string(),
                u.stance.to_string(),
                u.topic_posts.to_string(),
                u.total_posts.to_string(),
                u.responses.to_string(),
            ]
        }),
    )
}

pub fn write_truth(path: &Path, meta: &Metadata, records: &[TruthRecord]) -> Result<()> {
    write_table(
        path,
        meta,
        &TRUTH_HEADER,
        records.iter().map(|r| {
            vec![
                r.user_id.clone(),
                r.true_p_topic.to_string(),
                r.true_p_visible.to_string(),
                r.responses.to_string(),
            ]
        }),
    )
}

pub fn read_truth(path: &Path) -> Result<Vec<TruthRecord>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &TRUTH_HEADER)?;
    rdr.records()
        .map(|row| {
            let row = row.map_err(|e| file_error(path, e))?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            Ok(TruthRecord {
                user_id: row[0].to_string(),
                true_p_topic: field(path, line, "true_p_topic", &row[1])?,
                true_p_visible: field(path, line, "true_p_visible", &row[2])?,
                responses: field(path, line, "responses", &row[3])?,
            })
        })
        .collect()
}

pub fn write_predictions(path: &Path, meta: &Metadata, predictions: &[PredictionRecord]) -> Result<()> {
    write_table(
        path,
        meta,
        &PREDICTIONS_HEADER,
        predictions.iter().map(|p| {
            vec![
                p.user_id.clone(),
                p.predicted_mean.to_string(),
                p.predicted_std.to_string(),
                p.observed.to_string(),
                p.abs_error.to_string(),
            ]
        }),
    )
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &PREDICTIONS_HEADER)?;
    let out: Vec<PredictionRecord> = rdr
        .records()
        .map(|row| {
            let row = row.map_err(|e| file_error(path, e))?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            let mean: f64 = field(path, line, "predicted_mean", &row[1])?;
            let std: f64 = field(path, line, "predicted_std", &row[2])?;
            let observed: u64 = field(path, line, "observed", &row[3])?;
            if !(mean.is_finite() && std.is_finite() && std >= 0.0) {
                return Err(parse_error(path, line, "predicted_mean and predicted_std must be finite, std >= 0"));
            }
            Ok(PredictionRecord::new(row[0].to_string(), mean, std, observed))
        })
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(file_error(path, "no prediction rows"));
    }
    Ok(out)
}
