//! Labeled issue data: CSV ingestion, text normalization, label encoding and
//! the seeded train/validation split.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SeededRng;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("row {row}: unknown label \"{value}\" (expected bug, enhancement or question)")]
    UnknownLabel { row: usize, value: String },
    #[error("line {line}: {message}")]
    Jsonl { line: usize, message: String },
    #[error("cannot split an empty example list")]
    EmptyInput,
    #[error("split fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// The three issue classes. Integer encoding is bug=0, enhancement=1, question=2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IssueLabel {
    Bug,
    Enhancement,
    Question,
}

pub const NUM_CLASSES: usize = 3;

impl IssueLabel {
    pub const ALL: [IssueLabel; NUM_CLASSES] =
        [IssueLabel::Bug, IssueLabel::Enhancement, IssueLabel::Question];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IssueLabel::Bug => "bug",
            IssueLabel::Enhancement => "enhancement",
            IssueLabel::Question => "question",
        }
    }
}

impl fmt::Display for IssueLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown label \"{0}\"")]
pub struct ParseLabelError(pub String);

impl FromStr for IssueLabel {
    type Err = ParseLabelError;

    /// Case-insensitive on the three canonical names, surrounding whitespace ignored.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        IssueLabel::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(t))
            .ok_or_else(|| ParseLabelError(s.to_string()))
    }
}

/// Serde adapter writing a label as its integer encoding.
pub mod label_index {
    use super::IssueLabel;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(label: &IssueLabel, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(label.index() as u8)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<IssueLabel, D::Error> {
        let i = u64::deserialize(d)?;
        IssueLabel::from_index(i as usize)
            .ok_or_else(|| D::Error::custom(format!("label index {i} is not 0, 1 or 2")))
    }
}

/// One issue as read from the source CSV; title and body are untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IssueRecord {
    pub label: IssueLabel,
    pub title: String,
    pub body: String,
}

/// Normalized single-line text with its integer-encoded label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CleanExample {
    pub text: String,
    #[serde(with = "label_index")]
    pub label: IssueLabel,
}

/// Replaces line breaks (LF, CR, CRLF) and every other whitespace character
/// with a space, collapses runs of spaces to one and trims both ends.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for ch in text.chars() {
        if ch.is_whitespace() {
            pending_space = true;
        } else {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(ch);
        }
    }
    out
}

pub fn preprocess(record: &IssueRecord) -> CleanExample {
    let joined = format!("{} {}", record.title, record.body);
    CleanExample {
        text: normalize(&joined),
        label: record.label,
    }
}

pub fn parse_csv(path: impl AsRef<Path>) -> Result<Vec<IssueRecord>, CorpusError> {
    parse_csv_reader(File::open(path)?)
}

/// Reads RFC 4180 CSV with a header row containing `label`, `title` and `body`.
/// Other columns are ignored. Row numbers in errors count data rows from 1.
pub fn parse_csv_reader<R: Read>(reader: R) -> Result<Vec<IssueRecord>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CorpusError::Row {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| CorpusError::MissingColumn(name.to_string()))
    };
    let (label_col, title_col, body_col) = (column("label")?, column("title")?, column("body")?);

    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| CorpusError::Row {
            row: row_no,
            message: e.to_string(),
        })?;
        let raw_label = &row[label_col];
        let label = raw_label.parse().map_err(|_| CorpusError::UnknownLabel {
            row: row_no,
            value: raw_label.to_string(),
        })?;
        records.push(IssueRecord {
            label,
            title: row[title_col].to_string(),
            body: row[body_col].to_string(),
        });
    }
    Ok(records)
}

pub fn write_csv<W: Write>(records: &[IssueRecord], writer: W) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_writer(writer);
    let to_io = |e: csv::Error| CorpusError::Io(io::Error::other(e));
    w.write_record(["label", "title", "body"]).map_err(to_io)?;
    for r in records {
        w.write_record([r.label.as_str(), &r.title, &r.body])
            .map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<CleanExample>, CorpusError> {
    read_jsonl_from(BufReader::new(File::open(path)?))
}

/// Blank lines are skipped; line numbers in errors are 1-based.
pub fn read_jsonl_from<R: BufRead>(reader: R) -> Result<Vec<CleanExample>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ex = serde_json::from_str(&line).map_err(|e| CorpusError::Jsonl {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(ex);
    }
    Ok(out)
}

pub fn write_jsonl<W: Write>(examples: &[CleanExample], mut writer: W) -> Result<(), CorpusError> {
    for ex in examples {
        serde_json::to_writer(&mut writer, ex).map_err(io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<CleanExample>,
    pub validation: Vec<CleanExample>,
    pub seed: u64,
    pub fraction: f64,
}

fn check_split_args(n: usize, fraction: f64) -> Result<(), CorpusError> {
    if n == 0 {
        return Err(CorpusError::EmptyInput);
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CorpusError::BadFraction(fraction));
    }
    Ok(())
}

/// Number of training items for `n` examples: `floor(fraction * n)`.
pub fn train_size(n: usize, fraction: f64) -> usize {
    (fraction * n as f64).floor() as usize
}

/// Seeded uniform shuffle, then the first `floor(fraction * N)` items train.
pub fn split(examples: &[CleanExample], fraction: f64, seed: u64) -> Result<DatasetSplit, CorpusError> {
    check_split_args(examples.len(), fraction)?;
    let mut shuffled = examples.to_vec();
    SeededRng::new(seed).shuffle(&mut shuffled);
    let validation = shuffled.split_off(train_size(examples.len(), fraction));
    Ok(DatasetSplit {
        train: shuffled,
        validation,
        seed,
        fraction,
    })
}

/// Per-class variant of [`split`]: each class is shuffled and cut separately,
/// then the parts are concatenated in class order and shuffled once more.
pub fn split_stratified(
    examples: &[CleanExample],
    fraction: f64,
    seed: u64,
) -> Result<DatasetSplit, CorpusError> {
    check_split_args(examples.len(), fraction)?;
    let mut rng = SeededRng::new(seed);
    let mut train = Vec::new();
    let mut validation = Vec::new();
    for label in IssueLabel::ALL {
        let mut members: Vec<CleanExample> =
            examples.iter().filter(|e| e.label == label).cloned().collect();
        rng.shuffle(&mut members);
        let cut = train_size(members.len(), fraction);
        validation.extend(members.split_off(cut));
        train.extend(members);
    }
    rng.shuffle(&mut train);
    rng.shuffle(&mut validation);
    Ok(DatasetSplit {
        train,
        validation,
        seed,
        fraction,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub bug: usize,
    pub enhancement: usize,
    pub question: usize,
}

impl ClassCounts {
    pub fn get(&self, label: IssueLabel) -> usize {
        match label {
            IssueLabel::Bug => self.bug,
            IssueLabel::Enhancement => self.enhancement,
            IssueLabel::Question => self.question,
        }
    }

    fn bump(&mut self, label: IssueLabel) {
        match label {
            IssueLabel::Bug => self.bug += 1,
            IssueLabel::Enhancement => self.enhancement += 1,
            IssueLabel::Question => self.question += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.bug + self.enhancement + self.question
    }

    /// Label with the largest count, lowest index on ties.
    pub fn majority(&self) -> IssueLabel {
        let mut best = IssueLabel::Bug;
        for l in IssueLabel::ALL {
            if self.get(l) > self.get(best) {
                best = l;
            }
        }
        best
    }
}

pub fn class_counts(examples: &[CleanExample]) -> ClassCounts {
    let mut counts = ClassCounts::default();
    for e in examples {
        counts.bump(e.label);
    }
    counts
}
