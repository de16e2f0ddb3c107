//! Post record model and JSONL corpus IO.
//!
//! A corpus is a UTF-8 file with one JSON object per line. Field names and
//! nesting are part of the on-disk contract; see [`TweetRecord`]. Reading
//! validates every record and reports the offending line number; writing is
//! byte-stable for a given record sequence.

mod synth;

pub use synth::{synth_corpus, SynthConfig};

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while reading, writing, or generating corpora.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    /// Malformed JSON or a field that does not match the schema.
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    /// A structurally valid record whose values are out of range.
    #[error("line {line}: field `{field}`: {message}")]
    Range {
        line: usize,
        field: &'static str,
        message: String,
    },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
}

/// Raw response counts for one post, in fixed channel order
/// (retweets, replies, favorites).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngagementVector {
    pub retweets: u64,
    pub replies: u64,
    pub favorites: u64,
}

impl EngagementVector {
    pub fn new(retweets: u64, replies: u64, favorites: u64) -> Self {
        Self {
            retweets,
            replies,
            favorites,
        }
    }

    /// Raw counts in channel order.
    pub fn as_array(&self) -> [u64; 3] {
        [self.retweets, self.replies, self.favorites]
    }
}

/// Log-stabilized response values, `ln(count + 1)` per channel. Produced by
/// [`crate::stats::stabilize`]; the distinct type keeps raw counts and
/// stabilized reals from being mixed up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilizedVector {
    pub retweets: f64,
    pub replies: f64,
    pub favorites: f64,
}

impl StabilizedVector {
    pub fn as_array(&self) -> [f64; 3] {
        [self.retweets, self.replies, self.favorites]
    }
}

/// Author snapshot at posting time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorProfile {
    pub followers_count: u64,
    pub friends_count: u64,
    pub statuses_count: u64,
    pub actor_favorites_count: u64,
    pub actor_listed_count: u64,
    pub account_age_days: u64,
    pub verified: bool,
}

/// The quoted post, when the record quotes another one. Carries the quoted
/// author, the quoted content stats, and the quoted post's favorite count at
/// quoting time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotedRef {
    pub author: AuthorProfile,
    pub body_length: u64,
    pub mention_count: u64,
    pub hashtag_count: u64,
    pub media_count: u64,
    pub url_count: u64,
    pub language_code: String,
    pub favorite_count: u64,
}

/// One post with its observed response. Serialized field order matches the
/// JSONL corpus contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub author: AuthorProfile,
    pub body_length: u64,
    pub mention_count: u64,
    pub hashtag_count: u64,
    pub media_count: u64,
    pub url_count: u64,
    pub language_code: String,
    pub sentiment_value: f64,
    pub posted_hour: u8,
    pub posted_day: u8,
    pub posted_month: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quoted: Option<QuotedRef>,
    pub response: EngagementVector,
}

impl TweetRecord {
    /// Range checks beyond what the types enforce. `line` is only used for
    /// error reporting.
    fn validate(&self, line: usize) -> Result<(), CorpusError> {
        let range = |field, message: String| CorpusError::Range {
            line,
            field,
            message,
        };
        if self.id.is_empty() {
            return Err(range("id", "must be non-empty".into()));
        }
        if self.posted_hour > 23 {
            return Err(range(
                "posted_hour",
                format!("must be in 0..=23, got {}", self.posted_hour),
            ));
        }
        if !(1..=7).contains(&self.posted_day) {
            return Err(range(
                "posted_day",
                format!("must be in 1..=7, got {}", self.posted_day),
            ));
        }
        if !(1..=12).contains(&self.posted_month) {
            return Err(range(
                "posted_month",
                format!("must be in 1..=12, got {}", self.posted_month),
            ));
        }
        if !self.sentiment_value.is_finite() || self.sentiment_value.abs() > 1.0 {
            return Err(range(
                "sentiment_value",
                format!("must lie in [-1, 1], got {}", self.sentiment_value),
            ));
        }
        if self.language_code.is_empty() {
            return Err(range("language_code", "must be non-empty".into()));
        }
        Ok(())
    }
}

/// Reads a JSONL corpus from a file. See [`read_corpus_from`].
pub fn read_corpus(path: &Path) -> Result<Vec<TweetRecord>, CorpusError> {
    read_corpus_from(BufReader::new(File::open(path)?))
}

/// Reads and validates a JSONL corpus. Blank lines are skipped; any other
/// malformed line aborts with its 1-based line number. Record ids must be
/// unique within the corpus.
pub fn read_corpus_from(reader: impl BufRead) -> Result<Vec<TweetRecord>, CorpusError> {
    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TweetRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::Schema {
                line: line_no,
                message: e.to_string(),
            })?;
        record.validate(line_no)?;
        if !seen.insert(record.id.clone()) {
            return Err(CorpusError::DuplicateId {
                line: line_no,
                id: record.id,
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// Writes a corpus as JSONL to a file. See [`write_corpus_to`].
pub fn write_corpus(records: &[TweetRecord], path: &Path) -> Result<(), CorpusError> {
    let mut writer = BufWriter::new(File::create(path)?);
    write_corpus_to(records, &mut writer)
}

/// Writes one JSON object per line, in record order. Output bytes depend
/// only on the record values, so identical inputs serialize identically.
pub fn write_corpus_to(
    records: &[TweetRecord],
    writer: &mut impl Write,
) -> Result<(), CorpusError> {
    for record in records {
        let json = serde_json::to_string(record).map_err(|e| CorpusError::Schema {
            line: 0,
            message: e.to_string(),
        })?;
        writer.write_all(json.as_bytes())?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}
