//! The fixed 31-column design matrix.
//!
//! Columns split into a 17-column base block (7 author, 6 content, sentiment,
//! 3 temporal) and a 14-column quoted block (7 quoted-author, 5 quoted-content
//! counts, quoted language, quoted favorite count). The four heavy-tailed
//! author counts — followers, friends, statuses, listed — carry a `ln(x + 1)`
//! transform on both sides, eight transformed columns in total; everything
//! else is taken as-is. Records without a quoted post fill the quoted block
//! with zero counts, the reserved ABSENT language code, and `verified =
//! false`.
//!
//! Language codes are dictionary-encoded in first-seen order with code 0
//! reserved for ABSENT; encoding new data with a persisted dictionary maps
//! unseen codes to ABSENT.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::ingest::TweetRecord;
use crate::signal::{self, SignalParams};

/// Name of the reserved category code 0.
pub const ABSENT_CATEGORY: &str = "__absent__";

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("unsupported schema: {0}")]
    UnsupportedSchema(String),
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("need at least {need} values, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("engagement labels need signal parameters")]
    MissingSignal,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    Ordinal,
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transform {
    Identity,
    Log1p,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub kind: FeatureKind,
    pub transform: Transform,
}

/// Ordered column descriptors. [`FeatureSchema::standard`] is the 31-column
/// contract used by the pipeline; custom schemas are only for small kernel
/// tests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    columns: Vec<FeatureDescriptor>,
}

fn col(name: &str, kind: FeatureKind, transform: Transform) -> FeatureDescriptor {
    FeatureDescriptor {
        name: name.to_string(),
        kind,
        transform,
    }
}

impl FeatureSchema {
    pub fn new(columns: Vec<FeatureDescriptor>) -> Self {
        Self { columns }
    }

    /// The standard 31-column schema.
    pub fn standard() -> Self {
        use FeatureKind::*;
        use Transform::*;
        let columns = vec![
            // Base author block.
            col("followers_count", Ordinal, Log1p),
            col("friends_count", Ordinal, Log1p),
            col("account_age_days", Ordinal, Identity),
            col("statuses_count", Ordinal, Log1p),
            col("actor_favorites_count", Ordinal, Identity),
            col("actor_listed_count", Ordinal, Log1p),
            col("verified", Categorical, Identity),
            // Base content block.
            col("body_length", Ordinal, Identity),
            col("mention_count", Ordinal, Identity),
            col("hashtag_count", Ordinal, Identity),
            col("media_count", Ordinal, Identity),
            col("url_count", Ordinal, Identity),
            col("language_code", Categorical, Identity),
            col("sentiment_value", Continuous, Identity),
            // Temporal block.
            col("posted_hour", Ordinal, Identity),
            col("posted_day", Ordinal, Identity),
            col("posted_month", Ordinal, Identity),
            // Quoted author block.
            col("quoted_followers_count", Ordinal, Log1p),
            col("quoted_friends_count", Ordinal, Log1p),
            col("quoted_account_age_days", Ordinal, Identity),
            col("quoted_statuses_count", Ordinal, Log1p),
            col("quoted_actor_favorites_count", Ordinal, Identity),
            col("quoted_actor_listed_count", Ordinal, Log1p),
            col("quoted_verified", Categorical, Identity),
            // Quoted content block.
            col("quoted_body_length", Ordinal, Identity),
            col("quoted_mention_count", Ordinal, Identity),
            col("quoted_hashtag_count", Ordinal, Identity),
            col("quoted_media_count", Ordinal, Identity),
            col("quoted_url_count", Ordinal, Identity),
            col("quoted_language_code", Categorical, Identity),
            col("quoted_favorite_count", Ordinal, Identity),
        ];
        Self { columns }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column(&self, i: usize) -> &FeatureDescriptor {
        &self.columns[i]
    }

    pub fn columns(&self) -> &[FeatureDescriptor] {
        &self.columns
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Stable FNV-1a hash over names, kinds, and transforms; persisted with
    /// trained models to reject mismatched matrices.
    pub fn hash(&self) -> u64 {
        let mut h = 0xcbf29ce484222325u64;
        let mut eat = |bytes: &[u8]| {
            for b in bytes {
                h ^= *b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        for c in &self.columns {
            eat(c.name.as_bytes());
            eat(&[match c.kind {
                FeatureKind::Ordinal => 0u8,
                FeatureKind::Continuous => 1,
                FeatureKind::Categorical => 2,
            }]);
            eat(&[match c.transform {
                Transform::Identity => 0u8,
                Transform::Log1p => 1,
            }]);
        }
        h
    }
}

/// Category dictionary: `names[code]` is the category string, code 0 the
/// reserved ABSENT bucket.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryDict {
    names: Vec<String>,
}

impl CategoryDict {
    pub fn new() -> Self {
        Self {
            names: vec![ABSENT_CATEGORY.to_string()],
        }
    }

    pub fn code_of(&self, name: &str) -> Option<u32> {
        self.names.iter().position(|n| n == name).map(|p| p as u32)
    }

    fn intern(&mut self, name: &str) -> u32 {
        match self.code_of(name) {
            Some(c) => c,
            None => {
                self.names.push(name.to_string());
                (self.names.len() - 1) as u32
            }
        }
    }

    /// Code for `name` when present, otherwise the ABSENT code 0.
    pub fn encode(&self, name: &str) -> u32 {
        self.code_of(name).unwrap_or(0)
    }

    pub fn name_of(&self, code: u32) -> Option<&str> {
        self.names.get(code as usize).map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

impl Default for CategoryDict {
    fn default() -> Self {
        Self::new()
    }
}

/// Dictionaries for the two language columns. Verified flags encode as plain
/// 0/1 and need no dictionary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Dictionaries {
    pub language: CategoryDict,
    pub quoted_language: CategoryDict,
}

/// Row-major N x 31 design matrix with ids and the dictionaries used to
/// encode it. Categorical columns hold integer codes stored as `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    schema: FeatureSchema,
    ids: Vec<String>,
    values: Vec<f64>,
    dicts: Dictionaries,
}

impl FeatureMatrix {
    /// Assembles a matrix from parts; mainly for kernel tests. Panics when
    /// the value length does not equal `ids.len() * schema.len()`.
    pub fn from_parts(
        schema: FeatureSchema,
        ids: Vec<String>,
        values: Vec<f64>,
        dicts: Dictionaries,
    ) -> Self {
        assert_eq!(values.len(), ids.len() * schema.len());
        Self {
            schema,
            ids,
            values,
            dicts,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn dictionaries(&self) -> &Dictionaries {
        &self.dicts
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.schema.len() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let w = self.schema.len();
        &self.values[row * w..(row + 1) * w]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|r| self.value(r, col)).collect()
    }

    /// Writes the matrix as CSV with header `id,<columns...>[,label]`.
    pub fn write_csv(&self, path: &Path, labels: Option<&[f64]>) -> Result<(), FeatureError> {
        if let Some(l) = labels {
            assert_eq!(l.len(), self.n_rows(), "label length mismatch");
        }
        let mut w = BufWriter::new(File::create(path)?);
        let mut header = String::from("id");
        for c in self.schema.columns() {
            header.push(',');
            header.push_str(&c.name);
        }
        if labels.is_some() {
            header.push_str(",label");
        }
        writeln!(w, "{header}")?;
        for r in 0..self.n_rows() {
            write!(w, "{}", csv_escape(&self.ids[r]))?;
            for v in self.row(r) {
                write!(w, ",{v}")?;
            }
            if let Some(l) = labels {
                write!(w, ",{}", l[r])?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the dictionary sidecar:
    /// `{"language_code": [names...], "quoted_language_code": [names...]}`,
    /// names indexed by code.
    pub fn write_dict_json(&self, path: &Path) -> Result<(), FeatureError> {
        let mut w = BufWriter::new(File::create(path)?);
        let value = serde_json::json!({
            "language_code": self.dicts.language.names(),
            "quoted_language_code": self.dicts.quoted_language.names(),
        });
        serde_json::to_writer(&mut w, &value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn log1p_u64(x: u64) -> f64 {
    ((x + 1) as f64).ln()
}

fn encode_row(record: &TweetRecord, dicts: &Dictionaries, out: &mut Vec<f64>) {
    let a = &record.author;
    out.push(log1p_u64(a.followers_count));
    out.push(log1p_u64(a.friends_count));
    out.push(a.account_age_days as f64);
    out.push(log1p_u64(a.statuses_count));
    out.push(a.actor_favorites_count as f64);
    out.push(log1p_u64(a.actor_listed_count));
    out.push(if a.verified { 1.0 } else { 0.0 });
    out.push(record.body_length as f64);
    out.push(record.mention_count as f64);
    out.push(record.hashtag_count as f64);
    out.push(record.media_count as f64);
    out.push(record.url_count as f64);
    out.push(dicts.language.encode(&record.language_code) as f64);
    out.push(record.sentiment_value);
    out.push(record.posted_hour as f64);
    out.push(record.posted_day as f64);
    out.push(record.posted_month as f64);
    match &record.quoted {
        Some(q) => {
            let qa = &q.author;
            out.push(log1p_u64(qa.followers_count));
            out.push(log1p_u64(qa.friends_count));
            out.push(qa.account_age_days as f64);
            out.push(log1p_u64(qa.statuses_count));
            out.push(qa.actor_favorites_count as f64);
            out.push(log1p_u64(qa.actor_listed_count));
            out.push(if qa.verified { 1.0 } else { 0.0 });
            out.push(q.body_length as f64);
            out.push(q.mention_count as f64);
            out.push(q.hashtag_count as f64);
            out.push(q.media_count as f64);
            out.push(q.url_count as f64);
            out.push(dicts.quoted_language.encode(&q.language_code) as f64);
            out.push(q.favorite_count as f64);
        }
        None => {
            // Quoted block defaults: zero counts, ABSENT language,
            // verified = false. log1p(0) is 0, so transformed columns agree.
            out.extend_from_slice(&[0.0; 14]);
        }
    }
}

fn ensure_standard(schema: &FeatureSchema) -> Result<(), FeatureError> {
    if *schema != FeatureSchema::standard() {
        return Err(FeatureError::UnsupportedSchema(
            "extraction is defined for the standard 31-column schema".to_string(),
        ));
    }
    Ok(())
}

/// Extracts the design matrix, building language dictionaries in first-seen
/// order over `records`.
pub fn extract_features(
    records: &[TweetRecord],
    schema: &FeatureSchema,
) -> Result<FeatureMatrix, FeatureError> {
    ensure_standard(schema)?;
    let mut dicts = Dictionaries::default();
    for r in records {
        dicts.language.intern(&r.language_code);
        if let Some(q) = &r.quoted {
            dicts.quoted_language.intern(&q.language_code);
        }
    }
    Ok(encode_all(records, schema, dicts))
}

/// Extracts the design matrix with frozen dictionaries; language codes not
/// present in a dictionary map to the ABSENT bucket.
pub fn extract_features_with_dicts(
    records: &[TweetRecord],
    schema: &FeatureSchema,
    dicts: &Dictionaries,
) -> Result<FeatureMatrix, FeatureError> {
    ensure_standard(schema)?;
    Ok(encode_all(records, schema, dicts.clone()))
}

fn encode_all(records: &[TweetRecord], schema: &FeatureSchema, dicts: Dictionaries) -> FeatureMatrix {
    let width = schema.len();
    let rows = exec::map_indexed(records.len(), |i| {
        let mut row = Vec::with_capacity(width);
        encode_row(&records[i], &dicts, &mut row);
        row
    });
    let mut values = Vec::with_capacity(records.len() * width);
    for row in rows {
        values.extend_from_slice(&row);
    }
    FeatureMatrix {
        schema: schema.clone(),
        ids: records.iter().map(|r| r.id.clone()).collect(),
        values,
        dicts,
    }
}

/// Adjusted Fisher-Pearson skewness
/// `g1 * sqrt(n(n-1)) / (n-2)` with `g1 = m3 / m2^(3/2)`.
/// Requires at least three values and non-zero variance.
pub fn compute_skewness(values: &[f64]) -> Result<f64, FeatureError> {
    let n = values.len();
    if n < 3 {
        return Err(FeatureError::InsufficientData { need: 3, got: n });
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
    if m2 == 0.0 {
        return Err(FeatureError::Degenerate("constant column"));
    }
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / nf;
    let g1 = m3 / m2.powf(1.5);
    Ok(g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0))
}

/// Prediction target: one of the raw channels or the compound signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Retweets,
    Replies,
    Favorites,
    Engagement,
}

impl Target {
    pub fn as_str(&self) -> &'static str {
        match self {
            Target::Retweets => "retweets",
            Target::Replies => "replies",
            Target::Favorites => "favorites",
            Target::Engagement => "engagement",
        }
    }
}

impl std::str::FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "retweets" => Ok(Target::Retweets),
            "replies" => Ok(Target::Replies),
            "favorites" => Ok(Target::Favorites),
            "engagement" => Ok(Target::Engagement),
            other => Err(format!("unknown target {other:?}")),
        }
    }
}

/// Labels on the model scale: `ln(count + 1)` for the three channels, the
/// signal projection for the compound target (which then requires `signal`).
pub fn label_vector(
    records: &[TweetRecord],
    target: Target,
    signal: Option<&SignalParams>,
) -> Result<Vec<f64>, FeatureError> {
    match target {
        Target::Retweets => Ok(records
            .iter()
            .map(|r| log1p_u64(r.response.retweets))
            .collect()),
        Target::Replies => Ok(records
            .iter()
            .map(|r| log1p_u64(r.response.replies))
            .collect()),
        Target::Favorites => Ok(records
            .iter()
            .map(|r| log1p_u64(r.response.favorites))
            .collect()),
        Target::Engagement => {
            let params = signal.ok_or(FeatureError::MissingSignal)?;
            Ok(records
                .iter()
                .map(|r| signal::project(&r.response, params))
                .collect())
        }
    }
}
