//! The compound engagement signal.
//!
//! The three stabilized response channels share (empirically) a single
//! dominant dimension. `fit_signal` extracts it as the first principal
//! component of the channel covariance; `project` collapses a raw response
//! onto it:
//!
//! ```text
//! score = sum_i w_i * (ln(count_i + 1) - mu_i)
//! ```
//!
//! Two preset parameter sets ship with the crate ([`SignalParams::t2017`],
//! [`SignalParams::t2018`]): published constants fitted on large 2017/2018
//! samples, usable without refitting. Presets default to natural logs; a
//! base-10 variant is available for score scales reported that way, with the
//! means left unchanged.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::ingest::{EngagementVector, TweetRecord};
use crate::stats::{self, DataMatrix, StatsError};

/// Fixed channel order used everywhere in the crate.
pub const CHANNELS: [&str; 3] = ["retweets", "replies", "favorites"];

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("need at least {need} responses, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("degenerate responses: {0}")]
    Degenerate(&'static str),
    #[error("invalid signal parameters: {0}")]
    Invalid(String),
    #[error("stats: {0}")]
    Stats(#[from] StatsError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Logarithm base used by the projection. Natural log is the default and the
/// scale on which parameters are fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogBase {
    #[serde(rename = "e")]
    Natural,
    #[serde(rename = "10")]
    Ten,
}

impl LogBase {
    fn log1p(&self, count: u64) -> f64 {
        let x = (count + 1) as f64;
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Ten => x.log10(),
        }
    }
}

impl std::str::FromStr for LogBase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "e" => Ok(LogBase::Natural),
            "10" => Ok(LogBase::Ten),
            other => Err(format!("unknown log base {other:?} (expected e or 10)")),
        }
    }
}

/// First-principal-component signal parameters: projection weights and the
/// stabilized channel means they were centered on, in [`CHANNELS`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalParams {
    pub weights: [f64; 3],
    pub means: [f64; 3],
    pub channels: [String; 3],
    pub log_base: LogBase,
    /// Share of total stabilized-response variance captured by the first
    /// component, in [0, 1].
    pub variance_explained: f64,
    /// `"fitted"`, or the preset tag (`"t2017"` / `"t2018"`).
    pub provenance: String,
}

fn channel_names() -> [String; 3] {
    [
        CHANNELS[0].to_string(),
        CHANNELS[1].to_string(),
        CHANNELS[2].to_string(),
    ]
}

impl SignalParams {
    /// Preset fitted on a large 2017 sample: weights
    /// (0.451, 0.145, 0.880), means (0.049, 0.082, 0.148), first component
    /// carrying 72% of the variance.
    pub fn t2017() -> Self {
        Self {
            weights: [0.451, 0.145, 0.880],
            means: [0.049, 0.082, 0.148],
            channels: channel_names(),
            log_base: LogBase::Natural,
            variance_explained: 0.72,
            provenance: "t2017".to_string(),
        }
    }

    /// Preset fitted on a large 2018 sample: weights
    /// (0.450, 0.188, 0.872), means (0.066, 0.080, 0.205), first component
    /// carrying 77% of the variance.
    pub fn t2018() -> Self {
        Self {
            weights: [0.450, 0.188, 0.872],
            means: [0.066, 0.080, 0.205],
            channels: channel_names(),
            log_base: LogBase::Natural,
            variance_explained: 0.77,
            provenance: "t2018".to_string(),
        }
    }

    /// Looks up a preset by tag.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "t2017" => Some(Self::t2017()),
            "t2018" => Some(Self::t2018()),
            _ => None,
        }
    }

    /// Structural checks. The weight norm is allowed to deviate from 1 by up
    /// to 2e-3 so that published constants rounded to three decimals pass;
    /// freshly fitted parameters are unit-norm to 1e-6 and better.
    pub fn validate(&self) -> Result<(), SignalError> {
        let norm: f64 = self.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 2e-3 {
            return Err(SignalError::Invalid(format!(
                "weight norm must be ~1, got {norm}"
            )));
        }
        if !self.weights.iter().all(|w| w.is_finite()) || !self.means.iter().all(|m| m.is_finite())
        {
            return Err(SignalError::Invalid("non-finite parameters".to_string()));
        }
        if !(0.0..=1.0).contains(&self.variance_explained) {
            return Err(SignalError::Invalid(format!(
                "variance_explained must lie in [0, 1], got {}",
                self.variance_explained
            )));
        }
        for (got, want) in self.channels.iter().zip(CHANNELS) {
            if got != want {
                return Err(SignalError::Invalid(format!(
                    "channel order must be {CHANNELS:?}, got {:?}",
                    self.channels
                )));
            }
        }
        Ok(())
    }

    /// Returns a copy projecting with the given log base. Means and weights
    /// are kept as-is; only the stabilization base changes.
    pub fn with_log_base(&self, base: LogBase) -> Self {
        Self {
            log_base: base,
            ..self.clone()
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), SignalError> {
        let mut writer = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut writer, self)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SignalError> {
        let params: Self = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        params.validate()?;
        Ok(params)
    }
}

/// Stacks stabilized responses into an N x 3 matrix, the input shape for
/// covariance and parallel analysis.
pub fn stabilized_matrix(responses: &[EngagementVector]) -> DataMatrix {
    let mut data = Vec::with_capacity(responses.len() * 3);
    for r in responses {
        data.extend_from_slice(&stats::stabilize(r).as_array());
    }
    DataMatrix::from_flat(responses.len(), 3, data)
}

/// Fits signal parameters: stabilize, take the covariance, and keep the
/// leading eigenvector (largest-magnitude component positive) together with
/// the stabilized means. Errors when fewer than two responses are given or
/// when every stabilized response is identical (no variance to decompose).
pub fn fit_signal(responses: &[EngagementVector]) -> Result<SignalParams, SignalError> {
    if responses.len() < 2 {
        return Err(SignalError::InsufficientData {
            need: 2,
            got: responses.len(),
        });
    }
    let data = stabilized_matrix(responses);
    let first = data.row(0).to_vec();
    if (0..data.rows()).all(|r| data.row(r) == first.as_slice()) {
        return Err(SignalError::Degenerate(
            "all responses identical after stabilization",
        ));
    }
    let (cov, means) = stats::covariance_matrix(&data)?;
    let trace: f64 = (0..3).map(|i| cov.get(i, i)).sum();
    if trace <= 0.0 {
        return Err(SignalError::Degenerate("zero total variance"));
    }
    let eigen = stats::sym_eigen(&cov)?;
    let w = &eigen.eigenvectors[0];
    Ok(SignalParams {
        weights: [w[0], w[1], w[2]],
        means: [means[0], means[1], means[2]],
        channels: channel_names(),
        log_base: LogBase::Natural,
        variance_explained: eigen.eigenvalues[0] / trace,
        provenance: "fitted".to_string(),
    })
}

/// Projects one raw response onto the compound signal.
pub fn project(response: &EngagementVector, params: &SignalParams) -> f64 {
    let counts = response.as_array();
    let mut score = 0.0;
    for ((w, m), c) in params.weights.iter().zip(&params.means).zip(counts) {
        score += w * (params.log_base.log1p(c) - m);
    }
    score
}

/// Projects every record, returning `(id, score)` pairs. With `sort` the
/// pairs are ordered by descending score; ties keep input order (stable).
pub fn project_batch(
    records: &[TweetRecord],
    params: &SignalParams,
    sort: bool,
) -> Vec<(String, f64)> {
    let mut scored: Vec<(String, f64)> = exec::map_indexed(records.len(), |i| {
        (records[i].id.clone(), project(&records[i].response, params))
    });
    if sort {
        scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    }
    scored
}
