//! Gradient-boosted regression trees over the engineered design matrix.
//!
//! Squared-error boosting: each stage fits one regression tree to the
//! current residuals and shrinks its leaf values by the learning rate.
//! Trees grow leaf-wise (always splitting the pending leaf with the largest
//! gain) up to a leaf budget, and split search runs on residual histograms
//! rather than raw feature values, so one pass per feature suffices per
//! node. Categorical features split on explicit category subsets found by
//! the mean-ordering scan, which is optimal for squared error.
//!
//! Training is deterministic for a given matrix, label vector, and
//! configuration: histogram bins are fixed up front, parallel split search
//! reduces in feature order, and residual updates follow the leaf layout of
//! the grown tree. Thread count never changes the model bytes.

mod binning;
mod train;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{Dictionaries, FeatureMatrix};

#[derive(Debug, Error)]
pub enum GbrtError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("insufficient data: need at least {need} rows, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("label length {labels} does not match row count {rows}")]
    LengthMismatch { labels: usize, rows: usize },
    #[error("label at row {0} is not finite")]
    NonFiniteLabel(usize),
    #[error("feature value at row {row}, column {col} is not finite")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("categorical column {col} exceeds the supported cardinality")]
    TooManyCategories { col: usize },
    #[error("schema hash mismatch: model was trained on {expected}, data has {found}")]
    SchemaMismatch { expected: String, found: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GbrtConfig {
    pub num_trees: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub min_samples_per_leaf: usize,
    pub histogram_bins: usize,
    pub lambda_l2: f64,
    /// Recorded in the model for provenance; the trainer itself is fully
    /// deterministic and draws no random numbers.
    pub seed: u64,
}

impl Default for GbrtConfig {
    fn default() -> Self {
        Self {
            num_trees: 300,
            learning_rate: 0.1,
            max_leaves: 31,
            min_samples_per_leaf: 20,
            histogram_bins: 255,
            lambda_l2: 0.0,
            seed: 0,
        }
    }
}

impl GbrtConfig {
    pub fn validate(&self) -> Result<(), GbrtError> {
        if self.num_trees == 0 {
            return Err(GbrtError::InvalidConfig("num_trees must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(GbrtError::InvalidConfig(
                "learning_rate must lie in (0, 1]".into(),
            ));
        }
        if self.max_leaves < 2 {
            return Err(GbrtError::InvalidConfig("max_leaves must be at least 2".into()));
        }
        if self.min_samples_per_leaf == 0 {
            return Err(GbrtError::InvalidConfig(
                "min_samples_per_leaf must be at least 1".into(),
            ));
        }
        if !(2..=255).contains(&self.histogram_bins) {
            return Err(GbrtError::InvalidConfig(
                "histogram_bins must lie in [2, 255]".into(),
            ));
        }
        if !(self.lambda_l2 >= 0.0 && self.lambda_l2.is_finite()) {
            return Err(GbrtError::InvalidConfig(
                "lambda_l2 must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// One node of a regression tree. Numeric splits route `value <= threshold`
/// left; categorical splits route rows whose code is in `categories`
/// (sorted) left, and any unseen code right.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum TreeNode {
    NumericSplit {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
        gain: f64,
        count: usize,
    },
    CategoricalSplit {
        feature: usize,
        categories: Vec<u32>,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
        gain: f64,
        count: usize,
    },
    Leaf { value: f64, count: usize },
}

impl TreeNode {
    /// Routes one feature row from this node down to a leaf and returns the
    /// leaf value (unscaled: callers apply the ensemble learning rate).
    pub fn predict(&self, row: &[f64]) -> f64 {
        match self {
            TreeNode::Leaf { value, .. } => *value,
            TreeNode::NumericSplit {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                if row[*feature] <= *threshold {
                    left.predict(row)
                } else {
                    right.predict(row)
                }
            }
            TreeNode::CategoricalSplit {
                feature,
                categories,
                left,
                right,
                ..
            } => {
                let code = row[*feature] as u32;
                if categories.binary_search(&code).is_ok() {
                    left.predict(row)
                } else {
                    right.predict(row)
                }
            }
        }
    }

    fn accumulate_gain(&self, totals: &mut [f64]) {
        match self {
            TreeNode::Leaf { .. } => {}
            TreeNode::NumericSplit {
                feature,
                left,
                right,
                gain,
                ..
            }
            | TreeNode::CategoricalSplit {
                feature,
                left,
                right,
                gain,
                ..
            } => {
                totals[*feature] += gain;
                left.accumulate_gain(totals);
                right.accumulate_gain(totals);
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::NumericSplit { left, right, .. }
            | TreeNode::CategoricalSplit { left, right, .. } => {
                left.leaf_count() + right.leaf_count()
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn min_leaf_samples(&self) -> usize {
        match self {
            TreeNode::Leaf { count, .. } => *count,
            TreeNode::NumericSplit { left, right, .. }
            | TreeNode::CategoricalSplit { left, right, .. } => {
                left.min_leaf_samples().min(right.min_leaf_samples())
            }
        }
    }
}

/// A trained boosted ensemble, including everything needed to score new
/// records: the feature schema fingerprint, category dictionaries from
/// training, and the per-tree structure.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GbrtModel {
    pub base_score: f64,
    pub learning_rate: f64,
    pub schema_hash: String,
    pub feature_names: Vec<String>,
    pub dictionaries: Dictionaries,
    pub trees: Vec<TreeNode>,
    /// Training RMSE after each stage.
    pub train_rmse: Vec<f64>,
    pub config: GbrtConfig,
}

fn schema_hash_hex(schema: &crate::features::FeatureSchema) -> String {
    format!("{:016x}", schema.hash())
}

/// Fits a boosted ensemble to `labels` with squared-error loss.
///
/// When every label is bitwise identical the model is just that constant
/// and contains no trees. Boosting also stops early when no leaf admits a
/// positive-gain split.
pub fn train(
    features: &FeatureMatrix,
    labels: &[f64],
    config: &GbrtConfig,
) -> Result<GbrtModel, GbrtError> {
    config.validate()?;
    let n = features.n_rows();
    if labels.len() != n {
        return Err(GbrtError::LengthMismatch {
            labels: labels.len(),
            rows: n,
        });
    }
    if n == 0 {
        return Err(GbrtError::InsufficientData { need: 1, got: 0 });
    }
    for (i, l) in labels.iter().enumerate() {
        if !l.is_finite() {
            return Err(GbrtError::NonFiniteLabel(i));
        }
    }

    let constant = labels.iter().all(|l| l.to_bits() == labels[0].to_bits());
    if constant {
        return Ok(GbrtModel {
            base_score: labels[0],
            learning_rate: config.learning_rate,
            schema_hash: schema_hash_hex(features.schema()),
            feature_names: features
                .schema()
                .columns()
                .iter()
                .map(|c| c.name.clone())
                .collect(),
            dictionaries: features.dictionaries().clone(),
            trees: Vec::new(),
            train_rmse: Vec::new(),
            config: config.clone(),
        });
    }

    let binned = binning::bin_matrix(features, config.histogram_bins)?;
    let base_score = labels.iter().sum::<f64>() / n as f64;
    let mut residuals: Vec<f64> = labels.iter().map(|l| l - base_score).collect();
    let mut trees = Vec::new();
    let mut train_rmse = Vec::new();

    for _ in 0..config.num_trees {
        let Some(grown) = train::grow_tree(&binned, &residuals, config) else {
            break;
        };
        for (rows, value) in &grown.leaves {
            let step = config.learning_rate * value;
            for &r in rows {
                residuals[r as usize] -= step;
            }
        }
        trees.push(grown.root);
        let mse = residuals.iter().map(|r| r * r).sum::<f64>() / n as f64;
        train_rmse.push(mse.sqrt());
    }

    Ok(GbrtModel {
        base_score,
        learning_rate: config.learning_rate,
        schema_hash: schema_hash_hex(features.schema()),
        feature_names: features
            .schema()
            .columns()
            .iter()
            .map(|c| c.name.clone())
            .collect(),
        dictionaries: features.dictionaries().clone(),
        trees,
        train_rmse,
        config: config.clone(),
    })
}

impl GbrtModel {
    /// Scores every row of `features`, which must carry the same schema the
    /// model was trained on. Rows must also be encoded with the model's
    /// dictionaries (see `extract_features_with_dicts`) for categorical
    /// codes to mean the same thing.
    pub fn predict(&self, features: &FeatureMatrix) -> Result<Vec<f64>, GbrtError> {
        let found = schema_hash_hex(features.schema());
        if found != self.schema_hash {
            return Err(GbrtError::SchemaMismatch {
                expected: self.schema_hash.clone(),
                found,
            });
        }
        Ok(crate::exec::map_indexed(features.n_rows(), |r| {
            self.predict_row(features.row(r))
        }))
    }

    /// Scores one already-encoded row.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut score = self.base_score;
        for tree in &self.trees {
            score += self.learning_rate * tree.predict(row);
        }
        score
    }

    /// Total split gain attributed to each feature, in schema order.
    pub fn importance_totals(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.feature_names.len()];
        for tree in &self.trees {
            tree.accumulate_gain(&mut totals);
        }
        totals
    }

    /// Gain importance per feature, normalized so the largest is 1.0 and
    /// sorted descending; ties keep schema order. All zeros (a tree-less
    /// model) stay zero.
    pub fn feature_importance(&self) -> Vec<(String, f64)> {
        let totals = self.importance_totals();
        let max = totals.iter().fold(0.0f64, |m, t| m.max(*t));
        let mut named: Vec<(String, f64)> = self
            .feature_names
            .iter()
            .cloned()
            .zip(totals.iter().map(|t| if max > 0.0 { t / max } else { 0.0 }))
            .collect();
        named.sort_by(|a, b| b.1.total_cmp(&a.1));
        named
    }

    /// Writes the model as a single JSON document.
    pub fn save(&self, path: &Path) -> Result<(), GbrtError> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    /// Reads a model written by [`GbrtModel::save`].
    pub fn load(path: &Path) -> Result<Self, GbrtError> {
        let r = BufReader::new(File::open(path)?);
        let model: GbrtModel = serde_json::from_reader(r)?;
        model.config.validate()?;
        Ok(model)
    }
}
