//! Histogram pre-binning of the design matrix.
//!
//! Numeric columns are quantile-binned once per training run: boundaries sit
//! at midpoints between adjacent distinct values, chosen greedily so bins
//! hold roughly equal row counts, capped at `histogram_bins`. When a column
//! has no more distinct values than bins, every distinct value gets its own
//! bin and split finding is exact. Categorical columns use their integer
//! codes directly as bins.

use crate::features::{FeatureKind, FeatureMatrix};

use super::GbrtError;

#[derive(Debug, Clone)]
pub(crate) enum ColumnBins {
    /// Ascending upper boundaries; bin `b` holds values `<= edges[b]` (and
    /// greater than the previous edge). `edges.len() + 1` bins in total.
    Numeric { edges: Vec<f64> },
    /// Category codes are the bins.
    Categorical { n_cats: u32 },
}

#[derive(Debug, Clone)]
pub(crate) struct BinnedColumn {
    pub bins: ColumnBins,
    /// Per-row bin index.
    pub codes: Vec<u16>,
}

impl BinnedColumn {
    pub fn n_bins(&self) -> usize {
        match &self.bins {
            ColumnBins::Numeric { edges } => edges.len() + 1,
            ColumnBins::Categorical { n_cats } => *n_cats as usize,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BinnedMatrix {
    pub columns: Vec<BinnedColumn>,
    pub n_rows: usize,
}

/// Quantile-ish bin edges over the sorted column. Boundaries are midpoints
/// between adjacent distinct values, so a raw-value comparison against an
/// edge can never tie on training data.
fn numeric_edges(sorted: &[f64], max_bins: usize) -> Vec<f64> {
    // Distinct values with multiplicities.
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for &v in sorted {
        match distinct.last_mut() {
            Some((last, count)) if *last == v => *count += 1,
            _ => distinct.push((v, 1)),
        }
    }
    let mut edges = Vec::new();
    if distinct.len() <= max_bins {
        for pair in distinct.windows(2) {
            edges.push(0.5 * (pair[0].0 + pair[1].0));
        }
        return edges;
    }
    let mut remaining = sorted.len();
    let mut bins_left = max_bins;
    let mut acc = 0usize;
    for (i, (value, count)) in distinct.iter().enumerate() {
        acc += count;
        if bins_left > 1 && i + 1 < distinct.len() {
            // Greedy equal-count fill: close the bin once it reaches its
            // fair share of the remaining rows.
            let target = remaining.div_ceil(bins_left);
            if acc >= target {
                edges.push(0.5 * (value + distinct[i + 1].0));
                remaining -= acc;
                acc = 0;
                bins_left -= 1;
            }
        }
    }
    edges
}

fn bin_of(edges: &[f64], v: f64) -> u16 {
    edges.partition_point(|e| *e < v) as u16
}

/// Bins every column of the matrix. Fails on non-finite values or
/// categorical cardinality beyond `u16` range.
pub(crate) fn bin_matrix(
    features: &FeatureMatrix,
    max_bins: usize,
) -> Result<BinnedMatrix, GbrtError> {
    let n_rows = features.n_rows();
    let width = features.schema().len();
    let columns: Vec<Result<BinnedColumn, GbrtError>> = crate::exec::map_indexed(width, |c| {
        let values = features.column(c);
        for (r, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(GbrtError::NonFiniteFeature { row: r, col: c });
            }
        }
        match features.schema().column(c).kind {
            FeatureKind::Categorical => {
                let max_code = values.iter().fold(0.0f64, |m, v| m.max(*v));
                let n_cats = max_code as u32 + 1;
                if n_cats > u16::MAX as u32 {
                    return Err(GbrtError::TooManyCategories { col: c });
                }
                let codes = values.iter().map(|v| *v as u16).collect();
                Ok(BinnedColumn {
                    bins: ColumnBins::Categorical { n_cats },
                    codes,
                })
            }
            _ => {
                let mut sorted = values.clone();
                sorted.sort_by(f64::total_cmp);
                let edges = numeric_edges(&sorted, max_bins);
                let codes = values.iter().map(|v| bin_of(&edges, *v)).collect();
                Ok(BinnedColumn {
                    bins: ColumnBins::Numeric { edges },
                    codes,
                })
            }
        }
    });
    let mut out = Vec::with_capacity(width);
    for c in columns {
        out.push(c?);
    }
    Ok(BinnedMatrix {
        columns: out,
        n_rows,
    })
}
