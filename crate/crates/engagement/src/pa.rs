//! Parallel analysis: how many principal components of a data matrix carry
//! real structure.
//!
//! Observed covariance eigenvalues are compared rank-by-rank with an upper
//! quantile of eigenvalues obtained from permuted copies of the data. The
//! retained dimension is the length of the leading run of ranks whose
//! observed eigenvalue strictly exceeds its null quantile.
//!
//! Two permutation nulls are supported:
//!
//! * [`PermutationMode::WithinObservation`] (default) shuffles the signal
//!   values inside each row, destroying channel-specific structure while
//!   keeping each observation's value multiset.
//! * [`PermutationMode::AcrossObservations`] shuffles each signal column
//!   across rows, the classic independence null. The first column stays in
//!   place: relabeling rows by a common permutation shows that shuffling
//!   D-1 columns draws from the same null as shuffling all D, and it keeps
//!   the operation an identity on single-column data.
//!
//! Every permutation replica draws from its own ChaCha substream
//! (`seed` fixed, stream = replica index), so replicas can run in parallel
//! and the result is independent of thread count.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::stats::{self, DataMatrix, StatsError};

#[derive(Debug, Error)]
pub enum PaError {
    #[error("need at least {need} rows, got {got}")]
    InsufficientRows { need: usize, got: usize },
    #[error("need at least 2 columns, got {0}")]
    TooFewColumns(usize),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("stats: {0}")]
    Stats(#[from] StatsError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Null-generation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PermutationMode {
    #[serde(rename = "within-observation")]
    WithinObservation,
    #[serde(rename = "across-observations")]
    AcrossObservations,
}

impl std::str::FromStr for PermutationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "within-observation" => Ok(PermutationMode::WithinObservation),
            "across-observations" => Ok(PermutationMode::AcrossObservations),
            other => Err(format!(
                "unknown mode {other:?} (expected within-observation or across-observations)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaConfig {
    /// Number of permutation replicas (Q).
    pub permutations: usize,
    /// Upper quantile of the pooled null eigenvalues, in (0, 1).
    pub quantile: f64,
    pub mode: PermutationMode,
    pub seed: u64,
}

impl Default for PaConfig {
    fn default() -> Self {
        Self {
            permutations: 100,
            quantile: 0.95,
            mode: PermutationMode::WithinObservation,
            seed: 0,
        }
    }
}

impl PaConfig {
    fn validate(&self) -> Result<(), PaError> {
        if self.permutations == 0 {
            return Err(PaError::InvalidConfig(
                "permutations must be positive".to_string(),
            ));
        }
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(PaError::InvalidConfig(format!(
                "quantile must lie in (0, 1), got {}",
                self.quantile
            )));
        }
        Ok(())
    }
}

/// Outcome of a parallel-analysis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaResult {
    /// Observed covariance eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Per-rank null quantiles from the permutation replicas.
    pub null_quantiles: Vec<f64>,
    /// Whether each observed eigenvalue strictly exceeds its null quantile.
    pub exceeds: Vec<bool>,
    /// Length of the leading run of exceedances.
    pub signal_dimension: usize,
    pub config: PaConfig,
}

/// Null eigenvalues pooled by rank: `per_rank[k][r]` is the k-th largest
/// eigenvalue of replica `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct NullPool {
    pub per_rank: Vec<Vec<f64>>,
}

/// Produces one permuted copy of `data` under the given mode, using `rng`.
pub fn permute_replica(
    data: &DataMatrix,
    mode: PermutationMode,
    rng: &mut ChaCha8Rng,
) -> DataMatrix {
    let mut out = data.clone();
    match mode {
        PermutationMode::WithinObservation => {
            for r in 0..out.rows() {
                out.row_mut(r).shuffle(rng);
            }
        }
        PermutationMode::AcrossObservations => {
            for c in 1..out.cols() {
                let mut col = out.column(c);
                col.shuffle(rng);
                for (r, v) in col.into_iter().enumerate() {
                    out.set(r, c, v);
                }
            }
        }
    }
    out
}

fn observed_eigenvalues(data: &DataMatrix) -> Result<Vec<f64>, PaError> {
    let (cov, _) = stats::covariance_matrix(data)?;
    Ok(stats::sym_eigen(&cov)?.eigenvalues)
}

/// Builds the pooled null eigenvalues: one permuted replica per substream,
/// each decomposed like the observed data.
pub fn null_eigenvalue_pool(data: &DataMatrix, config: &PaConfig) -> Result<NullPool, PaError> {
    config.validate()?;
    let d = data.cols();
    let replicas: Vec<Result<Vec<f64>, PaError>> =
        exec::map_indexed(config.permutations, |i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64);
            let permuted = permute_replica(data, config.mode, &mut rng);
            observed_eigenvalues(&permuted)
        });
    let mut per_rank = vec![Vec::with_capacity(config.permutations); d];
    for replica in replicas {
        let eigenvalues = replica?;
        for (k, v) in eigenvalues.into_iter().enumerate() {
            per_rank[k].push(v);
        }
    }
    Ok(NullPool { per_rank })
}

/// Summarizes observed eigenvalues against a null pool at quantile level
/// `config.quantile`. Raising the quantile can only shrink the retained
/// dimension for a fixed pool.
pub fn summarize(
    eigenvalues: Vec<f64>,
    pool: &NullPool,
    config: &PaConfig,
) -> Result<PaResult, PaError> {
    config.validate()?;
    let mut null_quantiles = Vec::with_capacity(pool.per_rank.len());
    for rank in &pool.per_rank {
        null_quantiles.push(stats::empirical_quantile(rank, config.quantile)?);
    }
    let exceeds: Vec<bool> = eigenvalues
        .iter()
        .zip(&null_quantiles)
        .map(|(obs, null)| obs > null)
        .collect();
    let signal_dimension = exceeds.iter().take_while(|e| **e).count();
    Ok(PaResult {
        eigenvalues,
        null_quantiles,
        exceeds,
        signal_dimension,
        config: config.clone(),
    })
}

/// Runs parallel analysis end to end. Requires at least 10 rows and 2
/// columns.
pub fn run_pa(data: &DataMatrix, config: &PaConfig) -> Result<PaResult, PaError> {
    run_pa_with_pool(data, config).map(|(result, _)| result)
}

/// Like [`run_pa`], but also returns the pooled null eigenvalues so callers
/// can export them (see [`write_null_csv`]).
pub fn run_pa_with_pool(
    data: &DataMatrix,
    config: &PaConfig,
) -> Result<(PaResult, NullPool), PaError> {
    if data.rows() < 10 {
        return Err(PaError::InsufficientRows {
            need: 10,
            got: data.rows(),
        });
    }
    if data.cols() < 2 {
        return Err(PaError::TooFewColumns(data.cols()));
    }
    config.validate()?;
    let eigenvalues = observed_eigenvalues(data)?;
    let pool = null_eigenvalue_pool(data, config)?;
    let result = summarize(eigenvalues, &pool, config)?;
    Ok((result, pool))
}

/// Writes the pooled null eigenvalues as CSV (`replica,rank,eigenvalue`) for
/// external plotting.
pub fn write_null_csv(pool: &NullPool, writer: &mut impl Write) -> Result<(), PaError> {
    writeln!(writer, "replica,rank,eigenvalue")?;
    if pool.per_rank.is_empty() {
        return Ok(());
    }
    for replica in 0..pool.per_rank[0].len() {
        for (rank, values) in pool.per_rank.iter().enumerate() {
            writeln!(writer, "{},{},{}", replica, rank + 1, values[replica])?;
        }
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{synth_corpus, SynthConfig};
    use crate::stats::stabilize;

    /// N x 3 stabilized responses of a seeded synthetic corpus.
    pub(crate) fn synth_matrix(n: usize, seed: u64) -> DataMatrix {
        let records = synth_corpus(n, seed, &SynthConfig::default()).unwrap();
        let mut data = Vec::with_capacity(n * 3);
        for r in &records {
            data.extend_from_slice(&stabilize(&r.response).as_array());
        }
        DataMatrix::from_flat(n, 3, data)
    }

    /// N x 3 matrix with mutually independent, identically scaled columns.
    fn independent_matrix(n: usize, seed: u64) -> DataMatrix {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::with_capacity(n * 3);
        for _ in 0..n * 3 {
            data.push(rng.random_range(0.0..4.0));
        }
        DataMatrix::from_flat(n, 3, data)
    }

    #[test]
    fn single_column_permutes_to_itself_in_both_modes() {
        let data = DataMatrix::from_flat(5, 1, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        for mode in [
            PermutationMode::WithinObservation,
            PermutationMode::AcrossObservations,
        ] {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            assert_eq!(permute_replica(&data, mode, &mut rng), data);
        }
    }

    #[test]
    fn within_mode_preserves_row_multisets() {
        let data = synth_matrix(50, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let permuted = permute_replica(&data, PermutationMode::WithinObservation, &mut rng);
        for r in 0..data.rows() {
            let mut orig = data.row(r).to_vec();
            let mut perm = permuted.row(r).to_vec();
            orig.sort_by(f64::total_cmp);
            perm.sort_by(f64::total_cmp);
            assert_eq!(orig, perm, "row {r}");
        }
    }

    #[test]
    fn across_mode_preserves_column_multisets_and_reorders() {
        let data = synth_matrix(60, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let permuted = permute_replica(&data, PermutationMode::AcrossObservations, &mut rng);
        let mut changed = false;
        for c in 0..3 {
            let mut orig = data.column(c);
            let perm_raw = permuted.column(c);
            if orig != perm_raw {
                changed = true;
            }
            let mut perm = perm_raw.clone();
            orig.sort_by(f64::total_cmp);
            perm.sort_by(f64::total_cmp);
            assert_eq!(orig, perm, "column {c}");
        }
        assert!(changed, "at least one column must be reordered");
        // Trace of the covariance is conserved: column variances are
        // permutation-invariant.
        let (cov_a, _) = stats::covariance_matrix(&data).unwrap();
        let (cov_b, _) = stats::covariance_matrix(&permuted).unwrap();
        let ta: f64 = (0..3).map(|i| cov_a.get(i, i)).sum();
        let tb: f64 = (0..3).map(|i| cov_b.get(i, i)).sum();
        assert!((ta - tb).abs() < 1e-9);
    }

    #[test]
    fn rank_one_matrix_yields_dimension_one_under_across_null() {
        // Three identical columns with distinct row values: lambda_1 is the
        // whole trace, the rest is numerically zero. (The within-observation
        // null is the identity on constant rows, so the classic column null
        // is the informative one here.)
        let n = 200;
        let mut data = Vec::with_capacity(n * 3);
        for i in 0..n {
            let v = (i as f64 * 0.37).sin() * 2.0 + 3.0;
            data.extend_from_slice(&[v, v, v]);
        }
        let data = DataMatrix::from_flat(n, 3, data);
        let config = PaConfig {
            mode: PermutationMode::AcrossObservations,
            seed: 5,
            ..PaConfig::default()
        };
        let result = run_pa(&data, &config).unwrap();
        let trace: f64 = result.eigenvalues.iter().sum();
        assert!((result.eigenvalues[0] - trace).abs() < 1e-9 * trace.max(1.0));
        assert!(result.eigenvalues[1].abs() < 1e-9);
        assert!(result.eigenvalues[2].abs() < 1e-9);
        assert_eq!(result.signal_dimension, 1);
    }

    #[test]
    fn synthetic_corpus_has_one_dimension_under_both_modes() {
        let data = synth_matrix(2000, 77);
        for mode in [
            PermutationMode::WithinObservation,
            PermutationMode::AcrossObservations,
        ] {
            let config = PaConfig {
                mode,
                seed: 13,
                ..PaConfig::default()
            };
            let result = run_pa(&data, &config).unwrap();
            assert_eq!(result.signal_dimension, 1, "mode {mode:?}: {result:?}");
        }
    }

    #[test]
    fn independent_columns_have_zero_dimension() {
        // Frozen seeded run: independent columns must not exceed the null.
        let data = independent_matrix(5000, 2024);
        for mode in [
            PermutationMode::WithinObservation,
            PermutationMode::AcrossObservations,
        ] {
            let config = PaConfig {
                mode,
                seed: 99,
                ..PaConfig::default()
            };
            let result = run_pa(&data, &config).unwrap();
            assert_eq!(
                result.signal_dimension, 0,
                "mode {mode:?}: eigenvalues {:?} vs nulls {:?}",
                result.eigenvalues, result.null_quantiles
            );
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let data = synth_matrix(300, 8);
        let config = PaConfig::default();
        let a = run_pa(&data, &config).unwrap();
        let b = run_pa(&data, &config).unwrap();
        assert_eq!(a, b);
        let other = run_pa(
            &data,
            &PaConfig {
                seed: 1,
                ..PaConfig::default()
            },
        )
        .unwrap();
        assert_eq!(a.eigenvalues, other.eigenvalues);
        assert_ne!(a.null_quantiles, other.null_quantiles);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn thread_count_does_not_change_results() {
        let data = synth_matrix(300, 8);
        let config = PaConfig::default();
        let default_pool = run_pa(&data, &config).unwrap();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_pa(&data, &config).unwrap());
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_pa(&data, &config).unwrap());
        assert_eq!(default_pool, single);
        assert_eq!(default_pool, four);
    }

    #[test]
    fn higher_quantile_never_increases_dimension() {
        let data = synth_matrix(500, 21);
        let base = PaConfig::default();
        let eigenvalues = observed_eigenvalues(&data).unwrap();
        let pool = null_eigenvalue_pool(&data, &base).unwrap();
        let mut last_dim = usize::MAX;
        for q in [0.05, 0.5, 0.95, 0.99] {
            let config = PaConfig {
                quantile: q,
                ..base.clone()
            };
            let result = summarize(eigenvalues.clone(), &pool, &config).unwrap();
            assert!(
                result.signal_dimension <= last_dim,
                "q={q}: {} > {last_dim}",
                result.signal_dimension
            );
            last_dim = result.signal_dimension;
        }
    }

    #[test]
    fn result_serializes_with_contract_keys() {
        let data = synth_matrix(100, 2);
        let result = run_pa(&data, &PaConfig::default()).unwrap();
        let json = serde_json::to_value(&result).unwrap();
        assert!(json["eigenvalues"].is_array());
        assert!(json["null_quantiles"].is_array());
        assert!(json["signal_dimension"].is_number());
        assert_eq!(json["config"]["permutations"], 100);
        assert_eq!(json["config"]["quantile"], 0.95);
        assert_eq!(json["config"]["mode"], "within-observation");
    }

    #[test]
    fn null_csv_has_replica_rank_rows() {
        let data = synth_matrix(50, 6);
        let config = PaConfig {
            permutations: 4,
            ..PaConfig::default()
        };
        let pool = null_eigenvalue_pool(&data, &config).unwrap();
        let mut buf = Vec::new();
        write_null_csv(&pool, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "replica,rank,eigenvalue");
        assert_eq!(lines.len(), 1 + 4 * 3);
        assert!(lines[1].starts_with("0,1,"));
    }

    #[test]
    fn preconditions_are_enforced() {
        let tiny = synth_matrix(5, 1);
        assert!(matches!(
            run_pa(&tiny, &PaConfig::default()),
            Err(PaError::InsufficientRows { .. })
        ));
        let narrow = DataMatrix::from_flat(20, 1, vec![0.0; 20]);
        assert!(matches!(
            run_pa(&narrow, &PaConfig::default()),
            Err(PaError::TooFewColumns(1))
        ));
        let data = synth_matrix(100, 1);
        let bad_q = PaConfig {
            quantile: 1.0,
            ..PaConfig::default()
        };
        assert!(matches!(
            run_pa(&data, &bad_q),
            Err(PaError::InvalidConfig(_))
        ));
        let bad_p = PaConfig {
            permutations: 0,
            ..PaConfig::default()
        };
        assert!(matches!(
            run_pa(&data, &bad_p),
            Err(PaError::InvalidConfig(_))
        ));
    }
}
