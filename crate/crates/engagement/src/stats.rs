//! Small numeric kernel shared by the pipeline stages.
//!
//! Everything here is exact-contract code: variance stabilization, sample
//! covariance, a cyclic Jacobi eigensolver for small symmetric matrices,
//! Spearman rank correlation with fractional tie ranks, regression metrics,
//! and linearly interpolated empirical quantiles. The eigensolver is limited
//! to the small dimensions used by the response analysis (D <= 16).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{EngagementVector, StabilizedVector};

/// Largest matrix dimension the Jacobi kernel accepts.
pub const MAX_EIGEN_DIM: usize = 16;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least {need} rows, got {got}")]
    InsufficientRows { need: usize, got: usize },
    #[error("lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix dimension {0} exceeds the kernel limit {MAX_EIGEN_DIM}")]
    DimensionTooLarge(usize),
    #[error("eigendecomposition did not converge within {JACOBI_MAX_SWEEPS} sweeps")]
    NoConvergence,
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("empty input")]
    Empty,
    #[error("quantile level must lie in (0, 1), got {0}")]
    BadQuantile(f64),
}

/// Dense row-major matrix of observations (rows) by variables (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DataMatrix {
    /// Builds a matrix from flat row-major data. Panics if the length does
    /// not equal `rows * cols`.
    pub fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "flat data length mismatch");
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// Frobenius norm.
    pub fn norm_f(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Eigen decomposition of a symmetric matrix: eigenvalues in descending
/// order, `eigenvectors[k]` the unit-norm vector paired with
/// `eigenvalues[k]`. Each vector's largest-magnitude component is positive
/// (ties broken toward the lowest index), which pins the otherwise arbitrary
/// sign.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
}

/// Componentwise variance stabilization `ln(count + 1)`.
pub fn stabilize(raw: &EngagementVector) -> StabilizedVector {
    StabilizedVector {
        retweets: ((raw.retweets + 1) as f64).ln(),
        replies: ((raw.replies + 1) as f64).ln(),
        favorites: ((raw.favorites + 1) as f64).ln(),
    }
}

/// Sample covariance matrix (1/(N-1) normalization) and the column means.
/// Requires at least two rows.
pub fn covariance_matrix(data: &DataMatrix) -> Result<(DataMatrix, Vec<f64>), StatsError> {
    let n = data.rows();
    let d = data.cols();
    if n < 2 {
        return Err(StatsError::InsufficientRows { need: 2, got: n });
    }
    let mut means = vec![0.0; d];
    for r in 0..n {
        for (c, m) in means.iter_mut().enumerate() {
            *m += data.get(r, c);
        }
    }
    for m in means.iter_mut() {
        *m /= n as f64;
    }
    let mut cov = DataMatrix::zeros(d, d);
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let mut acc = 0.0;
            for r in 0..n {
                acc += (data.get(r, i) - means[i]) * (data.get(r, j) - means[j]);
            }
            let v = acc / denom;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }
    Ok((cov, means))
}

/// Eigen decomposition of a small symmetric matrix via cyclic Jacobi
/// rotations. Sweeps run until the off-diagonal Frobenius mass drops below
/// `1e-12 * ||A||_F`, failing after 100 sweeps.
pub fn sym_eigen(a: &DataMatrix) -> Result<EigenResult, StatsError> {
    let d = a.rows();
    if a.cols() != d {
        return Err(StatsError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if d == 0 {
        return Err(StatsError::Empty);
    }
    if d > MAX_EIGEN_DIM {
        return Err(StatsError::DimensionTooLarge(d));
    }
    let max_abs = a
        .row(0)
        .iter()
        .chain((1..d).flat_map(|r| a.row(r).iter()))
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let mut asym = 0.0f64;
    for i in 0..d {
        for j in (i + 1)..d {
            asym = asym.max((a.get(i, j) - a.get(j, i)).abs());
        }
    }
    if asym > 1e-9 * (1.0 + max_abs) {
        return Err(StatsError::NotSymmetric(asym));
    }

    let norm = a.norm_f();
    let mut m = a.clone();
    // Accumulated rotations; columns become the eigenvectors.
    let mut v = DataMatrix::zeros(d, d);
    for i in 0..d {
        v.set(i, i, 1.0);
    }

    let off_mass = |m: &DataMatrix| -> f64 {
        let mut acc = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                acc += 2.0 * m.get(i, j) * m.get(i, j);
            }
        }
        acc.sqrt()
    };

    let mut converged = norm == 0.0;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged || off_mass(&m) < JACOBI_TOL * norm {
            converged = true;
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                m.set(p, p, app - t * apq);
                m.set(q, q, aqq + t * apq);
                m.set(p, q, 0.0);
                m.set(q, p, 0.0);
                for r in 0..d {
                    if r != p && r != q {
                        let arp = m.get(r, p);
                        let arq = m.get(r, q);
                        m.set(r, p, arp - s * (arq + tau * arp));
                        m.set(p, r, m.get(r, p));
                        m.set(r, q, arq + s * (arp - tau * arq));
                        m.set(q, r, m.get(r, q));
                    }
                }
                for r in 0..d {
                    let vrp = v.get(r, p);
                    let vrq = v.get(r, q);
                    v.set(r, p, vrp - s * (vrq + tau * vrp));
                    v.set(r, q, vrq + s * (vrp - tau * vrq));
                }
            }
        }
    }
    if !converged && off_mass(&m) >= JACOBI_TOL * norm {
        return Err(StatsError::NoConvergence);
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| m.get(j, j).total_cmp(&m.get(i, i)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| m.get(i, i)).collect();
    let eigenvectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&col| {
            let mut vec: Vec<f64> = (0..d).map(|r| v.get(r, col)).collect();
            let mut arg = 0;
            for (i, x) in vec.iter().enumerate() {
                if x.abs() > vec[arg].abs() {
                    arg = i;
                }
            }
            if vec[arg] < 0.0 {
                for x in vec.iter_mut() {
                    *x = -*x;
                }
            }
            vec
        })
        .collect();
    Ok(EigenResult {
        eigenvalues,
        eigenvectors,
    })
}

/// Fractional (average) ranks, 1-based. Tied values share the mean of the
/// positions they occupy.
fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share the average 1-based rank.
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (x, y) in a.iter().zip(b) {
        num += (x - ma) * (y - mb);
        da += (x - ma) * (x - ma);
        db += (y - mb) * (y - mb);
    }
    if da == 0.0 || db == 0.0 {
        return Err(StatsError::Degenerate("constant input to correlation"));
    }
    Ok(num / (da.sqrt() * db.sqrt()))
}

/// Spearman rank correlation with fractional tie ranks: the Pearson
/// correlation of the two rank vectors. Errors on length mismatch, length
/// < 2, or an all-constant side.
pub fn spearman_rho(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(StatsError::InsufficientRows {
            need: 2,
            got: a.len(),
        });
    }
    pearson(&fractional_ranks(a), &fractional_ranks(b))
}

/// Coefficient of determination `1 - SS_res / SS_tot`. Errors when the
/// targets have zero variance.
pub fn r_squared(y_true: &[f64], y_pred: &[f64]) -> Result<f64, StatsError> {
    if y_true.len() != y_pred.len() {
        return Err(StatsError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.len() < 2 {
        return Err(StatsError::InsufficientRows {
            need: 2,
            got: y_true.len(),
        });
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let ss_tot: f64 = y_true.iter().map(|y| (y - mean) * (y - mean)).sum();
    if ss_tot == 0.0 {
        return Err(StatsError::Degenerate("zero-variance targets"));
    }
    let ss_res: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(y, p)| (y - p) * (y - p))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Root mean squared error.
pub fn rmse(y_true: &[f64], y_pred: &[f64]) -> Result<f64, StatsError> {
    if y_true.len() != y_pred.len() {
        return Err(StatsError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.len() < 2 {
        return Err(StatsError::InsufficientRows {
            need: 2,
            got: y_true.len(),
        });
    }
    let ss: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(y, p)| (y - p) * (y - p))
        .sum();
    Ok((ss / y_true.len() as f64).sqrt())
}

/// Empirical quantile with linear interpolation at rank `(n - 1) * q` of the
/// sorted samples. Requires a non-empty sample and `0 < q < 1`.
pub fn empirical_quantile(samples: &[f64], q: f64) -> Result<f64, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::Empty);
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(StatsError::BadQuantile(q));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if frac == 0.0 || lo + 1 == sorted.len() {
        Ok(sorted[lo])
    } else {
        Ok(sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mat(rows: usize, cols: usize, data: &[f64]) -> DataMatrix {
        DataMatrix::from_flat(rows, cols, data.to_vec())
    }

    #[test]
    fn stabilize_zeros_and_ones() {
        let z = stabilize(&EngagementVector::new(0, 0, 0));
        assert_eq!(z.as_array(), [0.0, 0.0, 0.0]);
        let o = stabilize(&EngagementVector::new(1, 1, 1));
        for v in o.as_array() {
            assert_eq!(v, std::f64::consts::LN_2);
        }
    }

    #[test]
    fn stabilize_large_counts() {
        // 1.61M retweets, 69K replies, 4.44M favorites.
        let s = stabilize(&EngagementVector::new(1_610_000, 69_000, 4_440_000));
        assert!((s.retweets - 14.292).abs() < 5e-4, "{}", s.retweets);
        assert!((s.replies - 11.142).abs() < 5e-4, "{}", s.replies);
        assert!((s.favorites - 15.306).abs() < 5e-4, "{}", s.favorites);
    }

    #[test]
    fn covariance_of_identical_rows_is_zero() {
        let data = mat(3, 3, &[0.4, 1.7, 2.2, 0.4, 1.7, 2.2, 0.4, 1.7, 2.2]);
        let (cov, means) = covariance_matrix(&data).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!(cov.get(i, j).abs() < 1e-12);
            }
        }
        assert!((means[0] - 0.4).abs() < 1e-12);
        assert!((means[1] - 1.7).abs() < 1e-12);
        assert!((means[2] - 2.2).abs() < 1e-12);
    }

    #[test]
    fn covariance_single_column() {
        let data = mat(2, 1, &[0.0, 2.0]);
        let (cov, means) = covariance_matrix(&data).unwrap();
        assert_eq!(cov.get(0, 0), 2.0);
        assert_eq!(means[0], 1.0);
    }

    #[test]
    fn covariance_requires_two_rows() {
        let data = mat(1, 2, &[1.0, 2.0]);
        assert!(matches!(
            covariance_matrix(&data),
            Err(StatsError::InsufficientRows { .. })
        ));
    }

    #[test]
    fn covariance_trace_equals_column_variances() {
        let mut data = DataMatrix::zeros(500, 3);
        let mut state = 88172645463325252u64;
        let mut next = || {
            // xorshift; plenty for test data
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for r in 0..500 {
            for c in 0..3 {
                data.set(r, c, next() * (c + 1) as f64);
            }
        }
        let (cov, means) = covariance_matrix(&data).unwrap();
        let trace: f64 = (0..3).map(|i| cov.get(i, i)).sum();
        let mut explicit = 0.0;
        for (c, m) in means.iter().enumerate() {
            let col = data.column(c);
            explicit += col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 499.0;
        }
        assert!((trace - explicit).abs() < 1e-10);
        // Centering: deviations sum to ~0.
        for (c, m) in means.iter().enumerate() {
            let s: f64 = data.column(c).iter().map(|v| v - m).sum();
            assert!(s.abs() < 1e-9);
        }
    }

    #[test]
    fn eigen_identity() {
        let eye = mat(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let e = sym_eigen(&eye).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn eigen_diagonal_sorts_descending_with_axis_vectors() {
        let d = mat(3, 3, &[1.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 2.0]);
        let e = sym_eigen(&d).unwrap();
        assert_eq!(e.eigenvalues, vec![3.0, 2.0, 1.0]);
        assert_eq!(e.eigenvectors[0], vec![0.0, 1.0, 0.0]);
        assert_eq!(e.eigenvectors[1], vec![0.0, 0.0, 1.0]);
        assert_eq!(e.eigenvectors[2], vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn eigen_rank_one_ones_matrix() {
        let ones = mat(3, 3, &[1.0; 9]);
        let e = sym_eigen(&ones).unwrap();
        assert!((e.eigenvalues[0] - 3.0).abs() < 1e-9);
        assert!(e.eigenvalues[1].abs() < 1e-9);
        assert!(e.eigenvalues[2].abs() < 1e-9);
        let inv_sqrt3 = 1.0 / 3.0f64.sqrt();
        for v in &e.eigenvectors[0] {
            assert!((v - inv_sqrt3).abs() < 1e-9);
        }
    }

    #[test]
    fn eigen_rejects_asymmetric_and_oversized() {
        let bad = mat(2, 2, &[1.0, 0.5, 0.2, 1.0]);
        assert!(matches!(sym_eigen(&bad), Err(StatsError::NotSymmetric(_))));
        let big = DataMatrix::zeros(17, 17);
        assert!(matches!(
            sym_eigen(&big),
            Err(StatsError::DimensionTooLarge(17))
        ));
        let rect = DataMatrix::zeros(2, 3);
        assert!(matches!(sym_eigen(&rect), Err(StatsError::NotSquare { .. })));
    }

    #[test]
    fn eigen_invariants_on_random_matrices() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for d in [1usize, 2, 3, 5, 8, 16] {
            let mut a = DataMatrix::zeros(d, d);
            for i in 0..d {
                for j in i..d {
                    let v = next() * 4.0;
                    a.set(i, j, v);
                    a.set(j, i, v);
                }
            }
            let e = sym_eigen(&a).unwrap();
            // Descending order.
            for k in 1..d {
                assert!(e.eigenvalues[k - 1] >= e.eigenvalues[k]);
            }
            // Trace preserved.
            let trace: f64 = (0..d).map(|i| a.get(i, i)).sum();
            let sum: f64 = e.eigenvalues.iter().sum();
            assert!((trace - sum).abs() < 1e-9, "d={d}");
            // Unit norm + pairwise orthogonality.
            for i in 0..d {
                let ni: f64 = e.eigenvectors[i].iter().map(|v| v * v).sum();
                assert!((ni - 1.0).abs() < 1e-9);
                for j in (i + 1)..d {
                    let dot: f64 = e.eigenvectors[i]
                        .iter()
                        .zip(&e.eigenvectors[j])
                        .map(|(x, y)| x * y)
                        .sum();
                    assert!(dot.abs() < 1e-9);
                }
            }
            // Reconstruction A = V diag(L) V^T.
            for i in 0..d {
                for j in 0..d {
                    let mut acc = 0.0;
                    for k in 0..d {
                        acc += e.eigenvalues[k] * e.eigenvectors[k][i] * e.eigenvectors[k][j];
                    }
                    assert!(
                        (acc - a.get(i, j)).abs() < 1e-9,
                        "d={d} ({i},{j}): {acc} vs {}",
                        a.get(i, j)
                    );
                }
            }
            // Sign convention: largest-magnitude component positive.
            for v in &e.eigenvectors {
                let mut arg = 0;
                for (i, x) in v.iter().enumerate() {
                    if x.abs() > v[arg].abs() {
                        arg = i;
                    }
                }
                assert!(v[arg] >= 0.0);
            }
        }
    }

    #[test]
    fn eigen_one_by_one() {
        let a = mat(1, 1, &[5.0]);
        let e = sym_eigen(&a).unwrap();
        assert_eq!(e.eigenvalues, vec![5.0]);
        assert_eq!(e.eigenvectors, vec![vec![1.0]]);
    }

    #[test]
    fn spearman_perfect_and_reversed() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [10.0, 20.0, 30.0, 40.0];
        assert!((spearman_rho(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        let c = [40.0, 30.0, 20.0, 10.0];
        assert!((spearman_rho(&a, &c).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_with_ties_matches_hand_value() {
        // ranks of a: (1.5, 1.5, 3); Pearson vs (1, 2, 3) = sqrt(3)/2.
        let a = [1.0, 1.0, 2.0];
        let b = [1.0, 2.0, 3.0];
        let rho = spearman_rho(&a, &b).unwrap();
        assert!((rho - 3.0f64.sqrt() / 2.0).abs() < 1e-12, "rho = {rho}");
    }

    #[test]
    fn spearman_rejects_degenerate_inputs() {
        assert!(matches!(
            spearman_rho(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(StatsError::Degenerate(_))
        ));
        assert!(matches!(
            spearman_rho(&[1.0, 2.0], &[1.0]),
            Err(StatsError::LengthMismatch(2, 1))
        ));
        assert!(matches!(
            spearman_rho(&[1.0], &[1.0]),
            Err(StatsError::InsufficientRows { .. })
        ));
    }

    #[test]
    fn fractional_ranks_average_tie_runs() {
        let r = fractional_ranks(&[3.0, 1.0, 3.0, 2.0, 3.0]);
        assert_eq!(r, vec![4.0, 1.0, 4.0, 2.0, 4.0]);
    }

    #[test]
    fn r2_and_rmse_frozen_examples() {
        let y = [0.0, 1.0, 2.0];
        assert_eq!(r_squared(&y, &y).unwrap(), 1.0);
        assert_eq!(rmse(&y, &y).unwrap(), 0.0);
        let mean_pred = [1.0, 1.0, 1.0];
        assert!(r_squared(&y, &mean_pred).unwrap().abs() < 1e-12);
        let off = [0.0, 1.0, 1.0];
        assert!((r_squared(&y, &off).unwrap() - 0.5).abs() < 1e-12);
        assert!((rmse(&y, &off).unwrap() - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(matches!(
            r_squared(&[2.0, 2.0], &[1.0, 3.0]),
            Err(StatsError::Degenerate(_))
        ));
    }

    #[test]
    fn quantile_frozen_examples() {
        let v: Vec<f64> = (0..=100).map(|i| i as f64).collect();
        assert_eq!(empirical_quantile(&v, 0.95).unwrap(), 95.0);
        assert_eq!(empirical_quantile(&[1.0, 2.0, 3.0, 4.0], 0.5).unwrap(), 2.5);
        assert_eq!(empirical_quantile(&[7.0], 0.5).unwrap(), 7.0);
        assert!(matches!(
            empirical_quantile(&[], 0.5),
            Err(StatsError::Empty)
        ));
        assert!(matches!(
            empirical_quantile(&[1.0], 1.0),
            Err(StatsError::BadQuantile(_))
        ));
        // Unsorted input is handled internally.
        assert_eq!(empirical_quantile(&[4.0, 1.0, 3.0, 2.0], 0.5).unwrap(), 2.5);
    }

    proptest! {
        #[test]
        fn spearman_is_invariant_under_monotone_maps(
            xs in proptest::collection::vec(-50i32..50, 3..40),
            ys in proptest::collection::vec(-50i32..50, 3..40),
        ) {
            let n = xs.len().min(ys.len());
            let a: Vec<f64> = xs[..n].iter().map(|&v| v as f64).collect();
            let b: Vec<f64> = ys[..n].iter().map(|&v| v as f64).collect();
            let rho = spearman_rho(&a, &b);
            // x -> 2x + 3 and x -> x^3 are strictly increasing, so the rank
            // vectors are identical and rho must match bitwise.
            let a2: Vec<f64> = a.iter().map(|v| 2.0 * v + 3.0).collect();
            let b2: Vec<f64> = b.iter().map(|v| v.powi(3)).collect();
            let rho2 = spearman_rho(&a2, &b2);
            match (rho, rho2) {
                (Ok(x), Ok(y)) => prop_assert_eq!(x, y),
                (Err(_), Err(_)) => {}
                (x, y) => prop_assert!(false, "mismatch: {:?} vs {:?}", x, y),
            }
        }

        #[test]
        fn quantile_stays_within_range(
            xs in proptest::collection::vec(-1e6f64..1e6, 1..200),
            q in 0.001f64..0.999,
        ) {
            let v = empirical_quantile(&xs, q).unwrap();
            let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(v >= lo && v <= hi);
        }

        #[test]
        fn r2_rmse_consistency(
            pairs in proptest::collection::vec((-100f64..100.0, -100f64..100.0), 2..100),
        ) {
            let y: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let p: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
            prop_assume!(ss_tot > 1e-9);
            let r2 = r_squared(&y, &p).unwrap();
            let e = rmse(&y, &p).unwrap();
            let reconstructed = 1.0 - e * e * y.len() as f64 / ss_tot;
            prop_assert!((r2 - reconstructed).abs() < 1e-9);
        }
    }
}
