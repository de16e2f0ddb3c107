//! Split search and leaf-wise tree growth.
//!
//! Split finding runs per feature over residual histograms; features are
//! searched in parallel and reduced in feature order, so the chosen split is
//! independent of thread count. Numeric features scan bin boundaries in
//! order; categorical features sort present categories by mean residual and
//! scan prefixes, which is optimal for squared error. A split is kept only
//! when its gain clears a small parent-relative epsilon, so exactly-constant
//! residuals never split.

use crate::exec;

use super::binning::{BinnedMatrix, ColumnBins};
use super::{GbrtConfig, TreeNode};

#[derive(Debug, Clone)]
pub(crate) enum CandidateKind {
    Numeric { cut_bin: u16, threshold: f64 },
    Categorical { left_cats: Vec<u32> },
}

#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub gain: f64,
    pub feature: usize,
    pub kind: CandidateKind,
}

fn leaf_score(sum: f64, count: usize, lambda: f64) -> f64 {
    sum * sum / (count as f64 + lambda)
}

fn split_gain(
    left_sum: f64,
    left_count: usize,
    total_sum: f64,
    total_count: usize,
    lambda: f64,
) -> f64 {
    let right_sum = total_sum - left_sum;
    let right_count = total_count - left_count;
    leaf_score(left_sum, left_count, lambda) + leaf_score(right_sum, right_count, lambda)
        - leaf_score(total_sum, total_count, lambda)
}

/// Smallest gain worth splitting on, relative to the parent score. Exactly
/// constant residuals produce gains at float-noise level and must not split.
fn min_gain(parent_score: f64) -> f64 {
    1e-12 * (1.0 + parent_score.abs())
}

/// Residual histogram for one feature over the node's rows.
fn histogram(column_codes: &[u16], n_bins: usize, rows: &[u32], residuals: &[f64]) -> Vec<(f64, u32)> {
    let mut hist = vec![(0.0f64, 0u32); n_bins];
    for &r in rows {
        let b = column_codes[r as usize] as usize;
        let cell = &mut hist[b];
        cell.0 += residuals[r as usize];
        cell.1 += 1;
    }
    hist
}

fn scan_numeric(
    hist: &[(f64, u32)],
    edges: &[f64],
    total_sum: f64,
    total_count: usize,
    config: &GbrtConfig,
) -> Option<(f64, u16, f64)> {
    let ms = config.min_samples_per_leaf;
    let lambda = config.lambda_l2;
    let floor = min_gain(leaf_score(total_sum, total_count, lambda));
    let mut best: Option<(f64, u16, f64)> = None;
    let mut left_sum = 0.0;
    let mut left_count = 0usize;
    for (b, &(sum, count)) in hist.iter().enumerate().take(edges.len()) {
        left_sum += sum;
        left_count += count as usize;
        if left_count < ms || total_count - left_count < ms {
            continue;
        }
        let gain = split_gain(left_sum, left_count, total_sum, total_count, lambda);
        if gain > floor && best.as_ref().is_none_or(|(g, _, _)| gain > *g) {
            best = Some((gain, b as u16, edges[b]));
        }
    }
    best
}

fn scan_categorical(
    hist: &[(f64, u32)],
    total_sum: f64,
    total_count: usize,
    config: &GbrtConfig,
) -> Option<(f64, Vec<u32>)> {
    let ms = config.min_samples_per_leaf;
    let lambda = config.lambda_l2;
    let floor = min_gain(leaf_score(total_sum, total_count, lambda));
    // Present categories ordered by mean residual (codes break ties), then
    // scanned as if ordinal; the best prefix is the optimal subset.
    let mut present: Vec<(u32, f64, u32)> = hist
        .iter()
        .enumerate()
        .filter(|(_, (_, count))| *count > 0)
        .map(|(code, &(sum, count))| (code as u32, sum, count))
        .collect();
    if present.len() < 2 {
        return None;
    }
    present.sort_by(|a, b| {
        let mean_a = a.1 / a.2 as f64;
        let mean_b = b.1 / b.2 as f64;
        mean_a.total_cmp(&mean_b).then(a.0.cmp(&b.0))
    });
    let mut best: Option<(f64, usize)> = None;
    let mut left_sum = 0.0;
    let mut left_count = 0usize;
    for (i, &(_, sum, count)) in present.iter().enumerate().take(present.len() - 1) {
        left_sum += sum;
        left_count += count as usize;
        if left_count < ms || total_count - left_count < ms {
            continue;
        }
        let gain = split_gain(left_sum, left_count, total_sum, total_count, lambda);
        if gain > floor && best.as_ref().is_none_or(|(g, _)| gain > *g) {
            best = Some((gain, i));
        }
    }
    best.map(|(gain, prefix)| {
        let mut left_cats: Vec<u32> = present[..=prefix].iter().map(|p| p.0).collect();
        left_cats.sort_unstable();
        (gain, left_cats)
    })
}

/// Best split over all features for the node covering `rows`, or `None` when
/// no admissible split has positive gain. Ties in gain resolve to the lowest
/// feature index.
pub(crate) fn best_split_for_node(
    binned: &BinnedMatrix,
    rows: &[u32],
    residuals: &[f64],
    sum: f64,
    config: &GbrtConfig,
) -> Option<Candidate> {
    let total_count = rows.len();
    if total_count < 2 * config.min_samples_per_leaf {
        return None;
    }
    let per_feature: Vec<Option<Candidate>> =
        exec::map_indexed(binned.columns.len(), |feature| {
            let column = &binned.columns[feature];
            let hist = histogram(&column.codes, column.n_bins(), rows, residuals);
            match &column.bins {
                ColumnBins::Numeric { edges } => {
                    scan_numeric(&hist, edges, sum, total_count, config).map(
                        |(gain, cut_bin, threshold)| Candidate {
                            gain,
                            feature,
                            kind: CandidateKind::Numeric { cut_bin, threshold },
                        },
                    )
                }
                ColumnBins::Categorical { .. } => scan_categorical(&hist, sum, total_count, config)
                    .map(|(gain, left_cats)| Candidate {
                        gain,
                        feature,
                        kind: CandidateKind::Categorical { left_cats },
                    }),
            }
        });
    let mut best: Option<Candidate> = None;
    for cand in per_feature.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| cand.gain > b.gain) {
            best = Some(cand);
        }
    }
    best
}

fn route_left(binned: &BinnedMatrix, candidate: &Candidate, row: u32) -> bool {
    let code = binned.columns[candidate.feature].codes[row as usize];
    match &candidate.kind {
        CandidateKind::Numeric { cut_bin, .. } => code <= *cut_bin,
        CandidateKind::Categorical { left_cats } => {
            left_cats.binary_search(&(code as u32)).is_ok()
        }
    }
}

enum ArenaNode {
    Pending {
        rows: Vec<u32>,
        sum: f64,
        candidate: Option<Candidate>,
    },
    Internal {
        candidate: Candidate,
        count: usize,
        left: usize,
        right: usize,
    },
}

/// One grown tree plus the training-row partition of its leaves.
pub(crate) struct GrownTree {
    pub root: TreeNode,
    /// `(rows, leaf_value)` per leaf, for residual updates.
    pub leaves: Vec<(Vec<u32>, f64)>,
}

/// Grows one tree leaf-wise: repeatedly split the pending leaf with the
/// largest gain until `max_leaves` is reached or no admissible split
/// remains. Returns `None` when even the root cannot split.
pub(crate) fn grow_tree(
    binned: &BinnedMatrix,
    residuals: &[f64],
    config: &GbrtConfig,
) -> Option<GrownTree> {
    let all_rows: Vec<u32> = (0..binned.n_rows as u32).collect();
    let root_sum: f64 = residuals.iter().sum();
    let root_candidate = best_split_for_node(binned, &all_rows, residuals, root_sum, config)?;
    let mut arena = vec![ArenaNode::Pending {
        rows: all_rows,
        sum: root_sum,
        candidate: Some(root_candidate),
    }];
    let mut n_leaves = 1usize;

    while n_leaves < config.max_leaves {
        // Pending leaf with the largest gain; ties resolve to the earliest
        // created node.
        let mut pick: Option<(usize, f64)> = None;
        for (i, node) in arena.iter().enumerate() {
            if let ArenaNode::Pending {
                candidate: Some(c), ..
            } = node
            {
                if pick.is_none_or(|(_, g)| c.gain > g) {
                    pick = Some((i, c.gain));
                }
            }
        }
        let Some((idx, _)) = pick else { break };

        let (rows, sum, candidate) = match std::mem::replace(
            &mut arena[idx],
            ArenaNode::Pending {
                rows: Vec::new(),
                sum: 0.0,
                candidate: None,
            },
        ) {
            ArenaNode::Pending {
                rows,
                sum,
                candidate,
            } => (rows, sum, candidate.expect("picked leaf has candidate")),
            ArenaNode::Internal { .. } => unreachable!("picked node is pending"),
        };

        let mut left_rows = Vec::new();
        let mut right_rows = Vec::new();
        for &r in &rows {
            if route_left(binned, &candidate, r) {
                left_rows.push(r);
            } else {
                right_rows.push(r);
            }
        }
        let left_sum: f64 = left_rows.iter().map(|&r| residuals[r as usize]).sum();
        let right_sum = sum - left_sum;

        let left_candidate = best_split_for_node(binned, &left_rows, residuals, left_sum, config);
        let right_candidate =
            best_split_for_node(binned, &right_rows, residuals, right_sum, config);

        let left_idx = arena.len();
        arena.push(ArenaNode::Pending {
            rows: left_rows,
            sum: left_sum,
            candidate: left_candidate,
        });
        let right_idx = arena.len();
        arena.push(ArenaNode::Pending {
            rows: right_rows,
            sum: right_sum,
            candidate: right_candidate,
        });
        arena[idx] = ArenaNode::Internal {
            candidate,
            count: rows.len(),
            left: left_idx,
            right: right_idx,
        };
        n_leaves += 1;
    }

    let mut leaves = Vec::with_capacity(n_leaves);
    let root = finalize(&mut arena, 0, config, &mut leaves);
    Some(GrownTree { root, leaves })
}

fn finalize(
    arena: &mut Vec<ArenaNode>,
    idx: usize,
    config: &GbrtConfig,
    leaves: &mut Vec<(Vec<u32>, f64)>,
) -> TreeNode {
    let node = std::mem::replace(
        &mut arena[idx],
        ArenaNode::Pending {
            rows: Vec::new(),
            sum: 0.0,
            candidate: None,
        },
    );
    match node {
        ArenaNode::Pending { rows, sum, .. } => {
            let value = sum / (rows.len() as f64 + config.lambda_l2);
            let count = rows.len();
            leaves.push((rows, value));
            TreeNode::Leaf { value, count }
        }
        ArenaNode::Internal {
            candidate,
            count,
            left,
            right,
        } => {
            let left_node = finalize(arena, left, config, leaves);
            let right_node = finalize(arena, right, config, leaves);
            match candidate.kind {
                CandidateKind::Numeric { threshold, .. } => TreeNode::NumericSplit {
                    feature: candidate.feature,
                    threshold,
                    left: Box::new(left_node),
                    right: Box::new(right_node),
                    gain: candidate.gain,
                    count,
                },
                CandidateKind::Categorical { left_cats } => TreeNode::CategoricalSplit {
                    feature: candidate.feature,
                    categories: left_cats,
                    left: Box::new(left_node),
                    right: Box::new(right_node),
                    gain: candidate.gain,
                    count,
                },
            }
        }
    }
}
