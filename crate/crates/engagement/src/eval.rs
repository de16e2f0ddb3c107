//! K-fold cross-validated evaluation of response prediction.
//!
//! An experiment trains one boosted model per fold and scores it on the
//! held-out fold. Everything a fold's model sees is derived from that fold's
//! training records only: category dictionaries come from the training rows,
//! and for the compound target the signal parameters are refitted on the
//! training rows (unless a fixed parameter set is supplied). The held-out
//! records influence nothing but the metrics.
//!
//! Reports carry a corpus fingerprint so that results from different targets
//! can only be compared when they were computed on the same records.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write as _};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{
    extract_features, extract_features_with_dicts, label_vector, FeatureError, FeatureSchema,
    Target,
};
use crate::gbrt::{self, GbrtConfig, GbrtError, GbrtModel};
use crate::ingest::TweetRecord;
use crate::signal::{fit_signal, SignalError, SignalParams};
use crate::stats::{r_squared, rmse, spearman_rho, StatsError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid evaluation setup: {0}")]
    InvalidConfig(String),
    #[error("need at least {need} records, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("reports were computed on different corpora ({0} vs {1})")]
    FingerprintMismatch(String, String),
    #[error("comparison needs at least two reports")]
    NothingToCompare,
    #[error("features: {0}")]
    Feature(#[from] FeatureError),
    #[error("model: {0}")]
    Gbrt(#[from] GbrtError),
    #[error("signal: {0}")]
    Signal(#[from] SignalError),
    #[error("stats: {0}")]
    Stats(#[from] StatsError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Where the compound target's signal parameters come from. Irrelevant for
/// the three count targets.
#[derive(Debug, Clone)]
pub enum SignalSource {
    /// Refit on each fold's training rows; the held-out rows never influence
    /// the parameters.
    FoldLocal,
    /// Use one fixed parameter set (a preset or a previously fitted file)
    /// for every fold.
    Fixed(SignalParams),
}

/// Held-out metrics for one fold.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FoldMetrics {
    pub fold: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub r2: f64,
    pub rho: f64,
    pub rmse: f64,
    /// True when the held-out labels or predictions had zero variance; the
    /// affected correlation metrics are reported as 0.
    pub degenerate: bool,
}

/// Cross-validated (or held-out) evaluation of one target.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvalReport {
    pub target: Target,
    /// `"cross-validation"` or `"holdout-70-20-10"`.
    pub protocol: String,
    pub fold_count: usize,
    pub seed: u64,
    /// Fingerprint of the evaluated records; comparisons require equality.
    pub corpus_fingerprint: String,
    /// `"fold-local"`, the fixed parameter provenance, or `"none"` for
    /// count targets.
    pub signal_source: String,
    pub mean_r2: f64,
    pub mean_rho: f64,
    pub mean_rmse: f64,
    pub folds: Vec<FoldMetrics>,
    pub gbrt: GbrtConfig,
}

impl EvalReport {
    /// Writes the report as pretty-printed JSON.
    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    /// Reads a report written by [`EvalReport::save`].
    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let r = BufReader::new(File::open(path)?);
        let report: EvalReport = serde_json::from_reader(r)?;
        report.gbrt.validate()?;
        Ok(report)
    }
}

/// FNV-1a over the serialized records; stable across runs because record
/// serialization has a fixed field order.
pub fn corpus_fingerprint(records: &[TweetRecord]) -> String {
    let mut h = 0xcbf29ce484222325u64;
    for r in records {
        let line = serde_json::to_string(r).expect("record serialization cannot fail");
        for b in line.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h ^= b'\n' as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

/// Splits `0..n` into `k` disjoint folds whose sizes differ by at most one,
/// after a seeded shuffle. Each fold is returned sorted.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidConfig(format!(
            "need at least 2 folds, got {k}"
        )));
    }
    if n < k {
        return Err(EvalError::InsufficientData { need: k, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold: Vec<usize> = order[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    Ok(folds)
}

fn metric_or_degenerate(
    value: Result<f64, StatsError>,
    flag: &mut bool,
) -> Result<f64, EvalError> {
    match value {
        Ok(v) => Ok(v),
        Err(StatsError::Degenerate(_)) => {
            *flag = true;
            Ok(0.0)
        }
        Err(e) => Err(e.into()),
    }
}

/// A model trained on one fold's training rows, plus the signal parameters
/// its labels were projected with (compound target only).
struct FittedFold {
    model: GbrtModel,
    params: Option<SignalParams>,
    train_rows: usize,
}

/// Trains on `train_idx` only: signal parameters, dictionaries, and the
/// model all come from those rows.
fn fit_fold(
    records: &[TweetRecord],
    schema: &FeatureSchema,
    train_idx: &[usize],
    target: Target,
    signal_source: &SignalSource,
    config: &GbrtConfig,
) -> Result<FittedFold, EvalError> {
    let train_records: Vec<TweetRecord> = train_idx.iter().map(|&i| records[i].clone()).collect();

    let params = match (target, signal_source) {
        (Target::Engagement, SignalSource::FoldLocal) => {
            let responses: Vec<_> = train_records.iter().map(|r| r.response).collect();
            Some(fit_signal(&responses)?)
        }
        (Target::Engagement, SignalSource::Fixed(p)) => Some(p.clone()),
        _ => None,
    };

    let train_matrix = extract_features(&train_records, schema)?;
    let train_labels = label_vector(&train_records, target, params.as_ref())?;
    let model = gbrt::train(&train_matrix, &train_labels, config)?;
    Ok(FittedFold {
        model,
        params,
        train_rows: train_records.len(),
    })
}

/// Scores a fitted fold on held-out rows, labeling them with the fold's own
/// signal parameters and encoding them with the fold's dictionaries.
fn score_fold(
    records: &[TweetRecord],
    schema: &FeatureSchema,
    fitted: &FittedFold,
    test_idx: &[usize],
    fold: usize,
    target: Target,
) -> Result<FoldMetrics, EvalError> {
    let test_records: Vec<TweetRecord> = test_idx.iter().map(|&i| records[i].clone()).collect();
    let test_matrix =
        extract_features_with_dicts(&test_records, schema, &fitted.model.dictionaries)?;
    let test_labels = label_vector(&test_records, target, fitted.params.as_ref())?;
    let preds = fitted.model.predict(&test_matrix)?;

    let mut degenerate = false;
    let r2 = metric_or_degenerate(r_squared(&test_labels, &preds), &mut degenerate)?;
    let rho = metric_or_degenerate(spearman_rho(&test_labels, &preds), &mut degenerate)?;
    let fold_rmse = rmse(&test_labels, &preds)?;

    Ok(FoldMetrics {
        fold,
        train_rows: fitted.train_rows,
        test_rows: test_records.len(),
        r2,
        rho,
        rmse: fold_rmse,
        degenerate,
    })
}

/// Runs a `k`-fold experiment for one target and aggregates the held-out
/// metrics. `seed` controls only the fold assignment.
pub fn run_experiment(
    records: &[TweetRecord],
    target: Target,
    k: usize,
    seed: u64,
    config: &GbrtConfig,
    signal_source: &SignalSource,
) -> Result<EvalReport, EvalError> {
    config.validate()?;
    let folds = kfold_split(records.len(), k, seed)?;
    let schema = FeatureSchema::standard();

    let mut fold_metrics = Vec::with_capacity(k);
    for (f, test_idx) in folds.iter().enumerate() {
        let train_idx: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, fold)| fold.iter().copied())
            .collect();
        let fitted = fit_fold(records, &schema, &train_idx, target, signal_source, config)?;
        fold_metrics.push(score_fold(records, &schema, &fitted, test_idx, f, target)?);
    }

    Ok(assemble_report(
        records,
        target,
        "cross-validation",
        k,
        seed,
        fold_metrics,
        config,
        signal_source,
    ))
}

/// Sorted index slices of a holdout split: (train, validation, test).
pub type HoldoutIndices = (Vec<usize>, Vec<usize>, Vec<usize>);

/// Splits `0..n` into 70% training, 20% validation, and 10% test slices
/// (every index lands in exactly one slice) after a seeded shuffle. Each
/// slice is returned sorted.
pub fn holdout_split(n: usize, seed: u64) -> Result<HoldoutIndices, EvalError> {
    if n < 10 {
        return Err(EvalError::InsufficientData { need: 10, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_train = n * 7 / 10;
    let n_valid = n * 2 / 10;
    let mut train = order[..n_train].to_vec();
    let mut valid = order[n_train..n_train + n_valid].to_vec();
    let mut test = order[n_train + n_valid..].to_vec();
    train.sort_unstable();
    valid.sort_unstable();
    test.sort_unstable();
    Ok((train, valid, test))
}

/// Alternative protocol to cross-validation: one 70/20/10 split. Training
/// uses the 70% slice only; the report carries two metric rows, fold 0 for
/// the validation slice and fold 1 for the test slice, and the means
/// average those two rows.
pub fn run_holdout_experiment(
    records: &[TweetRecord],
    target: Target,
    seed: u64,
    config: &GbrtConfig,
    signal_source: &SignalSource,
) -> Result<EvalReport, EvalError> {
    config.validate()?;
    let (train_idx, valid_idx, test_idx) = holdout_split(records.len(), seed)?;
    let schema = FeatureSchema::standard();
    let fitted = fit_fold(records, &schema, &train_idx, target, signal_source, config)?;
    let fold_metrics = vec![
        score_fold(records, &schema, &fitted, &valid_idx, 0, target)?,
        score_fold(records, &schema, &fitted, &test_idx, 1, target)?,
    ];
    Ok(assemble_report(
        records,
        target,
        "holdout-70-20-10",
        2,
        seed,
        fold_metrics,
        config,
        signal_source,
    ))
}

#[allow(clippy::too_many_arguments)]
fn assemble_report(
    records: &[TweetRecord],
    target: Target,
    protocol: &str,
    fold_count: usize,
    seed: u64,
    folds: Vec<FoldMetrics>,
    config: &GbrtConfig,
    signal_source: &SignalSource,
) -> EvalReport {
    let kf = folds.len() as f64;
    let mean_r2 = folds.iter().map(|m| m.r2).sum::<f64>() / kf;
    let mean_rho = folds.iter().map(|m| m.rho).sum::<f64>() / kf;
    let mean_rmse = folds.iter().map(|m| m.rmse).sum::<f64>() / kf;
    EvalReport {
        target,
        protocol: protocol.to_string(),
        fold_count,
        seed,
        corpus_fingerprint: corpus_fingerprint(records),
        signal_source: match (target, signal_source) {
            (Target::Engagement, SignalSource::FoldLocal) => "fold-local".to_string(),
            (Target::Engagement, SignalSource::Fixed(p)) => p.provenance.clone(),
            _ => "none".to_string(),
        },
        mean_r2,
        mean_rho,
        mean_rmse,
        folds,
        gbrt: config.clone(),
    }
}

/// Which aggregate column a comparison is ordered by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompareMetric {
    R2,
    Rho,
    Rmse,
}

impl CompareMetric {
    pub fn as_str(&self) -> &'static str {
        match self {
            CompareMetric::R2 => "r2",
            CompareMetric::Rho => "rho",
            CompareMetric::Rmse => "rmse",
        }
    }
}

impl std::str::FromStr for CompareMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "r2" => Ok(CompareMetric::R2),
            "rho" => Ok(CompareMetric::Rho),
            "rmse" => Ok(CompareMetric::Rmse),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CompareRow {
    pub target: Target,
    pub mean_r2: f64,
    pub mean_rho: f64,
    pub mean_rmse: f64,
    pub fold_count: usize,
}

/// Reports ranked by one aggregate metric.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Comparison {
    pub metric: CompareMetric,
    pub corpus_fingerprint: String,
    pub rows: Vec<CompareRow>,
}

impl Comparison {
    /// CSV rendition: `target,mean_r2,mean_rho,mean_rmse,fold_count`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("target,mean_r2,mean_rho,mean_rmse,fold_count\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.target.as_str(),
                row.mean_r2,
                row.mean_rho,
                row.mean_rmse,
                row.fold_count
            ));
        }
        out
    }
}

/// Ranks reports by `metric` (descending for r2 and rho, ascending for
/// rmse; ties keep input order). All reports must fingerprint to the same
/// corpus.
pub fn compare_reports(
    reports: &[EvalReport],
    metric: CompareMetric,
) -> Result<Comparison, EvalError> {
    if reports.len() < 2 {
        return Err(EvalError::NothingToCompare);
    }
    for r in &reports[1..] {
        if r.corpus_fingerprint != reports[0].corpus_fingerprint {
            return Err(EvalError::FingerprintMismatch(
                reports[0].corpus_fingerprint.clone(),
                r.corpus_fingerprint.clone(),
            ));
        }
    }
    let mut rows: Vec<CompareRow> = reports
        .iter()
        .map(|r| CompareRow {
            target: r.target,
            mean_r2: r.mean_r2,
            mean_rho: r.mean_rho,
            mean_rmse: r.mean_rmse,
            fold_count: r.fold_count,
        })
        .collect();
    match metric {
        CompareMetric::R2 => rows.sort_by(|a, b| b.mean_r2.total_cmp(&a.mean_r2)),
        CompareMetric::Rho => rows.sort_by(|a, b| b.mean_rho.total_cmp(&a.mean_rho)),
        CompareMetric::Rmse => rows.sort_by(|a, b| a.mean_rmse.total_cmp(&b.mean_rmse)),
    }
    Ok(Comparison {
        metric,
        corpus_fingerprint: reports[0].corpus_fingerprint.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{synth_corpus, SynthConfig};

    fn corpus(n: usize, seed: u64) -> Vec<TweetRecord> {
        synth_corpus(n, seed, &SynthConfig::default()).unwrap()
    }

    fn quick_config() -> GbrtConfig {
        GbrtConfig {
            num_trees: 12,
            max_leaves: 8,
            min_samples_per_leaf: 10,
            ..GbrtConfig::default()
        }
    }

    #[test]
    fn kfold_covers_everything_with_balanced_sizes() {
        let folds = kfold_split(103, 5, 7).unwrap();
        assert_eq!(folds.len(), 5);
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 103);
        assert_eq!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap(), 1);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..103).collect::<Vec<_>>());
    }

    #[test]
    fn kfold_is_seeded() {
        assert_eq!(kfold_split(50, 3, 9).unwrap(), kfold_split(50, 3, 9).unwrap());
        assert_ne!(kfold_split(50, 3, 9).unwrap(), kfold_split(50, 3, 10).unwrap());
    }

    #[test]
    fn kfold_rejects_bad_arguments() {
        assert!(matches!(
            kfold_split(10, 1, 0),
            Err(EvalError::InvalidConfig(_))
        ));
        assert!(matches!(
            kfold_split(2, 3, 0),
            Err(EvalError::InsufficientData { need: 3, got: 2 })
        ));
    }

    #[test]
    fn experiment_is_deterministic() {
        let records = corpus(240, 1001);
        let a = run_experiment(
            &records,
            Target::Favorites,
            3,
            5,
            &quick_config(),
            &SignalSource::FoldLocal,
        )
        .unwrap();
        let b = run_experiment(
            &records,
            Target::Favorites,
            3,
            5,
            &quick_config(),
            &SignalSource::FoldLocal,
        )
        .unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn aggregates_are_fold_means() {
        let records = corpus(240, 1002);
        let report = run_experiment(
            &records,
            Target::Retweets,
            4,
            2,
            &quick_config(),
            &SignalSource::FoldLocal,
        )
        .unwrap();
        assert_eq!(report.fold_count, 4);
        assert_eq!(report.folds.len(), 4);
        let r2 = report.folds.iter().map(|m| m.r2).sum::<f64>() / 4.0;
        let rho = report.folds.iter().map(|m| m.rho).sum::<f64>() / 4.0;
        let rm = report.folds.iter().map(|m| m.rmse).sum::<f64>() / 4.0;
        assert_eq!(report.mean_r2, r2);
        assert_eq!(report.mean_rho, rho);
        assert_eq!(report.mean_rmse, rm);
        for (f, m) in report.folds.iter().enumerate() {
            assert_eq!(m.fold, f);
            assert_eq!(m.train_rows + m.test_rows, 240);
        }
    }

    #[test]
    fn engagement_target_fits_fold_local_signal() {
        let records = corpus(300, 1003);
        let report = run_experiment(
            &records,
            Target::Engagement,
            3,
            11,
            &quick_config(),
            &SignalSource::FoldLocal,
        )
        .unwrap();
        assert_eq!(report.signal_source, "fold-local");
        assert!(report.mean_r2.is_finite());
        assert!(!report.folds.iter().any(|m| m.degenerate));

        let fixed = run_experiment(
            &records,
            Target::Engagement,
            3,
            11,
            &quick_config(),
            &SignalSource::Fixed(SignalParams::t2017()),
        )
        .unwrap();
        assert_eq!(fixed.signal_source, "t2017");
        // Same folds, same features, different label scale: reports differ.
        assert_ne!(report.mean_rmse, fixed.mean_rmse);
    }

    /// Leakage canary: perturbing the held-out records' responses must not
    /// change the trained model in any byte, for the count targets and for
    /// the compound target with fold-local signal fitting alike.
    #[test]
    fn held_out_responses_never_reach_training() {
        let records = corpus(200, 1004);
        let folds = kfold_split(records.len(), 2, 3).unwrap();
        let (train_idx, test_idx) = (&folds[1], &folds[0]);
        let schema = FeatureSchema::standard();

        let mut mutated = records.clone();
        for &i in test_idx {
            mutated[i].response.retweets += 1_000_000;
            mutated[i].response.replies += 500_000;
            mutated[i].response.favorites += 2_000_000;
        }

        for target in [Target::Favorites, Target::Engagement] {
            let fitted_a = fit_fold(
                &records,
                &schema,
                train_idx,
                target,
                &SignalSource::FoldLocal,
                &quick_config(),
            )
            .unwrap();
            let fitted_b = fit_fold(
                &mutated,
                &schema,
                train_idx,
                target,
                &SignalSource::FoldLocal,
                &quick_config(),
            )
            .unwrap();
            assert_eq!(
                serde_json::to_string(&fitted_a.model).unwrap(),
                serde_json::to_string(&fitted_b.model).unwrap(),
                "{target:?}: held-out responses leaked into training"
            );
            // The held-out labels did change, so the metrics must move.
            let metrics_a = score_fold(&records, &schema, &fitted_a, test_idx, 0, target).unwrap();
            let metrics_b = score_fold(&mutated, &schema, &fitted_b, test_idx, 0, target).unwrap();
            assert_ne!(metrics_a.rmse, metrics_b.rmse, "{target:?}");
        }
    }

    #[test]
    fn holdout_split_slices_are_disjoint_and_sized() {
        let (train, valid, test) = holdout_split(100, 3).unwrap();
        assert_eq!((train.len(), valid.len(), test.len()), (70, 20, 10));
        let mut all: Vec<usize> = train
            .iter()
            .chain(&valid)
            .chain(&test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        // Remainders go to the test slice.
        let (train, valid, test) = holdout_split(57, 3).unwrap();
        assert_eq!((train.len(), valid.len(), test.len()), (39, 11, 7));
        assert!(matches!(
            holdout_split(9, 0),
            Err(EvalError::InsufficientData { need: 10, got: 9 })
        ));
    }

    #[test]
    fn holdout_protocol_reports_validation_and_test_rows() {
        let records = corpus(300, 1007);
        let report = run_holdout_experiment(
            &records,
            Target::Favorites,
            5,
            &quick_config(),
            &SignalSource::FoldLocal,
        )
        .unwrap();
        assert_eq!(report.protocol, "holdout-70-20-10");
        assert_eq!(report.folds.len(), 2);
        assert_eq!(report.folds[0].train_rows, 210);
        assert_eq!(report.folds[0].test_rows, 60);
        assert_eq!(report.folds[1].test_rows, 30);
        assert_eq!(
            report.mean_rmse,
            (report.folds[0].rmse + report.folds[1].rmse) / 2.0
        );
    }

    #[test]
    fn report_round_trips_through_disk() {
        let records = corpus(150, 1005);
        let report = run_experiment(
            &records,
            Target::Replies,
            3,
            0,
            &quick_config(),
            &SignalSource::FoldLocal,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        report.save(&path).unwrap();
        assert_eq!(EvalReport::load(&path).unwrap(), report);
    }

    #[test]
    fn comparison_orders_by_metric() {
        let records = corpus(200, 1006);
        let config = quick_config();
        let reports: Vec<EvalReport> = [Target::Retweets, Target::Favorites]
            .into_iter()
            .map(|t| {
                run_experiment(&records, t, 3, 1, &config, &SignalSource::FoldLocal).unwrap()
            })
            .collect();

        let by_r2 = compare_reports(&reports, CompareMetric::R2).unwrap();
        assert!(by_r2.rows[0].mean_r2 >= by_r2.rows[1].mean_r2);
        let by_rmse = compare_reports(&reports, CompareMetric::Rmse).unwrap();
        assert!(by_rmse.rows[0].mean_rmse <= by_rmse.rows[1].mean_rmse);

        let csv = by_r2.to_csv_string();
        assert!(csv.starts_with("target,mean_r2,mean_rho,mean_rmse,fold_count\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn comparison_rejects_mismatched_corpora() {
        let a = run_experiment(
            &corpus(120, 1),
            Target::Retweets,
            3,
            0,
            &quick_config(),
            &SignalSource::FoldLocal,
        )
        .unwrap();
        let b = run_experiment(
            &corpus(120, 2),
            Target::Favorites,
            3,
            0,
            &quick_config(),
            &SignalSource::FoldLocal,
        )
        .unwrap();
        assert!(matches!(
            compare_reports(&[a.clone(), b], CompareMetric::R2),
            Err(EvalError::FingerprintMismatch(_, _))
        ));
        assert!(matches!(
            compare_reports(&[a], CompareMetric::R2),
            Err(EvalError::NothingToCompare)
        ));
    }
}
