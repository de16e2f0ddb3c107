//! `engage` — the pipeline as reproducible, seeded subcommands.
//!
//! Every subcommand is a thin adapter over one library operation; no
//! numerics live here. Runs are deterministic given inputs and seeds, at
//! any `--threads` setting. Artifacts either embed their full resolved
//! configuration (JSON artifacts) or get a `<file>.meta.json` sidecar
//! recording the command and arguments that produced them (CSV/JSONL
//! artifacts), so any artifact can be regenerated byte-identically.

use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use engagement::eval::{
    compare_reports, run_experiment, run_holdout_experiment, CompareMetric, Comparison,
    EvalReport, SignalSource,
};
use engagement::features::{
    compute_skewness, extract_features, FeatureKind, FeatureSchema, Target, Transform,
};
use engagement::gbrt::{self, GbrtConfig, GbrtModel};
use engagement::ingest::{
    read_corpus, read_corpus_from, synth_corpus, write_corpus, write_corpus_to, SynthConfig,
    TweetRecord,
};
use engagement::pa::{run_pa_with_pool, write_null_csv, PaConfig, PermutationMode};
use engagement::signal::{fit_signal, project_batch, stabilized_matrix, LogBase, SignalParams};

#[derive(Parser)]
#[command(
    name = "engage",
    version,
    about = "Social-media response analysis: dimensionality testing, compound \
             engagement signal, and boosted-tree prediction"
)]
struct Cli {
    /// Worker threads for data-parallel stages (default: all cores).
    /// Results never depend on this.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic corpus as JSONL.
    Synth {
        /// Output path, or `-` for stdout.
        #[arg(long, value_name = "PATH")]
        out: String,
        /// Number of records to generate.
        #[arg(long, default_value_t = 10_000)]
        records: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Extract the 31-column design matrix as CSV (with a dictionary
    /// sidecar) and print a per-column skewness summary.
    Features {
        /// Corpus path (JSONL), or `-` for stdin.
        #[arg(long = "in", value_name = "PATH")]
        input: String,
        /// Output CSV path.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Parallel analysis of the stabilized response channels.
    Pa {
        /// Corpus path (JSONL), or `-` for stdin.
        #[arg(long = "in", value_name = "PATH")]
        input: String,
        /// Result JSON path; stdout when omitted.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Also write every pooled null eigenvalue as CSV for plotting.
        #[arg(long = "null-csv", value_name = "PATH")]
        null_csv: Option<PathBuf>,
        /// Number of permutation replicas.
        #[arg(long, default_value_t = 100)]
        permutations: usize,
        /// Upper null quantile in (0, 1).
        #[arg(long, default_value_t = 0.95)]
        quantile: f64,
        /// `within-observation` or `across-observations`.
        #[arg(long, default_value = "within-observation")]
        mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit compound-signal parameters on a corpus.
    FitSignal {
        /// Corpus path (JSONL), or `-` for stdin.
        #[arg(long = "in", value_name = "PATH")]
        input: String,
        /// Output parameter JSON path.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Project raw responses onto the compound signal; emits `id,score`.
    Project {
        /// Corpus path (JSONL), or `-` for stdin.
        #[arg(long = "in", value_name = "PATH")]
        input: String,
        /// Output CSV path; stdout when omitted.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Use a bundled parameter preset (t2017 or t2018).
        #[arg(long, conflicts_with = "signal")]
        preset: Option<String>,
        /// Use fitted parameters from a file.
        #[arg(long, value_name = "PATH")]
        signal: Option<PathBuf>,
        /// Override the projection log base (`e` or `10`).
        #[arg(long = "log-base", value_name = "BASE")]
        log_base: Option<String>,
        /// Sort rows by descending score.
        #[arg(long)]
        sort: bool,
        /// Keep only the first N rows (after sorting, when `--sort`).
        #[arg(long, value_name = "N")]
        top: Option<usize>,
    },
    /// Train a boosted-tree model for one target on the whole corpus.
    Train {
        /// Corpus path (JSONL), or `-` for stdin.
        #[arg(long = "in", value_name = "PATH")]
        input: String,
        /// Output model JSON path.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// retweets, replies, favorites, or engagement.
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 300)]
        trees: usize,
        #[arg(long = "learning-rate", default_value_t = 0.1)]
        learning_rate: f64,
        #[arg(long = "max-leaves", default_value_t = 31)]
        max_leaves: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Signal preset for the engagement target (t2017 or t2018);
        /// fitted on the input corpus when neither this nor --signal is
        /// given.
        #[arg(long, conflicts_with = "signal")]
        preset: Option<String>,
        /// Signal parameter file for the engagement target.
        #[arg(long, value_name = "PATH")]
        signal: Option<PathBuf>,
    },
    /// Cross-validated evaluation of one target, or of all four.
    Evaluate {
        /// Corpus path (JSONL), or `-` for stdin.
        #[arg(long = "in", value_name = "PATH")]
        input: String,
        /// Report JSON path; stdout when omitted.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// retweets, replies, favorites, engagement, or all.
        #[arg(long, default_value = "all")]
        target: String,
        #[arg(long, default_value_t = 3)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 300)]
        trees: usize,
        #[arg(long = "learning-rate", default_value_t = 0.1)]
        learning_rate: f64,
        #[arg(long = "max-leaves", default_value_t = 31)]
        max_leaves: usize,
        /// Fixed signal preset for the engagement target; fold-local
        /// fitting (leakage-free) when neither this nor --signal is given.
        #[arg(long, conflicts_with = "signal")]
        preset: Option<String>,
        /// Fixed signal parameter file for the engagement target.
        #[arg(long, value_name = "PATH")]
        signal: Option<PathBuf>,
        /// `cv` (k-fold, default) or `holdout` (single 70/20/10 split).
        #[arg(long, default_value = "cv")]
        protocol: String,
        /// Comparison order for --target all: r2, rho, or rmse.
        #[arg(long, default_value = "r2")]
        sort: String,
    },
    /// Gain-based feature importance of a trained model; emits
    /// `feature,importance,total_gain`.
    Importance {
        /// Model JSON path.
        #[arg(long = "in", value_name = "PATH")]
        input: PathBuf,
        /// Output CSV path; stdout when omitted.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Keep only the N most important features.
        #[arg(long, value_name = "N")]
        top: Option<usize>,
    },
    /// Rank evaluation reports from the same corpus by a metric.
    Rank {
        /// Two or more report JSON paths.
        #[arg(long = "in", value_name = "PATH", num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        /// Output CSV path; stdout when omitted.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// r2, rho, or rmse.
        #[arg(long, default_value = "r2")]
        sort: String,
        /// Keep only the N best rows.
        #[arg(long, value_name = "N")]
        top: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn read_corpus_arg(input: &str) -> Result<Vec<TweetRecord>> {
    if input == "-" {
        Ok(read_corpus_from(io::stdin().lock())?)
    } else {
        read_corpus(Path::new(input)).with_context(|| format!("reading {input}"))
    }
}

/// Sidecar path `<artifact>.meta.json`.
fn meta_path(artifact: &Path) -> PathBuf {
    let mut s = artifact.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Records the command and resolved arguments that produced a CSV/JSONL
/// artifact, so the artifact can be regenerated byte-identically.
fn write_meta(artifact: &Path, meta: &serde_json::Value) -> Result<()> {
    let path = meta_path(artifact);
    let mut body = serde_json::to_string_pretty(meta)?;
    body.push('\n');
    fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Writes `content` to `out`, or to stdout when `out` is `None`. File
/// artifacts get the meta sidecar; stdout gets none.
fn emit_text(out: Option<&Path>, content: &str, meta: &serde_json::Value) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, content).with_context(|| format!("writing {}", path.display()))?;
            write_meta(path, meta)?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            io::stdout().write_all(content.as_bytes())?;
        }
    }
    Ok(())
}

/// Writes pretty JSON to `out` or stdout. JSON artifacts embed their own
/// config, so no sidecar is written.
fn emit_json<T: serde::Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value)?;
    body.push('\n');
    match out {
        Some(path) => {
            fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            io::stdout().write_all(body.as_bytes())?;
        }
    }
    Ok(())
}

fn resolve_params(preset: Option<&str>, signal: Option<&Path>) -> Result<Option<SignalParams>> {
    match (preset, signal) {
        (Some(name), None) => {
            let params = SignalParams::preset(name)
                .with_context(|| format!("unknown preset {name:?} (expected t2017 or t2018)"))?;
            Ok(Some(params))
        }
        (None, Some(path)) => Ok(Some(
            SignalParams::load(path).with_context(|| format!("reading {}", path.display()))?,
        )),
        (None, None) => Ok(None),
        (Some(_), Some(_)) => unreachable!("clap rejects --preset with --signal"),
    }
}

fn parse_target(s: &str) -> Result<Target> {
    s.parse::<Target>().map_err(anyhow::Error::msg)
}

fn parse_metric(s: &str) -> Result<CompareMetric> {
    s.parse::<CompareMetric>().map_err(anyhow::Error::msg)
}

fn gbrt_config(trees: usize, learning_rate: f64, max_leaves: usize, seed: u64) -> GbrtConfig {
    GbrtConfig {
        num_trees: trees,
        learning_rate,
        max_leaves,
        seed,
        ..GbrtConfig::default()
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth { out, records, seed } => cmd_synth(&out, records, seed),
        Command::Features { input, out } => cmd_features(&input, &out),
        Command::Pa {
            input,
            out,
            null_csv,
            permutations,
            quantile,
            mode,
            seed,
        } => cmd_pa(
            &input,
            out.as_deref(),
            null_csv.as_deref(),
            permutations,
            quantile,
            &mode,
            seed,
        ),
        Command::FitSignal { input, out } => cmd_fit_signal(&input, &out),
        Command::Project {
            input,
            out,
            preset,
            signal,
            log_base,
            sort,
            top,
        } => cmd_project(
            &input,
            out.as_deref(),
            preset.as_deref(),
            signal.as_deref(),
            log_base.as_deref(),
            sort,
            top,
        ),
        Command::Train {
            input,
            out,
            target,
            trees,
            learning_rate,
            max_leaves,
            seed,
            preset,
            signal,
        } => cmd_train(
            &input,
            &out,
            &target,
            gbrt_config(trees, learning_rate, max_leaves, seed),
            preset.as_deref(),
            signal.as_deref(),
        ),
        Command::Evaluate {
            input,
            out,
            target,
            folds,
            seed,
            trees,
            learning_rate,
            max_leaves,
            preset,
            signal,
            protocol,
            sort,
        } => cmd_evaluate(
            &input,
            out.as_deref(),
            &target,
            folds,
            seed,
            gbrt_config(trees, learning_rate, max_leaves, seed),
            preset.as_deref(),
            signal.as_deref(),
            &protocol,
            &sort,
        ),
        Command::Importance { input, out, top } => cmd_importance(&input, out.as_deref(), top),
        Command::Rank {
            input,
            out,
            sort,
            top,
        } => cmd_rank(&input, out.as_deref(), &sort, top),
    }
}

fn cmd_synth(out: &str, records: usize, seed: u64) -> Result<()> {
    let config = SynthConfig::default();
    let corpus = synth_corpus(records, seed, &config)?;
    if out == "-" {
        let stdout = io::stdout();
        let mut lock = stdout.lock();
        write_corpus_to(&corpus, &mut lock)?;
    } else {
        let path = Path::new(out);
        write_corpus(&corpus, path).with_context(|| format!("writing {out}"))?;
        write_meta(
            path,
            &json!({
                "command": "synth",
                "records": records,
                "seed": seed,
                "config": config,
            }),
        )?;
        eprintln!("wrote {records} records to {out}");
    }
    Ok(())
}

fn cmd_features(input: &str, out: &Path) -> Result<()> {
    let records = read_corpus_arg(input)?;
    let schema = FeatureSchema::standard();
    let matrix = extract_features(&records, &schema)?;
    matrix.write_csv(out, None)?;

    let mut dict_path = out.as_os_str().to_owned();
    dict_path.push(".dicts.json");
    let dict_path = PathBuf::from(dict_path);
    matrix.write_dict_json(&dict_path)?;

    write_meta(
        out,
        &json!({
            "command": "features",
            "in": input,
            "rows": matrix.n_rows(),
            "columns": schema.len(),
            "schema_hash": format!("{:016x}", schema.hash()),
        }),
    )?;
    eprintln!(
        "wrote {} rows x {} columns to {} (dictionaries: {})",
        matrix.n_rows(),
        schema.len(),
        out.display(),
        dict_path.display()
    );

    // Skewness summary, before and after the variance-stabilizing
    // transform, for every non-categorical column.
    let mut summary = String::from("column,transform,skewness_raw,skewness_stabilized\n");
    for (i, col) in schema.columns().iter().enumerate() {
        if col.kind == FeatureKind::Categorical {
            continue;
        }
        let stabilized = matrix.column(i);
        let raw: Vec<f64> = match col.transform {
            Transform::Log1p => stabilized.iter().map(|v| v.exp_m1()).collect(),
            Transform::Identity => stabilized.clone(),
        };
        let fmt = |values: &[f64]| match compute_skewness(values) {
            Ok(v) => format!("{v:.4}"),
            Err(_) => String::new(),
        };
        let transform = match col.transform {
            Transform::Log1p => "log1p",
            Transform::Identity => "identity",
        };
        summary.push_str(&format!(
            "{},{},{},{}\n",
            col.name,
            transform,
            fmt(&raw),
            fmt(&stabilized)
        ));
    }
    io::stdout().write_all(summary.as_bytes())?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_pa(
    input: &str,
    out: Option<&Path>,
    null_csv: Option<&Path>,
    permutations: usize,
    quantile: f64,
    mode: &str,
    seed: u64,
) -> Result<()> {
    let records = read_corpus_arg(input)?;
    let responses: Vec<_> = records.iter().map(|r| r.response).collect();
    let data = stabilized_matrix(&responses);
    let config = PaConfig {
        permutations,
        quantile,
        mode: mode.parse::<PermutationMode>().map_err(anyhow::Error::msg)?,
        seed,
    };
    let (result, pool) = run_pa_with_pool(&data, &config)?;

    if let Some(path) = null_csv {
        let mut buf = Vec::new();
        write_null_csv(&pool, &mut buf)?;
        fs::write(path, &buf).with_context(|| format!("writing {}", path.display()))?;
        write_meta(
            path,
            &json!({
                "command": "pa",
                "in": input,
                "config": config,
                "content": "pooled null eigenvalues",
            }),
        )?;
        eprintln!("wrote null eigenvalues to {}", path.display());
    }

    emit_json(out, &result)?;
    eprintln!("signal dimension: {}", result.signal_dimension);
    Ok(())
}

fn cmd_fit_signal(input: &str, out: &Path) -> Result<()> {
    let records = read_corpus_arg(input)?;
    let responses: Vec<_> = records.iter().map(|r| r.response).collect();
    let params = fit_signal(&responses)?;
    params.save(out)?;
    eprintln!(
        "wrote {} (weights [{:.4}, {:.4}, {:.4}], variance explained {:.4})",
        out.display(),
        params.weights[0],
        params.weights[1],
        params.weights[2],
        params.variance_explained
    );
    Ok(())
}

fn cmd_project(
    input: &str,
    out: Option<&Path>,
    preset: Option<&str>,
    signal: Option<&Path>,
    log_base: Option<&str>,
    sort: bool,
    top: Option<usize>,
) -> Result<()> {
    let records = read_corpus_arg(input)?;
    let mut params = resolve_params(preset, signal)?
        .context("project needs signal parameters: pass --preset or --signal")?;
    if let Some(base) = log_base {
        params = params.with_log_base(base.parse::<LogBase>().map_err(anyhow::Error::msg)?);
    }
    let mut scored = project_batch(&records, &params, sort);
    if let Some(n) = top {
        scored.truncate(n);
    }

    let mut body = String::from("id,score\n");
    for (id, score) in &scored {
        body.push_str(&format!("{id},{score}\n"));
    }
    emit_text(
        out,
        &body,
        &json!({
            "command": "project",
            "in": input,
            "params": params,
            "sort": sort,
            "top": top,
        }),
    )
}

fn cmd_train(
    input: &str,
    out: &Path,
    target: &str,
    config: GbrtConfig,
    preset: Option<&str>,
    signal: Option<&Path>,
) -> Result<()> {
    let records = read_corpus_arg(input)?;
    let target = parse_target(target)?;
    let params = match (target, resolve_params(preset, signal)?) {
        (Target::Engagement, Some(p)) => Some(p),
        (Target::Engagement, None) => {
            eprintln!("fitting signal parameters on the input corpus");
            let responses: Vec<_> = records.iter().map(|r| r.response).collect();
            Some(fit_signal(&responses)?)
        }
        (_, _) => None,
    };
    let schema = FeatureSchema::standard();
    let matrix = extract_features(&records, &schema)?;
    let labels = engagement::features::label_vector(&records, target, params.as_ref())?;
    let model = gbrt::train(&matrix, &labels, &config)?;
    model.save(out)?;
    eprintln!(
        "wrote {} ({} trees, final training rmse {})",
        out.display(),
        model.trees.len(),
        model
            .train_rmse
            .last()
            .map_or("n/a".to_string(), |v| format!("{v:.6}"))
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    input: &str,
    out: Option<&Path>,
    target: &str,
    folds: usize,
    seed: u64,
    config: GbrtConfig,
    preset: Option<&str>,
    signal: Option<&Path>,
    protocol: &str,
    sort: &str,
) -> Result<()> {
    let records = read_corpus_arg(input)?;
    let source = match resolve_params(preset, signal)? {
        Some(p) => SignalSource::Fixed(p),
        None => SignalSource::FoldLocal,
    };
    let run_one = |t: Target| -> Result<EvalReport> {
        let report = match protocol {
            "cv" => run_experiment(&records, t, folds, seed, &config, &source)?,
            "holdout" => run_holdout_experiment(&records, t, seed, &config, &source)?,
            other => bail!("unknown protocol {other:?} (expected cv or holdout)"),
        };
        eprintln!(
            "{}: mean r2 {:.4}, mean rho {:.4}, mean rmse {:.4}",
            report.target.as_str(),
            report.mean_r2,
            report.mean_rho,
            report.mean_rmse
        );
        Ok(report)
    };

    if target == "all" {
        let reports: Vec<EvalReport> = [
            Target::Retweets,
            Target::Replies,
            Target::Favorites,
            Target::Engagement,
        ]
        .into_iter()
        .map(run_one)
        .collect::<Result<_>>()?;
        let comparison = compare_reports(&reports, parse_metric(sort)?)?;
        if out.is_some() {
            io::stdout().write_all(comparison.to_csv_string().as_bytes())?;
        }
        #[derive(serde::Serialize)]
        struct AllReports {
            reports: Vec<EvalReport>,
            comparison: Comparison,
        }
        emit_json(out, &AllReports {
            reports,
            comparison,
        })
    } else {
        let report = run_one(parse_target(target)?)?;
        emit_json(out, &report)
    }
}

fn cmd_importance(input: &Path, out: Option<&Path>, top: Option<usize>) -> Result<()> {
    let model =
        GbrtModel::load(input).with_context(|| format!("reading {}", input.display()))?;
    let totals = model.importance_totals();
    let by_name: std::collections::HashMap<&str, f64> = model
        .feature_names
        .iter()
        .map(String::as_str)
        .zip(totals.iter().copied())
        .collect();
    let mut rows = model.feature_importance();
    if let Some(n) = top {
        rows.truncate(n);
    }
    let mut body = String::from("feature,importance,total_gain\n");
    for (name, importance) in &rows {
        body.push_str(&format!(
            "{},{},{}\n",
            name,
            importance,
            by_name[name.as_str()]
        ));
    }
    emit_text(
        out,
        &body,
        &json!({
            "command": "importance",
            "in": input.display().to_string(),
            "model_schema_hash": model.schema_hash,
            "top": top,
        }),
    )
}

fn cmd_rank(inputs: &[PathBuf], out: Option<&Path>, sort: &str, top: Option<usize>) -> Result<()> {
    let reports: Vec<EvalReport> = inputs
        .iter()
        .map(|p| EvalReport::load(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<_>>()?;
    let mut comparison = compare_reports(&reports, parse_metric(sort)?)?;
    if let Some(n) = top {
        comparison.rows.truncate(n);
    }
    emit_text(
        out,
        &comparison.to_csv_string(),
        &json!({
            "command": "rank",
            "in": inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "sort": sort,
            "top": top,
        }),
    )
}
