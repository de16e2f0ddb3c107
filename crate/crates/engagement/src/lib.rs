//! Engagement-response modelling for short social-media posts.
//!
//! The crate covers the full pipeline:
//!
//! * [`ingest`] — the post record model, JSONL corpus IO, and a seeded
//!   synthetic corpus generator for tests and benchmarks.
//! * [`features`] — the fixed 31-column design matrix (base + quoted-post
//!   blocks) with `ln(x+1)` transforms on the heavy-tailed author counts.
//! * [`stats`] — small numeric kernel: variance stabilization, covariance,
//!   a cyclic Jacobi symmetric eigensolver, Spearman rank correlation with
//!   tie handling, and regression metrics.
//! * [`pa`] — parallel analysis: how many principal components of the
//!   response covariance exceed permutation-null eigenvalues.
//! * [`signal`] — the compound engagement signal: first principal component
//!   of the stabilized response channels, plus published preset constants.
//! * [`gbrt`] — histogram-based gradient-boosted regression trees with
//!   leaf-wise growth and optimal categorical splits.
//! * [`eval`] — k-fold cross-validation harness comparing per-channel and
//!   compound targets without train/test leakage.
//!
//! All randomized stages take explicit seeds and produce byte-identical
//! artifacts regardless of thread count; the `parallel` feature (default)
//! only changes how the work is scheduled, never the results.

pub mod eval;
pub mod features;
pub mod gbrt;
pub mod ingest;
pub mod pa;
pub mod signal;
pub mod stats;

mod exec;
