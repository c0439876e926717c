//! Duration-debiased evaluation and training for micro-video watch-time data.
//!
//! Watch time grows with video length regardless of preference. This crate
//! standardizes watch time within duration bins (Watch Time Gain, WTG), keeps
//! those bin statistics in batch or streaming form, scores rankings with
//! WTG-based and watch-time metrics, and trains factorization-machine or MLP
//! regressors with an adversarial duration head behind a gradient reversal.
//!
//! Module map:
//! - [`ingest`]: records, parsing, filtering, time splits
//! - [`binstats`]: duration bins, batch and streaming moments, snapshots
//! - [`wtg`]: WTG labels offline and online
//! - [`metrics`]: WTG@k, DCWTG@k, bad cases, traffic shares, bias curves
//! - [`models`]: FM / MLP regressors, duration head, training, ranking
//! - [`synth`]: seeded biased logs with known ground truth
//! - [`experiment`]: end-to-end runs, alpha sweeps, ablations, comparisons

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod binstats;
pub mod correlation;
pub mod error;
pub mod experiment;
pub mod ingest;
pub mod metrics;
pub mod models;
pub mod synth;
pub mod wtg;

pub use error::{Error, ErrorKind, Result};
