//! Fuse smart-scale weigh-in tweets with ordinary social-media text.
//!
//! The crate is organized as a batch pipeline:
//!
//! - [`ingest`] reads newline-delimited tweet corpora and classifies each
//!   tweet's posting application.
//! - [`weighin`] turns weigh-in tweets into per-user weight series and
//!   flags implausible series.
//! - [`cohort`] applies the user-level inclusion rules.
//! - [`lexfeat`] builds lexicon-category and bag-of-words features.
//! - [`models`] trains and cross-validates weight regressors.
//! - [`trends`] aggregates weekday and monthly population patterns.
//! - [`synth`] generates seeded corpora with a ground-truth manifest.
//! - [`pipeline`] wires the stages together with on-disk persistence.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cohort;
pub mod error;
pub mod ingest;
pub mod lexfeat;
pub mod models;
pub mod pipeline;
pub mod synth;
pub mod trends;
pub mod weighin;

pub use error::{Error, Result};
