//! Oracle-enhanced distribution identity testing for attributing a set of
//! samples to a target generative model.
//!
//! The pipeline: evaluate every sample under the target model, sort samples
//! into dyadic probability buckets ([`bucketing`]), compare the bucket-count
//! CDFs against a fresh reference sample and run a collision chi-square test
//! inside each bucket ([`tester`]). For language models the per-sample
//! probability comes from [`tokenizer::eval_plus`], which sums over tokenizer
//! collisions. [`toy`] supplies small autoregressive models with exact
//! oracles, and [`experiment`] drives contamination sweeps and AUROC summaries.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bucketing;
pub mod dataio;
pub mod error;
pub mod experiment;
pub mod multiset;
pub mod oracle;
pub mod stats;
pub mod tester;
pub mod tokenizer;
pub mod toy;

pub use error::{Error, Result};
pub use multiset::{ElementId, Multiset};
pub use oracle::{EvalOracle, SampOracle};
pub use stats::Pmf;
pub use tester::{anubis_test, Reference, TestConfig, TestReport, Verdict};
