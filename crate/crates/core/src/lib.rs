//! Cross-sectional stochastic-frontier estimation for household
//! electricity demand.
//!
//! The pipeline: ingest a survey CSV ([`data`]), turn a model spec into
//! design matrices ([`model`]), fit OLS or a composed-error frontier by
//! maximum likelihood ([`ols`], [`likelihood`], [`mle`]), score
//! per-household efficiency ([`efficiency`]), compare the four-model ladder
//! ([`diagnostics`]), and validate everything against a synthetic
//! data-generating oracle ([`simulate`]).

pub mod cli;
pub mod data;
pub mod diagnostics;
pub mod efficiency;
pub mod error;
pub mod likelihood;
pub mod mle;
pub mod model;
pub mod normal;
pub mod ols;
pub mod optim;
pub mod simulate;

pub use error::{Error, Result};
