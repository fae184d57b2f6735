//! Estimate regional electrification rates from aggregated mobile-phone
//! activity, and explain the resulting models locally.
//!
//! The pipeline in one sentence: tessellate a region into tower coverage
//! cells, label each cell with a census-derived electrification rate, extract
//! per-tower interaction-network features from call and text records, train
//! ordinal classifiers on the labeled feature table, and attribute individual
//! predictions to features with two local explainers (a LIME-style surrogate
//! and exact Shapley values for tree ensembles).
//!
//! The crate ships a synthetic world generator with a planted
//! signal (text-message volume tracks electrification), so the whole chain,
//! including the explainers rediscovering the planted signal, runs and is
//! verified without any proprietary data.
//!
//! Modules follow the pipeline order:
//! - [`geo`]: Voronoi tessellation, polygon intersection, area-weighted labels.
//! - [`synth`]: seeded world and interaction-record generator.
//! - [`network`]: per-event-type interaction matrices and the 18 tower features.
//! - [`dataset`]: ordinal binning, majority-class subsampling, 7:3 splits.
//! - [`models`]: from-scratch classifiers (trees, forest, boosting, linear,
//!   naive Bayes) and evaluation metrics.
//! - [`explain`]: the surrogate and Shapley explainers plus aggregation.
//! - [`pipeline`]: batch orchestration behind the `gridlight` binary.

pub mod dataset;
pub mod error;
pub mod explain;
pub mod geo;
pub mod models;
pub mod network;
pub mod pipeline;
pub mod seeding;
pub mod synth;

pub use error::{Error, Result};
