//! Lead-lag analysis of short gene-expression time courses.
//!
//! Pipeline: spline integrals of each series ([`timeseries`]), pairwise
//! lead-lag R² under an empirical-Bayes g-prior ([`regress`], [`pairwise`]),
//! Ward clustering ([`cluster`]), thresholded networks ([`network`]) and
//! annotation enrichment ([`enrich`]). [`simulate`] generates cohorts with a
//! known answer.

pub mod cluster;
pub mod enrich;
pub mod error;
pub mod kv;
pub mod network;
pub mod pairwise;
pub mod prior;
pub mod regress;
pub mod similarity;
pub mod simulate;
pub mod timeseries;

pub use error::{Error, Result};
pub use prior::{Association, PriorAdjacency};
pub use similarity::SimilarityMatrix;
pub use timeseries::{ExpressionMatrix, TimeGrid};
