//! Distance-based analysis of districting-plan ensembles.
//!
//! Plans are compared by a θ-weighted count of unit pairs on which they
//! disagree about sharing a district. That distance makes the ensemble
//! centroid (co-districting frequencies) the key object: the sample medoid
//! is the ensemble plan nearest the centroid, outliers are plans far from
//! it, and the exact population medoid is a constrained max-cut over
//! weights derived from it.
//!
//! Module map:
//! - [`graph`]: dual graphs and synthetic grids
//! - [`districting`]: plans, validity rules, seeding, exhaustive enumeration
//! - [`metric`]: θ families and plan distances
//! - [`centroid`]: centroid accumulation, linear-time medoid, sample bounds
//! - [`chain`]: recombination chain, medoid refinement, planted outliers
//! - [`analysis`]: histograms, percentiles, relative error, seats
//! - [`kcut`]: cut reformulation of the population medoid
//! - [`formats`]: file formats shared with the `dm` CLI

// `!(x > 0.0)` rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod centroid;
pub mod chain;
pub mod districting;
pub mod error;
pub mod formats;
pub mod graph;
pub mod kcut;
pub mod metric;
pub mod pairs;
mod tree;

pub use centroid::{CentroidMatrix, CentroidScorer, CoMembership, PopulationCentroid};
pub use districting::{Plan, ValidityConfig};
pub use error::{Error, Result};
pub use graph::{DualGraph, GridSpec};
pub use metric::{Theta, ThetaKind};
