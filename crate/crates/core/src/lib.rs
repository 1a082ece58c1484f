//! Sparse precision-matrix estimation for Gaussian graphical models.
//!
//! The crate provides a cardinality-constrained estimator solved by a
//! difference-of-convex (DC) algorithm ([`dc`]), the graphical lasso it is
//! built on ([`glasso`]), SCAD and adaptive-lasso baselines ([`penalties`]),
//! synthetic ground-truth generators ([`synthetic`]) and the metrics and
//! model-selection machinery used to compare them ([`eval`]).
//!
//! Everything here is pure computation over dense matrices. The crate is
//! `no_std` and only needs `alloc`; file formats, timing and the command
//! line live in the companion `dcggm` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dc;
pub mod error;
pub mod eval;
pub mod glasso;
pub mod matrix;
pub mod norms;
pub mod penalties;
pub mod synthetic;

pub use dc::{dc_fit, DcOptions, DcSolution, DcTraceEntry};
pub use error::{Error, Result};
pub use eval::{ConfusionCounts, CvResult, Estimator, Method};
pub use glasso::{glasso_fit, GlassoOptions, GlassoSolution, PenaltySpec};
pub use matrix::{Cholesky, SymMatrix};
pub use synthetic::{make_dataset, Dataset, GroundTruth, Kind, Samples};
