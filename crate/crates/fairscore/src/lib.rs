//! Fairness-constrained score transformation.
//!
//! Given per-sample predicted probabilities, this crate fits a low-dimensional
//! convex dual problem by ADMM and applies a closed-form transform so that the
//! transformed scores satisfy group-fairness constraints (mean score parity or
//! generalized equalized odds, plus arbitrary linear constraints on
//! event-conditional mean scores) while staying as close as possible to the
//! originals in cross-entropy.
//!
//! The crate splits into:
//! - [`transform`]: the scalar transform and the dual integrand calculus,
//! - [`constraints`]: probability estimation and constraint feature vectors,
//! - [`solver`]: the ADMM dual solvers and a grid-search test oracle,
//! - [`estimators`]: built-in logistic / multinomial score models,
//! - [`pipeline`]: fit / transform / preprocess / batch orchestration,
//! - [`metrics`]: Brier, AUC and group-gap evaluation,
//! - [`model_format`]: the versioned model file format,
//! - [`cli`]: the command-line front end,
//! - [`synth`]: a seeded synthetic fixture generator.

pub mod cli;
pub mod constraints;
pub mod data;
pub mod estimators;
pub mod metrics;
pub mod model_format;
pub mod pipeline;
pub mod solver;
pub mod synth;
pub mod transform;

pub use constraints::{ConstraintKind, ConstraintSpec, ProbabilityEstimates};
pub use data::{Dataset, WeightedDataset};
pub use pipeline::{FitOptions, FstMode, FstModel};
pub use solver::{AdmmConfig, DualSolution};
pub use transform::{Multiplier, Probability};
