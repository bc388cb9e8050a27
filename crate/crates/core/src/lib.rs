//! Parisi variational formula for mixed p-spin models with Ising spins.
//!
//! The crate evaluates and minimizes the Parisi functional over discrete
//! functional order parameters, differentiates the minimum in the mixture
//! coefficients, classifies replica-symmetric versus symmetry-broken
//! parameters, and checks the formulas against exact enumeration of small
//! systems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod error;
pub mod finite_model;
pub mod functional;
pub mod measure;
pub mod mixture;
pub mod optimizer;
pub mod par;
pub mod phase;
pub mod quadrature;

pub use error::{Error, Result};
pub use functional::{evaluate, rs_closed_form, Evaluator, FunctionalValue, LayerRule, QuadratureConfig};
pub use measure::DiscreteMeasure;
pub use mixture::MixtureSpec;
pub use optimizer::{minimize_k, minimize_ladder, LadderReport, OptimizerOptions};
pub use par::Parallelism;
