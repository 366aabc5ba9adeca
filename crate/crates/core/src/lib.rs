//! Numerical checks of MTW-type regularity conditions for optimal-transport costs.
//!
//! The crate evaluates cost functions and their c-exponential maps, verifies the
//! standing structural hypotheses, tests Loeper's condition and quantitative
//! quasi-convexity on sampled segments, scans the MTW tensor, and validates the
//! quantitative lemmas that connect those conditions.

pub mod conditions;
pub mod cost;
pub mod domain;
pub mod error;
pub mod geometry;
pub mod hull;
pub mod lemmas;
pub mod mtw;
pub mod report;
pub mod sampling;
pub mod serde_vec;
pub mod synthetic;

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;

pub use cost::{CostModel, Derivative, DerivativeSource, Tensor};
pub use domain::{Domain, DomainSpec};
pub use error::{Error, Result};
pub use geometry::{cone_contains, image_domain, CExpSolver, ConeOrientation, ConeSpec, ImageDomain, Side};
pub use report::{ConditionReport, Histogram, Verdict, Witness};
pub use conditions::{StructuralConstants, StructuralCounts, StructuralResult};
pub use synthetic::{ComparisonFunction, Probe, ProbeStrategy, QQconvEstimate};
pub use mtw::{MTWEvaluation, MtwEvaluator};
pub use lemmas::{LemmaCheck, LemmaCounts, LemmaStatus};
