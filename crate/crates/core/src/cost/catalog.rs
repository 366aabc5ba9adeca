//! Built-in costs with closed-form derivatives through second order.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{CostKernel, CostModel};
use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::{Matrix, Vector};

/// Perturbation strengths swept for the `perturbed-bilinear` family.
pub const PERTURBATION_SWEEP: [f64; 5] = [0.0, 0.1, -0.1, 0.5, -0.5];

/// `c(x, y) = −⟨x, y⟩`.
#[derive(Debug, Clone)]
pub struct Bilinear {
    pub dim: usize,
}

impl CostKernel for Bilinear {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        -x.dot(y)
    }
    fn grad_x(&self, _x: &Vector, y: &Vector) -> Option<Vector> {
        Some(-y)
    }
    fn grad_y(&self, x: &Vector, _y: &Vector) -> Option<Vector> {
        Some(-x)
    }
    fn hess_xy(&self, _x: &Vector, _y: &Vector) -> Option<Matrix> {
        Some(-DMatrix::identity(self.dim, self.dim))
    }
    fn hess_xx(&self, _x: &Vector, _y: &Vector) -> Option<Matrix> {
        Some(DMatrix::zeros(self.dim, self.dim))
    }
    fn hess_yy(&self, _x: &Vector, _y: &Vector) -> Option<Matrix> {
        Some(DMatrix::zeros(self.dim, self.dim))
    }
}

/// `c(x, y) = |x − y|² / 2`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub dim: usize,
}

impl CostKernel for Quadratic {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        (x - y).norm_squared() / 2.0
    }
    fn grad_x(&self, x: &Vector, y: &Vector) -> Option<Vector> {
        Some(x - y)
    }
    fn grad_y(&self, x: &Vector, y: &Vector) -> Option<Vector> {
        Some(y - x)
    }
    fn hess_xy(&self, _x: &Vector, _y: &Vector) -> Option<Matrix> {
        Some(-DMatrix::identity(self.dim, self.dim))
    }
    fn hess_xx(&self, _x: &Vector, _y: &Vector) -> Option<Matrix> {
        Some(DMatrix::identity(self.dim, self.dim))
    }
    fn hess_yy(&self, _x: &Vector, _y: &Vector) -> Option<Matrix> {
        Some(DMatrix::identity(self.dim, self.dim))
    }
}

/// `c(x, y) = −log|x − y|`, singular on the diagonal.
#[derive(Debug, Clone)]
pub struct LogDistance {
    pub dim: usize,
}

impl LogDistance {
    /// `I/r² − 2 z zᵀ/r⁴` with `z = x − y`, i.e. `D²_{xy} c`.
    fn kernel_matrix(x: &Vector, y: &Vector) -> Matrix {
        let z = x - y;
        let r2 = z.norm_squared();
        let n = z.len();
        DMatrix::identity(n, n) / r2 - (&z * z.transpose()) * (2.0 / (r2 * r2))
    }
}

impl CostKernel for LogDistance {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        -(x - y).norm().ln()
    }
    fn grad_x(&self, x: &Vector, y: &Vector) -> Option<Vector> {
        let z = x - y;
        let r2 = z.norm_squared();
        Some(-z / r2)
    }
    fn grad_y(&self, x: &Vector, y: &Vector) -> Option<Vector> {
        let z = x - y;
        let r2 = z.norm_squared();
        Some(z / r2)
    }
    fn hess_xy(&self, x: &Vector, y: &Vector) -> Option<Matrix> {
        Some(Self::kernel_matrix(x, y))
    }
    fn hess_xx(&self, x: &Vector, y: &Vector) -> Option<Matrix> {
        Some(-Self::kernel_matrix(x, y))
    }
    fn hess_yy(&self, x: &Vector, y: &Vector) -> Option<Matrix> {
        Some(-Self::kernel_matrix(x, y))
    }
}

/// `c_ε(x, y) = −⟨x, y⟩ + ε (x·e₁)² (y·e₂)²`; requires `dim ≥ 2`.
#[derive(Debug, Clone)]
pub struct PerturbedBilinear {
    pub dim: usize,
    pub epsilon: f64,
}

impl CostKernel for PerturbedBilinear {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        -x.dot(y) + self.epsilon * x[0] * x[0] * y[1] * y[1]
    }
    fn grad_x(&self, x: &Vector, y: &Vector) -> Option<Vector> {
        let mut g = -y;
        g[0] += 2.0 * self.epsilon * x[0] * y[1] * y[1];
        Some(g)
    }
    fn grad_y(&self, x: &Vector, y: &Vector) -> Option<Vector> {
        let mut g = -x;
        g[1] += 2.0 * self.epsilon * x[0] * x[0] * y[1];
        Some(g)
    }
    fn hess_xy(&self, x: &Vector, y: &Vector) -> Option<Matrix> {
        let mut h = -DMatrix::identity(self.dim, self.dim);
        h[(0, 1)] += 4.0 * self.epsilon * x[0] * y[1];
        Some(h)
    }
    fn hess_xx(&self, _x: &Vector, y: &Vector) -> Option<Matrix> {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        h[(0, 0)] = 2.0 * self.epsilon * y[1] * y[1];
        Some(h)
    }
    fn hess_yy(&self, x: &Vector, _y: &Vector) -> Option<Matrix> {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        h[(1, 1)] = 2.0 * self.epsilon * x[0] * x[0];
        Some(h)
    }
}

/// Negative control: `c ≡ 0` (not twisted).
#[derive(Debug, Clone)]
pub struct ConstantCost {
    pub dim: usize,
}

impl CostKernel for ConstantCost {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _x: &Vector, _y: &Vector) -> f64 {
        0.0
    }
    fn grad_x(&self, _x: &Vector, _y: &Vector) -> Option<Vector> {
        Some(DVector::zeros(self.dim))
    }
    fn grad_y(&self, _x: &Vector, _y: &Vector) -> Option<Vector> {
        Some(DVector::zeros(self.dim))
    }
    fn hess_xy(&self, _x: &Vector, _y: &Vector) -> Option<Matrix> {
        Some(DMatrix::zeros(self.dim, self.dim))
    }
    fn hess_xx(&self, _x: &Vector, _y: &Vector) -> Option<Matrix> {
        Some(DMatrix::zeros(self.dim, self.dim))
    }
    fn hess_yy(&self, _x: &Vector, _y: &Vector) -> Option<Matrix> {
        Some(DMatrix::zeros(self.dim, self.dim))
    }
}

/// Negative control: `c(x, y) = (x·e₁)(y·e₁)`, whose mixed hessian has rank one.
#[derive(Debug, Clone)]
pub struct RankOne {
    pub dim: usize,
}

impl CostKernel for RankOne {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        x[0] * y[0]
    }
    fn grad_x(&self, _x: &Vector, y: &Vector) -> Option<Vector> {
        let mut g = DVector::zeros(self.dim);
        g[0] = y[0];
        Some(g)
    }
    fn grad_y(&self, x: &Vector, _y: &Vector) -> Option<Vector> {
        let mut g = DVector::zeros(self.dim);
        g[0] = x[0];
        Some(g)
    }
    fn hess_xy(&self, _x: &Vector, _y: &Vector) -> Option<Matrix> {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        h[(0, 0)] = 1.0;
        Some(h)
    }
    fn hess_xx(&self, _x: &Vector, _y: &Vector) -> Option<Matrix> {
        Some(DMatrix::zeros(self.dim, self.dim))
    }
    fn hess_yy(&self, _x: &Vector, _y: &Vector) -> Option<Matrix> {
        Some(DMatrix::zeros(self.dim, self.dim))
    }
}

/// Parameters accepted by [`build_cost`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Coupling strength of the `perturbed-bilinear` family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedVerdict {
    pub outcome: String,
    /// How the expectation was established (`closed-form`, `by-construction`, ...).
    pub provenance: String,
}

fn expect(outcome: &str, provenance: &str) -> ExpectedVerdict {
    ExpectedVerdict { outcome: outcome.into(), provenance: provenance.into() }
}

#[derive(Clone, Debug)]
pub struct CostCatalogEntry {
    pub name: String,
    pub cost: CostModel,
    pub expected_verdicts: BTreeMap<String, ExpectedVerdict>,
}

/// Default domains `(X, Y)` of a built-in cost.
pub fn default_domains(name: &str) -> Option<(DomainSpec, DomainSpec)> {
    match name {
        "bilinear" | "quadratic" | "perturbed-bilinear" | "constant" | "rank-one" => {
            Some((DomainSpec::unit_box(2), DomainSpec::unit_box(2)))
        }
        "log" => Some((
            DomainSpec::Box { lower: vec![0.0, 0.0], upper: vec![0.2, 0.2] },
            DomainSpec::Box { lower: vec![1.0, 1.0], upper: vec![1.2, 1.2] },
        )),
        _ => None,
    }
}

/// Instantiates a built-in cost by name, on the given domains or its defaults.
pub fn build_cost(name: &str, params: &CostParams, domains: Option<(DomainSpec, DomainSpec)>) -> Result<CostModel> {
    let (xs, ys) = match domains {
        Some(d) => d,
        None => default_domains(name).ok_or_else(|| Error::UnknownCost(name.to_string()))?,
    };
    let x = xs.build()?;
    let y = ys.build()?;
    let dim = x.dim();
    if y.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: y.dim() });
    }
    if params.epsilon.is_some() && name != "perturbed-bilinear" {
        return Err(Error::InvalidParameter(format!("cost `{name}` takes no epsilon")));
    }
    let kernel: Arc<dyn CostKernel> = match name {
        "bilinear" => Arc::new(Bilinear { dim }),
        "quadratic" => Arc::new(Quadratic { dim }),
        "log" => {
            if x.separation(&y) <= 0.0 {
                return Err(Error::InvalidParameter(
                    "logarithmic cost needs separated X and Y".into(),
                ));
            }
            Arc::new(LogDistance { dim })
        }
        "perturbed-bilinear" => {
            if dim < 2 {
                return Err(Error::UnsupportedDimension(dim));
            }
            let epsilon = params.epsilon.unwrap_or(0.0);
            if !epsilon.is_finite() {
                return Err(Error::InvalidParameter(format!("epsilon = {epsilon}")));
            }
            Arc::new(PerturbedBilinear { dim, epsilon })
        }
        "constant" => Arc::new(ConstantCost { dim }),
        "rank-one" => Arc::new(RankOne { dim }),
        other => return Err(Error::UnknownCost(other.to_string())),
    };
    CostModel::new(name, kernel, x, y)
}

/// Built-in costs on their default domains (`perturbed-bilinear` at ε = 0).
pub fn load_catalog() -> Vec<CostCatalogEntry> {
    let none = CostParams::default();
    let entry = |name: &str, params: &CostParams, expected: &[(&str, ExpectedVerdict)]| CostCatalogEntry {
        name: name.to_string(),
        cost: build_cost(name, params, None).expect("built-in cost"),
        expected_verdicts: expected.iter().cloned().map(|(k, v)| (k.to_string(), v)).collect(),
    };
    vec![
        entry(
            "bilinear",
            &none,
            &[
                ("a3", expect("A3w with MTW ≡ 0", "closed-form")),
                ("loeper", expect("holds", "closed-form")),
                ("qqconv", expect("M = 1", "closed-form")),
            ],
        ),
        entry(
            "quadratic",
            &none,
            &[
                ("a3", expect("A3w with MTW ≡ 0", "closed-form")),
                ("loeper", expect("holds", "closed-form")),
                ("qqconv", expect("M = 1", "closed-form")),
            ],
        ),
        entry(
            "log",
            &none,
            &[
                ("a3", expect("A3s with MTW[ξ,ξ,η,η] = 2|ξ|²|η|²", "closed-form")),
                ("loeper", expect("holds: sublevel sets of F are balls", "closed-form")),
            ],
        ),
        entry(
            "perturbed-bilinear",
            &CostParams { epsilon: Some(0.0) },
            &[
                ("a3", expect("MTW[ξ,ξ,η,η] = −4ε ξ₁²η₂²", "closed-form")),
                ("loeper", expect("holds iff ε ≤ 0", "closed-form")),
            ],
        ),
    ]
}

/// Costs that violate the standing hypotheses on purpose.
pub fn negative_controls() -> Vec<CostModel> {
    ["constant", "rank-one"]
        .iter()
        .map(|n| build_cost(n, &CostParams::default(), None).expect("control cost"))
        .collect()
}
