//! Cost functions `c(x, y)` on `X × Y` and their derivatives.
//!
//! A [`CostKernel`] supplies the value and, optionally, analytic derivatives
//! through second order. A [`CostModel`] binds a kernel to its domains and
//! answers derivative queries, falling back to finite differences when the
//! kernel has no formula (or when finite differences are forced, which is how
//! the cross-check oracle runs).

mod catalog;
mod fd;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::{Matrix, Vector};

pub use catalog::{
    build_cost, default_domains, load_catalog, negative_controls, Bilinear, ConstantCost, CostCatalogEntry, CostParams,
    ExpectedVerdict, LogDistance, PerturbedBilinear, Quadratic, RankOne, PERTURBATION_SWEEP,
};
pub use fd::StepPolicy;

/// Membership slack used when checking that `(x, y) ∈ X × Y`.
pub const DOMAIN_TOL: f64 = 1e-12;

/// A cost function with optional closed-form derivatives.
///
/// Matrix conventions: `hess_xy[(i, j)] = ∂²c/∂xᵢ∂yⱼ`.
pub trait CostKernel: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, x: &Vector, y: &Vector) -> f64;

    fn grad_x(&self, _x: &Vector, _y: &Vector) -> Option<Vector> {
        None
    }

    fn grad_y(&self, _x: &Vector, _y: &Vector) -> Option<Vector> {
        None
    }

    fn hess_xy(&self, _x: &Vector, _y: &Vector) -> Option<Matrix> {
        None
    }

    fn hess_xx(&self, _x: &Vector, _y: &Vector) -> Option<Matrix> {
        None
    }

    fn hess_yy(&self, _x: &Vector, _y: &Vector) -> Option<Matrix> {
        None
    }
}

/// Derivative selector for [`CostModel::eval_derivative`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Derivative {
    Dx,
    Dy,
    Dxy,
    Dyx,
    Dxx,
    Dyy,
}

impl Derivative {
    pub const ALL: [Derivative; 6] = [
        Derivative::Dx,
        Derivative::Dy,
        Derivative::Dxy,
        Derivative::Dyx,
        Derivative::Dxx,
        Derivative::Dyy,
    ];
}

#[derive(Clone, Debug, PartialEq)]
pub enum Tensor {
    Vector(Vector),
    Matrix(Matrix),
}

impl Tensor {
    pub fn into_vector(self) -> Option<Vector> {
        match self {
            Tensor::Vector(v) => Some(v),
            Tensor::Matrix(_) => None,
        }
    }

    pub fn into_matrix(self) -> Option<Matrix> {
        match self {
            Tensor::Matrix(m) => Some(m),
            Tensor::Vector(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeSource {
    Analytic,
    FiniteDifference,
}

/// Whether closed-form derivatives are used when the kernel provides them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMode {
    PreferAnalytic,
    FiniteDifference,
}

/// A cost kernel bound to compact domains `X` and `Y`.
#[derive(Clone)]
pub struct CostModel {
    name: String,
    kernel: Arc<dyn CostKernel>,
    x_domain: Domain,
    y_domain: Domain,
    mode: DerivativeMode,
    steps: StepPolicy,
}

impl fmt::Debug for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CostModel")
            .field("name", &self.name)
            .field("kernel", &self.kernel)
            .field("x_domain", self.x_domain.spec())
            .field("y_domain", self.y_domain.spec())
            .field("mode", &self.mode)
            .finish()
    }
}

impl CostModel {
    pub fn new(name: impl Into<String>, kernel: Arc<dyn CostKernel>, x_domain: Domain, y_domain: Domain) -> Result<Self> {
        let dim = kernel.dim();
        for d in [&x_domain, &y_domain] {
            if d.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: d.dim() });
            }
        }
        Ok(CostModel {
            name: name.into(),
            kernel,
            x_domain,
            y_domain,
            mode: DerivativeMode::PreferAnalytic,
            steps: StepPolicy::default(),
        })
    }

    /// Same cost, with every derivative taken by finite differences.
    pub fn with_finite_differences(&self) -> Self {
        CostModel { mode: DerivativeMode::FiniteDifference, ..self.clone() }
    }

    pub fn with_steps(&self, steps: StepPolicy) -> Self {
        CostModel { steps, ..self.clone() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn kernel(&self) -> &dyn CostKernel {
        self.kernel.as_ref()
    }

    pub fn x_domain(&self) -> &Domain {
        &self.x_domain
    }

    pub fn y_domain(&self) -> &Domain {
        &self.y_domain
    }

    pub fn mode(&self) -> DerivativeMode {
        self.mode
    }

    pub fn steps(&self) -> StepPolicy {
        self.steps
    }

    /// Where a derivative of the given kind comes from at `(x, y)`.
    pub fn derivative_source(&self, which: Derivative, x: &Vector, y: &Vector) -> DerivativeSource {
        if self.mode == DerivativeMode::FiniteDifference {
            return DerivativeSource::FiniteDifference;
        }
        let k = self.kernel.as_ref();
        let analytic = match which {
            Derivative::Dx => k.grad_x(x, y).is_some(),
            Derivative::Dy => k.grad_y(x, y).is_some(),
            Derivative::Dxy | Derivative::Dyx => k.hess_xy(x, y).is_some(),
            Derivative::Dxx => k.hess_xx(x, y).is_some(),
            Derivative::Dyy => k.hess_yy(x, y).is_some(),
        };
        if analytic {
            DerivativeSource::Analytic
        } else {
            DerivativeSource::FiniteDifference
        }
    }

    fn check(&self, x: &Vector, y: &Vector) -> Result<()> {
        let dim = self.dim();
        for p in [x, y] {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
            }
        }
        if !self.x_domain.contains(x, DOMAIN_TOL) {
            return Err(Error::DomainViolation { domain: "X", point: x.iter().copied().collect() });
        }
        if !self.y_domain.contains(y, DOMAIN_TOL) {
            return Err(Error::DomainViolation { domain: "Y", point: y.iter().copied().collect() });
        }
        Ok(())
    }

    fn singular(x: &Vector, y: &Vector) -> Error {
        Error::SingularCost { x: x.iter().copied().collect(), y: y.iter().copied().collect() }
    }

    fn fd(&self) -> fd::FiniteDifferences<'_> {
        fd::FiniteDifferences {
            kernel: self.kernel.as_ref(),
            x_domain: &self.x_domain,
            y_domain: &self.y_domain,
            steps: self.steps,
        }
    }

    fn analytic<T>(&self, f: impl FnOnce(&dyn CostKernel) -> Option<T>) -> Option<T> {
        match self.mode {
            DerivativeMode::PreferAnalytic => f(self.kernel.as_ref()),
            DerivativeMode::FiniteDifference => None,
        }
    }

    fn finite_vector(v: Vector, x: &Vector, y: &Vector) -> Result<Vector> {
        if v.iter().all(|c| c.is_finite()) {
            Ok(v)
        } else {
            Err(Self::singular(x, y))
        }
    }

    fn finite_matrix(m: Matrix, x: &Vector, y: &Vector) -> Result<Matrix> {
        if m.iter().all(|c| c.is_finite()) {
            Ok(m)
        } else {
            Err(Self::singular(x, y))
        }
    }

    pub fn value(&self, x: &Vector, y: &Vector) -> Result<f64> {
        self.check(x, y)?;
        let v = self.kernel.value(x, y);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Self::singular(x, y))
        }
    }

    pub fn grad_x(&self, x: &Vector, y: &Vector) -> Result<Vector> {
        self.check(x, y)?;
        let g = self.analytic(|k| k.grad_x(x, y)).unwrap_or_else(|| self.fd().grad_x(x, y));
        Self::finite_vector(g, x, y)
    }

    pub fn grad_y(&self, x: &Vector, y: &Vector) -> Result<Vector> {
        self.check(x, y)?;
        let g = self.analytic(|k| k.grad_y(x, y)).unwrap_or_else(|| self.fd().grad_y(x, y));
        Self::finite_vector(g, x, y)
    }

    /// `D²_{xy} c`, rows indexed by `x`, columns by `y`.
    pub fn hess_xy(&self, x: &Vector, y: &Vector) -> Result<Matrix> {
        self.check(x, y)?;
        let h = self.analytic(|k| k.hess_xy(x, y)).unwrap_or_else(|| self.fd().hess_xy(x, y));
        Self::finite_matrix(h, x, y)
    }

    /// `D²_{yx} c`, the transpose of [`CostModel::hess_xy`].
    pub fn hess_yx(&self, x: &Vector, y: &Vector) -> Result<Matrix> {
        self.hess_xy(x, y).map(|m| m.transpose())
    }

    pub fn hess_xx(&self, x: &Vector, y: &Vector) -> Result<Matrix> {
        self.check(x, y)?;
        let h = self.analytic(|k| k.hess_xx(x, y)).unwrap_or_else(|| self.fd().hess_xx(x, y));
        Self::finite_matrix(h, x, y)
    }

    pub fn hess_yy(&self, x: &Vector, y: &Vector) -> Result<Matrix> {
        self.check(x, y)?;
        let h = self.analytic(|k| k.hess_yy(x, y)).unwrap_or_else(|| self.fd().hess_yy(x, y));
        Self::finite_matrix(h, x, y)
    }

    pub fn eval_derivative(&self, which: Derivative, x: &Vector, y: &Vector) -> Result<Tensor> {
        Ok(match which {
            Derivative::Dx => Tensor::Vector(self.grad_x(x, y)?),
            Derivative::Dy => Tensor::Vector(self.grad_y(x, y)?),
            Derivative::Dxy => Tensor::Matrix(self.hess_xy(x, y)?),
            Derivative::Dyx => Tensor::Matrix(self.hess_yx(x, y)?),
            Derivative::Dxx => Tensor::Matrix(self.hess_xx(x, y)?),
            Derivative::Dyy => Tensor::Matrix(self.hess_yy(x, y)?),
        })
    }

    /// Finite-difference `D²_{yx} c` with the y-stencil applied first, independent
    /// of the analytic `D²_{xy}` path.
    pub fn fd_hess_yx(&self, x: &Vector, y: &Vector) -> Result<Matrix> {
        self.check(x, y)?;
        Self::finite_matrix(self.fd().hess_yx(x, y), x, y)
    }
}
