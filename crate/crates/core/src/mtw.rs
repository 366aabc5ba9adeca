//! `A(x, p) = −D²_xx c(x, exp_x(p))` and the MTW tensor `D²_pp A`.
//!
//! `MTW[ξ,ξ,η,η]` is the second derivative along `η` of `q ↦ ξᵀA(x,q)ξ`, taken by
//! central differences in `p` and Richardson-extrapolated over two steps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::geometry::{image_domain, CExpSolver, Side};
use crate::report::{ConditionReport, Histogram, Verdict, Witness};
use crate::sampling::{orthogonal_unit, stream_rng, tags, unit_vector};
use crate::{Matrix, Vector};

/// `h_p` relative to `diam(Y*_x)`.
pub const STEP_P: f64 = 1e-3;
/// `h_x` relative to `diam(X)` for the inner x-differences of the default path.
pub const STEP_X: f64 = 1e-4;
/// A3w threshold relative to the value scale.
pub const THETA_W: f64 = 1e-5;
/// A3s threshold relative to the value scale.
pub const THETA_S: f64 = 1e-4;
/// Orthogonality slack `|⟨ξ, η⟩| / (|ξ||η|)`.
pub const ORTHO_TOL: f64 = 1e-12;
const HISTOGRAM_BINS: usize = 32;
const IMAGE_BOUNDARY: usize = 64;
const MAX_WITNESSES: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MTWEvaluation {
    #[serde(with = "crate::serde_vec")]
    pub x: Vector,
    #[serde(with = "crate::serde_vec")]
    pub p: Vector,
    #[serde(with = "crate::serde_vec")]
    pub xi: Vector,
    #[serde(with = "crate::serde_vec")]
    pub eta: Vector,
    pub value: f64,
    pub step_p: f64,
}

/// Evaluates `A` and the MTW tensor at a fixed base point `x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Route {
    /// `D²_xx c` from the model: closed form when the kernel has one.
    Model,
    /// Central differences of the closed-form `D_x c` in `x` with step `h_x`.
    FiniteX,
}

#[derive(Clone, Debug)]
pub struct MtwEvaluator {
    cost: CostModel,
    x: Vector,
    solver: CExpSolver,
    /// Default `h_p`.
    pub step_p: f64,
    /// Inner `h_x`.
    pub step_x: f64,
}

impl MtwEvaluator {
    /// Measures `Y*_x` to set `h_p = 1e-3 · diam(Y*_x)`.
    pub fn new(cost: &CostModel, x: &Vector) -> Result<Self> {
        let img = image_domain(cost, x, Side::X, IMAGE_BOUNDARY.max(8 * cost.dim()))?;
        Self::with_step(cost, x, STEP_P * img.diameter)
    }

    pub fn with_step(cost: &CostModel, x: &Vector, step_p: f64) -> Result<Self> {
        if !(step_p > 0.0) {
            return Err(Error::InvalidParameter(format!("step_p = {step_p}")));
        }
        let step_x = STEP_X * cost.x_domain().diameter();
        Ok(MtwEvaluator { cost: cost.clone(), x: x.clone(), solver: CExpSolver::at_x(cost, x)?, step_p, step_x })
    }

    fn exp(&self, p: &Vector, guess: Option<&Vector>) -> Result<Vector> {
        let y = match guess {
            Some(g) => self.solver.solve_from(p, g),
            None => self.solver.solve(p),
        }?;
        self.solver.polish(p, y)
    }

    fn a_at_y(&self, route: Route, y: &Vector) -> Result<Matrix> {
        let kernel = self.cost.kernel();
        match (route, kernel.grad_x(&self.x, y)) {
            (Route::FiniteX, Some(_)) => {
                let n = self.x.len();
                let h = self.step_x;
                let mut m = Matrix::zeros(n, n);
                for j in 0..n {
                    let mut xp = self.x.clone();
                    let mut xm = self.x.clone();
                    xp[j] += h;
                    xm[j] -= h;
                    let gp = kernel.grad_x(&xp, y).ok_or(Error::SingularHessian)?;
                    let gm = kernel.grad_x(&xm, y).ok_or(Error::SingularHessian)?;
                    m.set_column(j, &((gp - gm) / (2.0 * h)));
                }
                let m = (&m + m.transpose()) * 0.5;
                if m.iter().all(|c| c.is_finite()) {
                    Ok(-m)
                } else {
                    Err(Error::SingularCost { x: self.x.iter().copied().collect(), y: y.iter().copied().collect() })
                }
            }
            _ => Ok(-self.cost.hess_xx(&self.x, y)?),
        }
    }

    /// `A(x, p)`.
    pub fn eval_a(&self, p: &Vector) -> Result<Matrix> {
        let y = self.exp(p, None)?;
        self.a_at_y(Route::Model, &y)
    }

    /// `ξᵀA(x, q)ξ` at the stencil point `q`, solved from the center preimage so that
    /// the value depends on `q` only.
    fn g(&self, route: Route, q: &Vector, center: &Vector, xi: &Vector) -> Result<f64> {
        let y = match self.exp(q, Some(center)) {
            Ok(y) => y,
            Err(Error::OutsideImage { .. }) => return Err(Error::StencilOutOfDomain),
            Err(e) => return Err(e),
        };
        let a = self.a_at_y(route, &y)?;
        Ok(xi.dot(&(a * xi)))
    }

    /// Richardson combination `(4D(h/2) − D(h))/3` of second central differences.
    fn richardson(&self, route: Route, p: &Vector, xi: &Vector, eta: &Vector, h: f64) -> Result<f64> {
        let center = match self.exp(p, None) {
            Ok(y) => y,
            Err(Error::OutsideImage { .. }) => return Err(Error::StencilOutOfDomain),
            Err(e) => return Err(e),
        };
        let g0 = xi.dot(&(self.a_at_y(route, &center)? * xi));
        let second = |s: f64| -> Result<f64> {
            let plus = self.g(route, &(p + eta * s), &center, xi)?;
            let minus = self.g(route, &(p - eta * s), &center, xi)?;
            Ok(((plus + minus) - 2.0 * g0) / (s * s))
        };
        let coarse = second(h)?;
        let fine = second(h / 2.0)?;
        Ok((4.0 * fine - coarse) / 3.0)
    }

    fn check_pair(xi: &Vector, eta: &Vector) -> Result<()> {
        let (nx, ne) = (xi.norm(), eta.norm());
        if !(nx > 0.0 && ne > 0.0) {
            return Err(Error::InvalidParameter("ξ and η must be nonzero".into()));
        }
        if xi.dot(eta).abs() > ORTHO_TOL * nx * ne {
            return Err(Error::InvalidParameter("ξ and η are not orthogonal".into()));
        }
        Ok(())
    }

    /// `MTW[ξ,ξ,η,η]` with steps `h_p` and `h_p/2`.
    pub fn eval(&self, p: &Vector, xi: &Vector, eta: &Vector) -> Result<MTWEvaluation> {
        self.eval_at_step(p, xi, eta, self.step_p)
    }

    pub fn eval_at_step(&self, p: &Vector, xi: &Vector, eta: &Vector, step: f64) -> Result<MTWEvaluation> {
        Self::check_pair(xi, eta)?;
        let value = self.richardson(Route::Model, p, xi, eta, step)?;
        Ok(MTWEvaluation { x: self.x.clone(), p: p.clone(), xi: xi.clone(), eta: eta.clone(), value, step_p: step })
    }

    /// The refined path: steps `h_p/2`, `h_p/4`.
    pub fn eval_oracle(&self, p: &Vector, xi: &Vector, eta: &Vector) -> Result<MTWEvaluation> {
        Self::check_pair(xi, eta)?;
        let step = self.step_p / 2.0;
        let value = self.richardson(Route::Model, p, xi, eta, step)?;
        Ok(MTWEvaluation { x: self.x.clone(), p: p.clone(), xi: xi.clone(), eta: eta.clone(), value, step_p: step })
    }

    /// Default steps with `D²_xx c` taken by differences of `D_x c` in `x` (step `h_x`).
    /// Roundoff ~ `ε/(h_x h_p²)`, so only useful where the value is O(1).
    pub fn eval_finite_x(&self, p: &Vector, xi: &Vector, eta: &Vector) -> Result<MTWEvaluation> {
        Self::check_pair(xi, eta)?;
        let value = self.richardson(Route::FiniteX, p, xi, eta, self.step_p)?;
        Ok(MTWEvaluation { x: self.x.clone(), p: p.clone(), xi: xi.clone(), eta: eta.clone(), value, step_p: self.step_p })
    }
}

/// `A(x, p) = −D²_xx c(x, exp_x(p))`.
pub fn eval_a(cost: &CostModel, x: &Vector, p: &Vector) -> Result<Matrix> {
    let solver = CExpSolver::at_x(cost, x)?;
    let y = solver.polish(p, solver.solve(p)?)?;
    Ok(-cost.hess_xx(x, &y)?)
}

/// `MTW[ξ,ξ,η,η]` at `(x, p)` with the default steps.
pub fn eval_mtw(cost: &CostModel, x: &Vector, p: &Vector, xi: &Vector, eta: &Vector) -> Result<MTWEvaluation> {
    MtwEvaluator::new(cost, x)?.eval(p, xi, eta)
}

/// Scan output: the report and every successful evaluation, in scan order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct A3Scan {
    pub report: ConditionReport,
    pub evaluations: Vec<MTWEvaluation>,
}

/// Seeded base point `(x, p)` of scan point `i` and its `n_dirs` orthonormal pairs.
fn scan_point(cost: &CostModel, seed: u64, i: usize, n_dirs: usize) -> Result<(MtwEvaluator, Vector, Vec<(Vector, Vector)>)> {
    let mut rng = stream_rng(seed, tags::A3_SCAN, i as u64);
    let x = cost.x_domain().sample_interior(&mut rng);
    let y = cost.y_domain().sample_interior(&mut rng);
    let ev = MtwEvaluator::new(cost, &x)?;
    let p = ev.solver.forward(&y)?;
    let mut dirs = Vec::with_capacity(n_dirs);
    for _ in 0..n_dirs {
        let xi = unit_vector(&mut rng, cost.dim());
        let eta = orthogonal_unit(&mut rng, &xi).ok_or(Error::UnsupportedDimension(cost.dim()))?;
        dirs.push((xi, eta));
    }
    Ok((ev, p, dirs))
}

/// `(A3w)` / `(A3s)` over seeded base points and orthonormal direction pairs.
pub fn scan_a3(cost: &CostModel, n_points: usize, n_dirs: usize, seed: u64) -> A3Scan {
    let mut report = ConditionReport::new("a3");
    let per_point: Vec<(Vec<MTWEvaluation>, usize, Option<String>)> = (0..n_points)
        .into_par_iter()
        .map(|i| match scan_point(cost, seed, i, n_dirs) {
            Err(e) => (Vec::new(), n_dirs, Some(format!("point {i}: {e}"))),
            Ok((ev, p, dirs)) => {
                let mut out = Vec::with_capacity(dirs.len());
                let mut skipped = 0;
                for (xi, eta) in &dirs {
                    match ev.eval(&p, xi, eta) {
                        Ok(m) => out.push(m),
                        Err(_) => skipped += 1,
                    }
                }
                (out, skipped, None)
            }
        })
        .collect();
    let mut evaluations = Vec::new();
    for (evs, skipped, note) in per_point {
        report.n_excluded += skipped;
        if let Some(n) = note {
            if report.notes.len() < MAX_WITNESSES {
                report.notes.push(n);
            }
        }
        evaluations.extend(evs);
    }
    report.n_checked = evaluations.len();
    if evaluations.is_empty() {
        report.escalate(Verdict::Inconclusive);
        return A3Scan { report, evaluations };
    }
    let values: Vec<f64> = evaluations.iter().map(|e| e.value).collect();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let (theta_w, theta_s) = (THETA_W * scale, THETA_S * scale);
    // lowest index wins ties
    let (imin, vmin) = values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) });
    report.estimate("min", vmin);
    report.estimate("max", values.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    report.estimate("scale", scale);
    report.estimate("theta_w", theta_w);
    report.estimate("theta_s", theta_s);
    report.observe_margin((vmin + theta_w) / scale);
    report.histogram = Histogram::from_values(&values, HISTOGRAM_BINS);
    let worst = &evaluations[imin];
    let mut witness = Witness::new("argmin")
        .point("x", &worst.x)
        .point("p", &worst.p)
        .point("xi", &worst.xi)
        .point("eta", &worst.eta)
        .value("value", worst.value)
        .value("step_p", worst.step_p);
    if vmin > theta_s {
        report.label = Some("A3s".into());
    } else if vmin >= -theta_w {
        report.label = Some("A3w".into());
    } else {
        // a violation must survive halving h_p
        let refined = MtwEvaluator::with_step(cost, &worst.x, worst.step_p / 2.0)
            .and_then(|ev| ev.eval(&worst.p, &worst.xi, &worst.eta));
        match refined {
            Ok(r) if r.value < -theta_w => {
                witness = witness.value("value_half_step", r.value).note("reproduced");
                report.escalate(Verdict::Violated);
                report.label = Some("violated".into());
            }
            Ok(r) => {
                witness = witness.value("value_half_step", r.value).note("not-reproduced");
                report.escalate(Verdict::Inconclusive);
            }
            Err(e) => {
                witness = witness.note(format!("refinement failed: {e}"));
                report.escalate(Verdict::Inconclusive);
            }
        }
    }
    report.witnesses.push(witness);
    A3Scan { report, evaluations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{build_cost, CostParams};
    use nalgebra::{DMatrix, DVector};

    fn v(c: &[f64]) -> Vector {
        DVector::from_column_slice(c)
    }

    fn cost(name: &str) -> CostModel {
        build_cost(name, &CostParams::default(), None).unwrap()
    }

    #[test]
    fn a_for_flat_costs() {
        let x = v(&[0.5, 0.5]);
        assert_eq!(eval_a(&cost("bilinear"), &x, &v(&[0.3, 0.4])).unwrap(), DMatrix::zeros(2, 2));
        let a = eval_a(&cost("quadratic"), &x, &v(&[0.1, -0.2])).unwrap();
        assert_eq!(a, -DMatrix::<f64>::identity(2, 2));
    }

    #[test]
    fn log_a_matches_closed_form() {
        let c = cost("log");
        let x = v(&[0.0, 0.0]);
        let y = v(&[1.1, 1.1]);
        let z = &x - &y;
        let p = &z / z.norm_squared();
        // A = |p|² I − 2 p pᵀ
        let expect = DMatrix::identity(2, 2) * p.norm_squared() - (&p * p.transpose()) * 2.0;
        let a = eval_a(&c, &x, &p).unwrap();
        assert!((a - expect).amax() <= 1e-5);
    }

    #[test]
    fn flat_costs_have_zero_tensor() {
        for name in ["bilinear", "quadratic"] {
            let s = scan_a3(&cost(name), 10, 4, 0);
            assert_eq!(s.report.label.as_deref(), Some("A3w"));
            assert!(s.evaluations.iter().all(|e| e.value.abs() <= 1e-9));
        }
    }

    #[test]
    fn log_cost_is_strictly_positive() {
        let s = scan_a3(&cost("log"), 10, 4, 0);
        assert_eq!(s.report.label.as_deref(), Some("A3s"));
        for e in &s.evaluations {
            assert!((e.value - 2.0).abs() < 1e-4, "{}", e.value);
        }
    }

    #[test]
    fn perturbed_closed_form_and_sign() {
        for eps in [0.5, -0.5] {
            let c = build_cost("perturbed-bilinear", &CostParams { epsilon: Some(eps) }, None).unwrap();
            let x = v(&[0.4, 0.6]);
            let ev = MtwEvaluator::new(&c, &x).unwrap();
            let p = ev.solver.forward(&v(&[0.5, 0.5])).unwrap();
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let (xi, eta) = (v(&[s, s]), v(&[-s, s]));
            let m = ev.eval(&p, &xi, &eta).unwrap();
            // −4ε ξ₁² η₂²
            assert!((m.value + eps).abs() < 1e-6, "{}", m.value);
            let scan = scan_a3(&c, 10, 4, 0);
            let expect = if eps > 0.0 { Verdict::Violated } else { Verdict::Holds };
            assert_eq!(scan.report.verdict, expect);
        }
    }

    #[test]
    fn stencil_symmetry_and_scaling() {
        let c = cost("log");
        let x = v(&[0.1, 0.05]);
        let ev = MtwEvaluator::new(&c, &x).unwrap();
        let p = ev.solver.forward(&v(&[1.1, 1.05])).unwrap();
        let (xi, eta) = (v(&[0.6, 0.8]), v(&[-0.8, 0.6]));
        let a = ev.eval(&p, &xi, &eta).unwrap().value;
        let b = ev.eval(&p, &xi, &(-&eta)).unwrap().value;
        assert!((a - b).abs() <= 1e-9);
        let d = ev.eval(&p, &(&xi * 2.0), &eta).unwrap().value;
        assert!((d - 4.0 * a).abs() <= 1e-8 * (4.0 * a).abs());
    }

    #[test]
    fn default_and_oracle_paths_agree() {
        for name in ["bilinear", "quadratic", "log", "perturbed-bilinear"] {
            let c = cost(name);
            for i in 0..10 {
                let (ev, p, dirs) = scan_point(&c, 7, i, 1).unwrap();
                let (xi, eta) = &dirs[0];
                let (Ok(a), Ok(b)) = (ev.eval(&p, xi, eta), ev.eval_oracle(&p, xi, eta)) else { continue };
                assert!((a.value - b.value).abs() <= 1e-6f64.max(1e-3 * b.value.abs()), "{name}: {} vs {}", a.value, b.value);
            }
        }
    }

    #[test]
    fn finite_x_route_agrees_on_log() {
        let c = cost("log");
        for i in 0..10 {
            let (ev, p, dirs) = scan_point(&c, 11, i, 1).unwrap();
            let (xi, eta) = &dirs[0];
            let (Ok(a), Ok(b)) = (ev.eval_finite_x(&p, xi, eta), ev.eval_oracle(&p, xi, eta)) else { continue };
            assert_eq!(a.value.signum(), b.value.signum());
            assert!((a.value - b.value).abs() <= 1e-3 * b.value.abs(), "{} vs {}", a.value, b.value);
        }
    }

    #[test]
    fn non_orthogonal_pair_is_rejected() {
        let c = cost("bilinear");
        assert!(eval_mtw(&c, &v(&[0.5, 0.5]), &v(&[0.5, 0.5]), &v(&[1.0, 0.0]), &v(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn stencil_leaving_the_image_is_reported() {
        let c = cost("bilinear");
        let ev = MtwEvaluator::new(&c, &v(&[0.5, 0.5])).unwrap();
        let r = ev.eval(&v(&[1.0, 0.5]), &v(&[0.0, 1.0]), &v(&[1.0, 0.0]));
        assert!(matches!(r, Err(Error::StencilOutOfDomain)));
    }
}
