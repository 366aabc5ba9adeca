//! c-exponential maps, image domains and cone primitives.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cost::{CostModel, Derivative, DerivativeSource};
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::hull;
use crate::report::{ConditionReport, Verdict, Witness};
use crate::sampling::{direction_in_band, radius_in, stream_rng, tags};
use crate::{Matrix, Vector};

/// Residual tolerance when the gradient is analytic.
pub const NEWTON_TOL: f64 = 1e-12;
/// Residual tolerance when the gradient itself is a finite difference (roundoff ~ ε/h).
pub const NEWTON_TOL_FD: f64 = 1e-9;
pub const NEWTON_MAX_ITER: usize = 50;
pub const NEWTON_MAX_HALVINGS: usize = 20;
/// Lattice resolution per axis for the Newton seed search.
const SEED_LATTICE: usize = 5;

/// Which family of image domains is meant: `Y*_x` (anchor in X) or `X*_y` (anchor in Y).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    #[serde(rename = "x-side")]
    X,
    #[serde(rename = "y-side")]
    Y,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::X => "x-side",
            Side::Y => "y-side",
        }
    }
}

/// Damped Newton inversion of `y ↦ −D_x c(x, y)` (or `x ↦ −D_y c(x, y)`).
#[derive(Clone, Debug)]
pub struct CExpSolver {
    cost: CostModel,
    anchor: Vector,
    side: Side,
    pub tol: f64,
    pub max_iter: usize,
    seeds: Vec<Vector>,
}

impl CExpSolver {
    pub fn new(cost: &CostModel, anchor: &Vector, side: Side) -> Result<Self> {
        let (anchor_domain, target, label) = match side {
            Side::X => (cost.x_domain(), cost.y_domain(), "X"),
            Side::Y => (cost.y_domain(), cost.x_domain(), "Y"),
        };
        if anchor.len() != cost.dim() {
            return Err(Error::DimensionMismatch { expected: cost.dim(), found: anchor.len() });
        }
        if !anchor_domain.contains(anchor, crate::cost::DOMAIN_TOL) {
            return Err(Error::DomainViolation { domain: label, point: anchor.iter().copied().collect() });
        }
        let mut seeds: Vec<Vector> = target
            .lattice(SEED_LATTICE)
            .into_iter()
            .filter(|p| target.contains(p, 0.0))
            .collect();
        if seeds.is_empty() {
            seeds.push(target.center().clone());
        }
        let which = match side {
            Side::X => Derivative::Dx,
            Side::Y => Derivative::Dy,
        };
        let probe = target.center().clone();
        let source = match side {
            Side::X => cost.derivative_source(which, anchor, &probe),
            Side::Y => cost.derivative_source(which, &probe, anchor),
        };
        let tol = match source {
            DerivativeSource::Analytic => NEWTON_TOL,
            DerivativeSource::FiniteDifference => NEWTON_TOL_FD,
        };
        Ok(CExpSolver {
            cost: cost.clone(),
            anchor: anchor.clone(),
            side,
            tol,
            max_iter: NEWTON_MAX_ITER,
            seeds,
        })
    }

    /// Solver for `exp^c_x`.
    pub fn at_x(cost: &CostModel, x: &Vector) -> Result<Self> {
        Self::new(cost, x, Side::X)
    }

    /// Solver for `exp^{c*}_y`.
    pub fn at_y(cost: &CostModel, y: &Vector) -> Result<Self> {
        Self::new(cost, y, Side::Y)
    }

    pub fn anchor(&self) -> &Vector {
        &self.anchor
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn cost(&self) -> &CostModel {
        &self.cost
    }

    /// Domain the solution lives in.
    pub fn target(&self) -> &Domain {
        match self.side {
            Side::X => self.cost.y_domain(),
            Side::Y => self.cost.x_domain(),
        }
    }

    /// The map being inverted, evaluated at a point of the target domain.
    pub fn forward(&self, z: &Vector) -> Result<Vector> {
        match self.side {
            Side::X => Ok(-self.cost.grad_x(&self.anchor, z)?),
            Side::Y => Ok(-self.cost.grad_y(z, &self.anchor)?),
        }
    }

    fn jacobian(&self, z: &Vector) -> Result<Matrix> {
        match self.side {
            Side::X => Ok(-self.cost.hess_xy(&self.anchor, z)?),
            Side::Y => Ok(-self.cost.hess_yx(z, &self.anchor)?),
        }
    }

    /// Residual norm `‖forward(z) − p‖`.
    pub fn residual(&self, z: &Vector, p: &Vector) -> Result<f64> {
        Ok((self.forward(z)? - p).norm())
    }

    fn seed(&self, p: &Vector) -> Result<Vector> {
        let mut best: Option<(f64, &Vector)> = None;
        for s in &self.seeds {
            let r = self.residual(s, p)?;
            if best.map_or(true, |(b, _)| r < b) {
                best = Some((r, s));
            }
        }
        Ok(best.map(|(_, s)| s.clone()).unwrap_or_else(|| self.target().center().clone()))
    }

    /// Solves `forward(z) = p`, seeded from the best lattice point.
    pub fn solve(&self, p: &Vector) -> Result<Vector> {
        if p.len() != self.cost.dim() {
            return Err(Error::DimensionMismatch { expected: self.cost.dim(), found: p.len() });
        }
        let guess = self.seed(p)?;
        self.newton(p, guess)
    }

    /// Solves from a caller-provided guess, falling back to the lattice seed.
    pub fn solve_from(&self, p: &Vector, guess: &Vector) -> Result<Vector> {
        let target = self.target();
        if guess.len() == p.len() && target.contains(guess, 0.0) {
            if let Ok(z) = self.newton(p, guess.clone()) {
                return Ok(z);
            }
        }
        self.solve(p)
    }

    /// Extra Newton steps past the tolerance, kept while the residual decreases, so the
    /// solution is accurate to roundoff. Used where solutions feed high-order differences.
    pub fn polish(&self, p: &Vector, mut z: Vector) -> Result<Vector> {
        let target = self.target();
        let mut rn = self.residual(&z, p)?;
        for _ in 0..3 {
            if rn == 0.0 {
                break;
            }
            let r = self.forward(&z)? - p;
            let Some(step) = self.jacobian(&z)?.lu().solve(&(-r)) else { break };
            let cand = target.pull_inside(&z, &(&z + step));
            let rc = self.residual(&cand, p)?;
            if rc >= rn {
                break;
            }
            z = cand;
            rn = rc;
        }
        Ok(z)
    }

    /// `exp^c_x(p)`; the solver must be anchored on the x-side.
    pub fn c_exp(&self, p: &Vector) -> Result<Vector> {
        if self.side != Side::X {
            return Err(Error::InvalidParameter("c_exp needs an x-side solver".into()));
        }
        self.solve(p)
    }

    /// `exp^{c*}_y(q)`; the solver must be anchored on the y-side.
    pub fn c_star_exp(&self, q: &Vector) -> Result<Vector> {
        if self.side != Side::Y {
            return Err(Error::InvalidParameter("c_star_exp needs a y-side solver".into()));
        }
        self.solve(q)
    }

    fn newton(&self, p: &Vector, mut z: Vector) -> Result<Vector> {
        let target = self.target();
        let mut r = self.forward(&z)? - p;
        let mut rn = r.norm();
        for iter in 0..self.max_iter {
            if rn <= self.tol {
                return Ok(z);
            }
            let j = self.jacobian(&z)?;
            let step = j.lu().solve(&(-&r)).ok_or(Error::SingularHessian)?;
            if !step.iter().all(|s| s.is_finite()) {
                return Err(Error::SingularHessian);
            }
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..=NEWTON_MAX_HALVINGS {
                let cand = target.pull_inside(&z, &(&z + &step * scale));
                let rc = self.forward(&cand)? - p;
                let rcn = rc.norm();
                if rcn < rn {
                    z = cand;
                    r = rc;
                    rn = rcn;
                    accepted = true;
                    break;
                }
                scale *= 0.5;
            }
            if !accepted {
                return Err(self.stalled(&z, rn, iter));
            }
        }
        if rn <= self.tol {
            Ok(z)
        } else {
            Err(self.stalled(&z, rn, self.max_iter))
        }
    }

    fn stalled(&self, z: &Vector, residual: f64, iterations: usize) -> Error {
        let target = self.target();
        if target.depth(z) <= 1e-9 * target.diameter() {
            Error::OutsideImage { residual }
        } else {
            Error::NoConvergence { iterations, residual }
        }
    }
}

/// A sampled image domain `Y*_x = −D_x c(x, Y)` or `X*_y = −D_y c(X, y)`.
#[derive(Clone, Debug)]
pub struct ImageDomain {
    pub anchor: Vector,
    pub side: Side,
    /// Boundary mesh of the target domain, in mesh order.
    pub boundary_preimages: Vec<Vector>,
    /// Images of `boundary_preimages`, in the same order.
    pub boundary_samples: Vec<Vector>,
    /// Convex hull of the boundary samples: counter-clockwise ring in dimension 2,
    /// `[min, max]` in dimension 1, empty in dimension 3.
    pub hull: Vec<Vector>,
    pub diameter: f64,
    /// Lower estimate of the inradius, from a lattice of interior images.
    pub inradius: f64,
    /// Image point attaining `inradius`.
    pub inball_center: Vector,
    /// Preimage of `inball_center`.
    pub inball_preimage: Vector,
    pub bbox: (Vector, Vector),
    solver: CExpSolver,
    ring: Vec<[f64; 2]>,
}

/// Lattice resolution per axis used for the inradius estimate.
const INRADIUS_LATTICE: usize = 9;

pub fn image_domain(cost: &CostModel, anchor: &Vector, side: Side, n_boundary: usize) -> Result<ImageDomain> {
    let dim = cost.dim();
    if n_boundary < 8 * dim {
        return Err(Error::InvalidParameter(format!(
            "n_boundary = {n_boundary} is below 8·dim = {}",
            8 * dim
        )));
    }
    if dim > 3 {
        return Err(Error::UnsupportedDimension(dim));
    }
    let solver = CExpSolver::new(cost, anchor, side)?;
    let target = solver.target().clone();
    let boundary_preimages = target.boundary_mesh(n_boundary);
    let boundary_samples = boundary_preimages
        .iter()
        .map(|b| solver.forward(b))
        .collect::<Result<Vec<_>>>()?;
    let ring: Vec<[f64; 2]> = if dim == 2 {
        boundary_samples.iter().map(|p| [p[0], p[1]]).collect()
    } else {
        Vec::new()
    };
    let hull: Vec<Vector> = match dim {
        1 => {
            let lo = boundary_samples.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let hi = boundary_samples.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            vec![DVector::from_element(1, lo), DVector::from_element(1, hi)]
        }
        2 => hull::convex_hull_2d(&ring)
            .into_iter()
            .map(|p| DVector::from_vec(vec![p[0], p[1]]))
            .collect(),
        _ => Vec::new(),
    };
    let mut diameter: f64 = 0.0;
    for (i, a) in boundary_samples.iter().enumerate() {
        for b in &boundary_samples[i + 1..] {
            diameter = diameter.max((a - b).norm());
        }
    }
    let mut lo = boundary_samples[0].clone();
    let mut hi = boundary_samples[0].clone();
    for p in &boundary_samples {
        for i in 0..dim {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let mut image = ImageDomain {
        anchor: anchor.clone(),
        side,
        boundary_preimages,
        boundary_samples,
        hull,
        diameter,
        inradius: 0.0,
        inball_center: target.center().clone(),
        inball_preimage: target.center().clone(),
        bbox: (lo, hi),
        solver,
        ring,
    };
    let mut candidates: Vec<Vector> = target
        .lattice(INRADIUS_LATTICE)
        .into_iter()
        .filter(|p| target.depth(p) > 0.0)
        .collect();
    candidates.push(target.center().clone());
    let mut best = (f64::NEG_INFINITY, target.center().clone(), target.center().clone());
    for pre in candidates {
        let img = image.solver.forward(&pre)?;
        let d = image.boundary_distance(&img);
        if d > best.0 {
            best = (d, img, pre);
        }
    }
    image.inradius = best.0.max(0.0);
    image.inball_center = best.1;
    image.inball_preimage = best.2;
    Ok(image)
}

impl ImageDomain {
    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    pub fn solver(&self) -> &CExpSolver {
        &self.solver
    }

    /// Hull inflation used by [`ImageDomain::contains`].
    pub fn tolerance(&self) -> f64 {
        1e-9 * self.diameter
    }

    /// Membership in the hull of the boundary samples. In dimension 3, where no hull
    /// is built, membership is decided by the inverse map.
    pub fn contains(&self, p: &Vector) -> bool {
        let tol = self.tolerance();
        match self.dim() {
            1 => p[0] >= self.hull[0][0] - tol && p[0] <= self.hull[1][0] + tol,
            2 => {
                let ring: Vec<[f64; 2]> = self.hull.iter().map(|v| [v[0], v[1]]).collect();
                hull::polygon_contains(&ring, [p[0], p[1]], tol)
            }
            _ => self.contains_exact(p),
        }
    }

    /// Membership decided by inverting the map and testing the preimage.
    pub fn contains_exact(&self, p: &Vector) -> bool {
        self.preimage(p).is_ok()
    }

    /// The point of the target domain mapped to `p`.
    pub fn preimage(&self, p: &Vector) -> Result<Vector> {
        self.solver.solve(p)
    }

    /// Image of a target-domain point.
    pub fn image_of(&self, z: &Vector) -> Result<Vector> {
        self.solver.forward(z)
    }

    /// Distance from `p` to the sampled boundary (polyline in dimension 2).
    pub fn boundary_distance(&self, p: &Vector) -> f64 {
        match self.dim() {
            2 => hull::ring_distance(&self.ring, [p[0], p[1]]),
            _ => self
                .boundary_samples
                .iter()
                .map(|b| (b - p).norm())
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// A boundary point: the image of a point drawn on the target domain's boundary.
    pub fn sample_boundary<R: Rng>(&self, rng: &mut R) -> Result<(Vector, Vector)> {
        let pre = self.solver.target().sample_boundary(rng);
        let img = self.solver.forward(&pre)?;
        Ok((img, pre))
    }

    /// An interior point: the image of a uniform point of the target domain.
    pub fn sample_interior<R: Rng>(&self, rng: &mut R) -> Result<(Vector, Vector)> {
        let pre = self.solver.target().sample_interior(rng);
        let img = self.solver.forward(&pre)?;
        Ok((img, pre))
    }
}

/// Tolerance on the preimage membership test of [`check_dom_conv`], relative to the
/// target domain diameter.
const DOM_CONV_TOL: f64 = 1e-9;

/// Midpoint-convexity test of the image domains on one side.
pub fn check_dom_conv(cost: &CostModel, side: Side, n_anchors: usize, n_pairs: usize, seed: u64) -> ConditionReport {
    let name = match side {
        Side::X => "dom-conv",
        Side::Y => "dom-conv-star",
    };
    let mut report = ConditionReport::new(name);
    if n_anchors == 0 || n_pairs == 0 {
        report.escalate(Verdict::Inconclusive);
        report.notes.push("no anchors or pairs requested".into());
        return report;
    }
    let tag = match side {
        Side::X => tags::DOM_CONV_X,
        Side::Y => tags::DOM_CONV_Y,
    };
    let (anchor_domain, target) = match side {
        Side::X => (cost.x_domain(), cost.y_domain()),
        Side::Y => (cost.y_domain(), cost.x_domain()),
    };
    let scale = target.diameter();
    let mut inconclusive = 0usize;
    for a in 0..n_anchors {
        let mut rng = stream_rng(seed, tag, a as u64);
        let anchor = anchor_domain.sample_interior(&mut rng);
        let solver = match CExpSolver::new(cost, &anchor, side) {
            Ok(s) => s,
            Err(e) => {
                report.n_excluded += n_pairs;
                report.notes.push(format!("anchor {a}: {e}"));
                continue;
            }
        };
        for j in 0..n_pairs {
            // odd pairs are boundary points, where non-convexity of the image shows first
            let (z0, z1) = if j % 2 == 0 {
                (target.sample_interior(&mut rng), target.sample_interior(&mut rng))
            } else {
                (target.sample_boundary(&mut rng), target.sample_boundary(&mut rng))
            };
            let (p, q) = match (solver.forward(&z0), solver.forward(&z1)) {
                (Ok(p), Ok(q)) => (p, q),
                _ => {
                    report.n_excluded += 1;
                    continue;
                }
            };
            let mid = (&p + &q) * 0.5;
            report.n_checked += 1;
            match solver.solve_from(&mid, &((&z0 + &z1) * 0.5)) {
                Ok(z) => {
                    let depth = target.depth(&z) / scale;
                    report.observe_margin(depth + DOM_CONV_TOL);
                    if depth < -DOM_CONV_TOL {
                        report.escalate(Verdict::Violated);
                        push_witness(&mut report, &anchor, &p, &q, 0.0, "preimage-outside");
                    }
                }
                Err(Error::OutsideImage { residual }) if residual <= DOM_CONV_TOL * scale => {
                    report.observe_margin(DOM_CONV_TOL - residual / scale);
                }
                Err(Error::OutsideImage { residual }) => {
                    report.observe_margin(-residual / scale.max(1e-300));
                    report.escalate(Verdict::Violated);
                    push_witness(&mut report, &anchor, &p, &q, residual, "midpoint-outside-image");
                }
                Err(e) => {
                    inconclusive += 1;
                    let residual = match e {
                        Error::NoConvergence { residual, .. } => residual,
                        _ => f64::NAN,
                    };
                    push_witness(&mut report, &anchor, &p, &q, residual, "inconclusive-solve");
                }
            }
        }
    }
    if inconclusive > 0 {
        report.escalate(Verdict::Inconclusive);
        report.notes.push(format!("{inconclusive} midpoint solves did not converge"));
    }
    report
}

const MAX_WITNESSES: usize = 8;

fn push_witness(report: &mut ConditionReport, anchor: &Vector, p: &Vector, q: &Vector, residual: f64, kind: &str) {
    if report.witnesses.len() < MAX_WITNESSES {
        report.witnesses.push(
            Witness::new(kind)
                .point("anchor", anchor)
                .point("p", p)
                .point("q", q)
                .value("midpoint_residual", residual),
        );
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConeOrientation {
    /// `⟨v − vertex, axis⟩ ≥ (1/k)|v − vertex||axis|`.
    Forward,
    /// `⟨v − vertex, axis⟩ ≤ −(1/k)|v − vertex||axis|`.
    Inverted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeSpec {
    pub vertex: Vector,
    pub axis: Vector,
    pub k: f64,
    pub orientation: ConeOrientation,
}

/// Axes shorter than this are rejected.
pub const MIN_AXIS: f64 = 1e-14;

impl ConeSpec {
    pub fn forward(vertex: Vector, axis: Vector, k: f64) -> Self {
        ConeSpec { vertex, axis, k, orientation: ConeOrientation::Forward }
    }

    pub fn inverted(vertex: Vector, axis: Vector, k: f64) -> Self {
        ConeSpec { vertex, axis, k, orientation: ConeOrientation::Inverted }
    }

    fn unit_axis(&self) -> Result<Vector> {
        let n = self.axis.norm();
        if !(n >= MIN_AXIS) {
            return Err(Error::ZeroAxis(n));
        }
        Ok(&self.axis / n)
    }

    /// A point `vertex + s·u` with `u` uniform on the cone's spherical cap and `s`
    /// uniform in `(0, r]`.
    pub fn sample<R: Rng>(&self, rng: &mut R, r: f64) -> Result<Vector> {
        let mut axis = self.unit_axis()?;
        if self.orientation == ConeOrientation::Inverted {
            axis = -axis;
        }
        let u = direction_in_band(rng, &axis, 1.0 / self.k, 1.0)
            .ok_or_else(|| Error::InvalidParameter(format!("aperture k = {}", self.k)))?;
        Ok(&self.vertex + u * radius_in(rng, r))
    }
}

/// Exact evaluation of the cone's defining inequality.
pub fn cone_contains(cone: &ConeSpec, v: &Vector) -> Result<bool> {
    let n = cone.axis.norm();
    if !(n >= MIN_AXIS) {
        return Err(Error::ZeroAxis(n));
    }
    let w = v - &cone.vertex;
    let dot = w.dot(&cone.axis);
    let bound = w.norm() * n / cone.k;
    Ok(match cone.orientation {
        ConeOrientation::Forward => dot >= bound,
        ConeOrientation::Inverted => dot <= -bound,
    })
}

/// Membership in the half-ball `B⁺_r(v0) = {v : |v − v0| ≤ r, ⟨v − v0, g⟩ ≥ 0}`.
pub fn in_half_ball(v0: &Vector, g: &Vector, r: f64, v: &Vector) -> bool {
    let w = v - v0;
    w.norm() <= r && w.dot(g) >= 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{build_cost, CostParams};

    fn v(c: &[f64]) -> Vector {
        DVector::from_column_slice(c)
    }

    fn cost(name: &str) -> CostModel {
        build_cost(name, &CostParams::default(), None).unwrap()
    }

    #[test]
    fn bilinear_exp_is_identity() {
        let c = cost("bilinear");
        let s = CExpSolver::at_x(&c, &v(&[0.3, 0.6])).unwrap();
        let y = s.c_exp(&v(&[0.25, 0.75])).unwrap();
        assert!((y - v(&[0.25, 0.75])).norm() <= 1e-12);
        let s = CExpSolver::at_y(&c, &v(&[0.3, 0.6])).unwrap();
        let x = s.c_star_exp(&v(&[0.4, 0.1])).unwrap();
        assert!((x - v(&[0.4, 0.1])).norm() <= 1e-12);
    }

    #[test]
    fn quadratic_exp_is_translation() {
        let c = cost("quadratic");
        let s = CExpSolver::at_x(&c, &v(&[0.5, 0.5])).unwrap();
        let y = s.c_exp(&v(&[0.1, 0.0])).unwrap();
        assert!((y - v(&[0.6, 0.5])).norm() <= 1e-12);
        let c = build_cost(
            "quadratic",
            &CostParams::default(),
            Some((crate::DomainSpec::unit_box(2), crate::DomainSpec::unit_box(2))),
        )
        .unwrap();
        let s = CExpSolver::at_y(&c, &v(&[0.0, 0.0])).unwrap();
        let x = s.c_star_exp(&v(&[0.3, 0.3])).unwrap();
        assert!((x - v(&[0.3, 0.3])).norm() <= 1e-12);
    }

    #[test]
    fn log_round_trip_through_forward_map() {
        let c = cost("log");
        let x = v(&[0.0, 0.0]);
        let target = v(&[1.1, 1.1]);
        // −D_x c(x, y) = (x − y)/|x − y|²
        let z = &x - &target;
        let p = &z / z.norm_squared();
        let y = CExpSolver::at_x(&c, &x).unwrap().c_exp(&p).unwrap();
        assert!((y - &target).norm() <= 1e-10);
        let xt = v(&[0.1, 0.05]);
        let anchor = v(&[1.0, 1.2]);
        let z = &xt - &anchor;
        let q = -(&z / z.norm_squared());
        let xs = CExpSolver::at_y(&c, &anchor).unwrap().c_star_exp(&q).unwrap();
        assert!((xs - xt).norm() <= 1e-10);
    }

    #[test]
    fn far_covector_is_outside_image() {
        let c = cost("bilinear");
        let s = CExpSolver::at_x(&c, &v(&[0.5, 0.5])).unwrap();
        assert!(matches!(s.solve(&v(&[3.0, 0.5])), Err(Error::OutsideImage { .. })));
    }

    #[test]
    fn wrong_side_is_rejected() {
        let c = cost("bilinear");
        let s = CExpSolver::at_x(&c, &v(&[0.5, 0.5])).unwrap();
        assert!(s.c_star_exp(&v(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn bilinear_image_is_y() {
        let c = cost("bilinear");
        let img = image_domain(&c, &v(&[0.2, 0.7]), Side::X, 64).unwrap();
        let hull: Vec<Vec<f64>> = img.hull.iter().map(|p| p.iter().copied().collect()).collect();
        assert_eq!(hull, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]);
        assert!((img.inradius - 0.5).abs() < 1e-12);
        assert!((img.diameter - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn quadratic_image_is_translated_box() {
        let c = cost("quadratic");
        let img = image_domain(&c, &v(&[0.5, 0.5]), Side::X, 64).unwrap();
        assert!((&img.bbox.0 - v(&[-0.5, -0.5])).norm() < 1e-12);
        assert!((&img.bbox.1 - v(&[0.5, 0.5])).norm() < 1e-12);
        assert!(img.contains(&v(&[0.49, -0.49])));
        assert!(!img.contains(&v(&[0.51, 0.0])));
    }

    #[test]
    fn image_needs_enough_boundary_points() {
        let c = cost("bilinear");
        assert!(image_domain(&c, &v(&[0.5, 0.5]), Side::X, 15).is_err());
    }

    #[test]
    fn log_image_interior_samples_lie_in_hull() {
        let c = cost("log");
        let img = image_domain(&c, &v(&[0.0, 0.0]), Side::X, 128).unwrap();
        assert!(img.inradius > 0.0);
        let mut rng = stream_rng(1, 0, 0);
        for _ in 0..200 {
            let (p, _) = img.sample_interior(&mut rng).unwrap();
            assert!(img.contains(&p));
        }
    }

    #[test]
    fn dom_conv_holds_for_flat_costs() {
        for name in ["bilinear", "quadratic"] {
            let r = check_dom_conv(&cost(name), Side::X, 4, 25, 0);
            assert_eq!(r.verdict, Verdict::Holds, "{name}");
            assert_eq!(r.n_checked, 100);
        }
    }

    #[test]
    fn dom_conv_fails_for_sheared_image() {
        let c = build_cost("perturbed-bilinear", &CostParams { epsilon: Some(0.5) }, None).unwrap();
        let r = check_dom_conv(&c, Side::X, 8, 50, 0);
        assert_eq!(r.verdict, Verdict::Violated);
        assert!(!r.witnesses.is_empty());
    }

    #[test]
    fn cone_examples() {
        let cone = ConeSpec::forward(v(&[0.0, 0.0]), v(&[2.0, 0.0]), 1.0);
        assert!(cone_contains(&cone, &v(&[1.0, 0.0])).unwrap());
        let cone = ConeSpec::forward(v(&[0.0, 0.0]), v(&[1.0, 0.0]), 1e6);
        assert!(!cone_contains(&cone, &v(&[0.0, 1.0])).unwrap());
        let cone = ConeSpec::forward(v(&[0.0, 0.0]), v(&[1.0, 0.0]), 2.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(cone_contains(&cone, &v(&[s, s])).unwrap());
        let zero = ConeSpec::forward(v(&[0.0, 0.0]), v(&[0.0, 0.0]), 2.0);
        assert!(matches!(cone_contains(&zero, &v(&[1.0, 0.0])), Err(Error::ZeroAxis(_))));
    }

    #[test]
    fn cone_samples_satisfy_membership() {
        let mut rng = stream_rng(3, 0, 0);
        for orientation in [ConeOrientation::Forward, ConeOrientation::Inverted] {
            let cone = ConeSpec { vertex: v(&[0.1, 0.2]), axis: v(&[0.3, -0.4]), k: 3.0, orientation };
            for _ in 0..500 {
                let p = cone.sample(&mut rng, 0.5).unwrap();
                assert!((&p - &cone.vertex).norm() <= 0.5 + 1e-15);
                // sampled on the cap, possibly on its rim up to roundoff
                let mut wider = cone.clone();
                wider.k = 3.0 * (1.0 + 1e-9);
                assert!(cone_contains(&wider, &p).unwrap());
            }
        }
    }
}
