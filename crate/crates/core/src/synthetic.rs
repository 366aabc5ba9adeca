//! The comparison function `F`, Loeper's condition and the QQconv constant.
//!
//! For `x₀, x₁ ∈ X`, `F(v) = −c(x₁, exp_{x₀}(v)) + c(x₀, exp_{x₀}(v))` on `Y*_{x₀}`.
//! Loeper's condition is quasi-convexity of `F` along segments; QQconv asks for a
//! uniform `M` with `F(v_t) − F(v₀) ≤ M t (F(v₁) − F(v₀))₊`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::geometry::{image_domain, CExpSolver, ImageDomain, Side};
use crate::report::{ConditionReport, Verdict, Witness};
use crate::sampling::{direction_in_band, radius_in, stream_rng, tags};
use crate::Vector;

/// Intervals of the default `t` grid.
pub const T_STEPS: usize = 64;
/// Relative tolerance of the Loeper inequality.
pub const LOEPER_TOL: f64 = 1e-8;
/// Relative floor on `F(v₁) − F(v₀)` below which a probe is excluded from the M estimate.
pub const DELTA_FLOOR: f64 = 1e-9;
/// Largest relative change of `M̂` under probe doubling that counts as stable.
pub const M_STABILITY: f64 = 0.1;
/// Boundary points used for the image domains built during probe generation.
pub const PROBE_BOUNDARY: usize = 64;
const MAX_ATTEMPTS: usize = 64;
const MAX_WITNESSES: usize = 8;

/// `{0, 1/64, …, 1}`.
pub fn default_t_grid() -> Vec<f64> {
    (0..=T_STEPS).map(|i| i as f64 / T_STEPS as f64).collect()
}

/// A segment `v_t = (1−t)v₀ + t v₁` in `Y*_{x₀}` together with the pair `(x₀, x₁)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    #[serde(with = "crate::serde_vec")]
    pub x0: Vector,
    #[serde(with = "crate::serde_vec")]
    pub x1: Vector,
    #[serde(with = "crate::serde_vec")]
    pub v0: Vector,
    #[serde(with = "crate::serde_vec")]
    pub v1: Vector,
    pub t_grid: Vec<f64>,
}

impl Probe {
    pub fn new(x0: Vector, x1: Vector, v0: Vector, v1: Vector) -> Self {
        Probe { x0, x1, v0, v1, t_grid: default_t_grid() }
    }

    pub fn v_at(&self, t: f64) -> Vector {
        &self.v0 * (1.0 - t) + &self.v1 * t
    }

    /// `max(1, |F(v₀)|, |F(v₁)|)`, the scale of relative tolerances.
    pub fn scale(f0: f64, f1: f64) -> f64 {
        1f64.max(f0.abs()).max(f1.abs())
    }
}

/// `F` for a fixed pair `(x₀, x₁)`, with its own inverse-map solver.
#[derive(Clone, Debug)]
pub struct ComparisonFunction {
    cost: CostModel,
    x0: Vector,
    x1: Vector,
    solver: CExpSolver,
}

impl ComparisonFunction {
    pub fn new(cost: &CostModel, x0: &Vector, x1: &Vector) -> Result<Self> {
        if !cost.x_domain().contains(x1, crate::cost::DOMAIN_TOL) {
            return Err(Error::DomainViolation { domain: "X", point: x1.iter().copied().collect() });
        }
        Ok(ComparisonFunction {
            cost: cost.clone(),
            x0: x0.clone(),
            x1: x1.clone(),
            solver: CExpSolver::at_x(cost, x0)?,
        })
    }

    pub fn for_probe(cost: &CostModel, probe: &Probe) -> Result<Self> {
        Self::new(cost, &probe.x0, &probe.x1)
    }

    pub fn solver(&self) -> &CExpSolver {
        &self.solver
    }

    pub fn cost(&self) -> &CostModel {
        &self.cost
    }

    /// `−c(x₁, y) + c(x₀, y)`.
    pub fn value_at_y(&self, y: &Vector) -> Result<f64> {
        Ok(-self.cost.value(&self.x1, y)? + self.cost.value(&self.x0, y)?)
    }

    /// `F(v)` and `exp_{x₀}(v)`, optionally warm-started from a nearby preimage.
    pub fn eval_with(&self, v: &Vector, guess: Option<&Vector>) -> Result<(f64, Vector)> {
        let y = match guess {
            Some(g) => self.solver.solve_from(v, g)?,
            None => self.solver.solve(v)?,
        };
        Ok((self.value_at_y(&y)?, y))
    }

    pub fn eval(&self, v: &Vector) -> Result<f64> {
        self.eval_with(v, None).map(|(f, _)| f)
    }

    /// `[−D²_{yx} c(x₀, y)]⁻¹ (−D_y c(x₁, y) + D_y c(x₀, y))` at `y = exp_{x₀}(v)`.
    pub fn grad_at_y(&self, y: &Vector) -> Result<Vector> {
        let rhs = -self.cost.grad_y(&self.x1, y)? + self.cost.grad_y(&self.x0, y)?;
        let m = -self.cost.hess_yx(&self.x0, y)?;
        m.lu().solve(&rhs).ok_or(Error::SingularHessian)
    }

    pub fn grad(&self, v: &Vector) -> Result<Vector> {
        let y = self.solver.solve(v)?;
        self.grad_at_y(&y)
    }

    /// `F` along `(1−t)v₀ + t v₁` for each `t` in `ts`, warm-starting consecutive solves.
    pub fn segment(&self, v0: &Vector, v1: &Vector, ts: &[f64]) -> Result<Segment> {
        let mut f = Vec::with_capacity(ts.len());
        let mut ys: Vec<Vector> = Vec::with_capacity(ts.len());
        for &t in ts {
            let v = v0 * (1.0 - t) + v1 * t;
            let (val, y) = self.eval_with(&v, ys.last())?;
            f.push(val);
            ys.push(y);
        }
        Ok(Segment { ts: ts.to_vec(), f, ys })
    }
}

/// Values of `F` along a probe segment.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub ts: Vec<f64>,
    pub f: Vec<f64>,
    pub ys: Vec<Vector>,
}

impl Segment {
    pub fn f0(&self) -> f64 {
        self.f[0]
    }

    pub fn f1(&self) -> f64 {
        self.f[self.f.len() - 1]
    }

    /// Loeper slack `(max(F₀, F₁) − F(v_t)) / scale` and its minimizing index.
    pub fn loeper_margin(&self) -> (f64, usize) {
        let (f0, f1) = (self.f0(), self.f1());
        let top = f0.max(f1);
        let scale = Probe::scale(f0, f1);
        let mut worst = (f64::INFINITY, 0);
        for (i, f) in self.f.iter().enumerate() {
            let m = (top - f) / scale;
            if m < worst.0 {
                worst = (m, i);
            }
        }
        worst
    }

    /// Largest `(F(v_t) − F₀) / (t (F₁ − F₀))` over `t > 0` and its index.
    pub fn max_ratio(&self) -> (f64, usize) {
        let (f0, f1) = (self.f0(), self.f1());
        let delta = f1 - f0;
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, (&t, &f)) in self.ts.iter().zip(&self.f).enumerate() {
            if t <= 0.0 {
                continue;
            }
            let r = (f - f0) / (t * delta);
            if r > best.0 {
                best = (r, i);
            }
        }
        best
    }
}

/// `F(v_t)` on a probe.
#[allow(non_snake_case)]
pub fn eval_F(cost: &CostModel, probe: &Probe, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("t = {t} outside [0, 1]")));
    }
    ComparisonFunction::for_probe(cost, probe)?.eval(&probe.v_at(t))
}

/// `∇F(v_t)` on a probe, by the closed-form expression through the mixed hessian.
#[allow(non_snake_case)]
pub fn grad_F(cost: &CostModel, probe: &Probe, t: f64) -> Result<Vector> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("t = {t} outside [0, 1]")));
    }
    ComparisonFunction::for_probe(cost, probe)?.grad(&probe.v_at(t))
}

/// Central-difference gradient of `F` in `v` with step `h`.
#[allow(non_snake_case)]
pub fn grad_F_fd(f: &ComparisonFunction, v: &Vector, h: f64) -> Result<Vector> {
    let y = f.solver().solve(v)?;
    let mut g = Vector::zeros(v.len());
    for i in 0..v.len() {
        let mut vp = v.clone();
        let mut vm = v.clone();
        vp[i] += h;
        vm[i] -= h;
        let (fp, _) = f.eval_with(&vp, Some(&y))?;
        let (fm, _) = f.eval_with(&vm, Some(&y))?;
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

/// Segment values for every probe, in probe order; `Err` entries are excluded probes.
pub fn evaluate_segments(cost: &CostModel, probes: &[Probe]) -> Vec<Result<Segment>> {
    probes
        .par_iter()
        .map(|p| ComparisonFunction::for_probe(cost, p)?.segment(&p.v0, &p.v1, &p.t_grid))
        .collect()
}

pub(crate) fn probe_witness(kind: &str, index: usize, p: &Probe) -> Witness {
    Witness::new(kind)
        .point("x0", &p.x0)
        .point("x1", &p.x1)
        .point("v0", &p.v0)
        .point("v1", &p.v1)
        .value("probe", index as f64)
}

/// Loeper slack of one probe point recomputed with finite-difference derivatives at
/// half the default steps.
pub fn refined_loeper_margin(cost: &CostModel, probe: &Probe, t: f64) -> Result<f64> {
    let fd = cost.with_finite_differences().with_steps(cost.steps().halved());
    let f = ComparisonFunction::for_probe(&fd, probe)?;
    let seg = f.segment(&probe.v0, &probe.v1, &[0.0, t, 1.0])?;
    let top = seg.f0().max(seg.f1());
    Ok((top - seg.f[1]) / Probe::scale(seg.f0(), seg.f1()))
}

/// Loeper's inequality `F(v_t) ≤ max(F(v₀), F(v₁)) + tol·scale` on every probe and grid `t`.
pub fn check_loeper(cost: &CostModel, probes: &[Probe], tol: f64) -> ConditionReport {
    check_loeper_segments(cost, probes, &evaluate_segments(cost, probes), tol)
}

/// [`check_loeper`] on precomputed segments.
pub fn check_loeper_segments(cost: &CostModel, probes: &[Probe], segments: &[Result<Segment>], tol: f64) -> ConditionReport {
    let mut report = ConditionReport::new("loeper");
    let mut violations = 0usize;
    for (i, (p, s)) in probes.iter().zip(segments).enumerate() {
        let Ok(seg) = s else {
            report.n_excluded += 1;
            continue;
        };
        report.n_checked += 1;
        let (m, j) = seg.loeper_margin();
        report.observe_margin(m);
        if m < -tol {
            violations += 1;
            if report.witnesses.len() < MAX_WITNESSES {
                let t = seg.ts[j];
                let mut w = probe_witness("loeper-violation", i, p).value("t", t).value("margin", m);
                match refined_loeper_margin(cost, p, t) {
                    Ok(mr) => {
                        w = w.value("margin_refined", mr);
                        w = w.note(if mr < -tol { "reproduced" } else { "not-reproduced" });
                    }
                    Err(e) => w = w.note(format!("refinement failed: {e}")),
                }
                report.witnesses.push(w);
            }
        }
    }
    report.estimate("violations", violations as f64);
    report.estimate("tol", tol);
    if report.n_checked == 0 {
        report.escalate(Verdict::Inconclusive);
        report.notes.push("every probe failed to evaluate".into());
    } else if violations > 0 {
        // a violation only counts once it survives the step-halving recheck
        let reproduced = report.witnesses.iter().any(|w| w.note.as_deref() == Some("reproduced"));
        report.escalate(if reproduced { Verdict::Violated } else { Verdict::Inconclusive });
    }
    report
}

/// Probe and parameter attaining `M̂`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstProbe {
    pub index: usize,
    pub probe: Probe,
    pub t: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QQconvEstimate {
    /// `max(1, sup ratio)`.
    pub m_hat: f64,
    /// Unclamped supremum of the sampled ratios.
    pub raw_max: f64,
    pub n_probes_used: usize,
    /// Probes with `|F(v₁) − F(v₀)|` at or below the floor.
    pub n_excluded: usize,
    /// Probes with `F(v₁) < F(v₀)`, outside the scope of the ratio.
    pub n_descending: usize,
    /// Probes whose segment could not be evaluated.
    pub n_failed: usize,
    pub worst_probe: Option<WorstProbe>,
}

/// `M̂` over probes with `F(v₁) − F(v₀) > delta_floor · scale`, with a 3-point refinement
/// around each probe's grid maximizer.
pub fn estimate_qqconv_m(cost: &CostModel, probes: &[Probe], delta_floor: f64) -> Result<QQconvEstimate> {
    estimate_qqconv_segments(cost, probes, &evaluate_segments(cost, probes), delta_floor)
}

/// [`estimate_qqconv_m`] on precomputed segments.
pub fn estimate_qqconv_segments(
    cost: &CostModel,
    probes: &[Probe],
    segments: &[Result<Segment>],
    delta_floor: f64,
) -> Result<QQconvEstimate> {
    if !(delta_floor > 0.0) {
        return Err(Error::InvalidParameter(format!("delta_floor = {delta_floor}")));
    }
    let per_probe: Vec<Option<(f64, f64)>> = probes
        .par_iter()
        .zip(segments.par_iter())
        .map(|(p, s)| {
            let seg = s.as_ref().ok()?;
            let (f0, f1) = (seg.f0(), seg.f1());
            if f1 - f0 <= delta_floor * Probe::scale(f0, f1) {
                return None;
            }
            Some(refine_ratio(cost, p, seg))
        })
        .collect();
    let mut est = QQconvEstimate {
        m_hat: 1.0,
        raw_max: f64::NEG_INFINITY,
        n_probes_used: 0,
        n_excluded: 0,
        n_descending: 0,
        n_failed: 0,
        worst_probe: None,
    };
    for (i, (s, r)) in segments.iter().zip(&per_probe).enumerate() {
        let Ok(seg) = s else {
            est.n_failed += 1;
            continue;
        };
        let (f0, f1) = (seg.f0(), seg.f1());
        let floor = delta_floor * Probe::scale(f0, f1);
        match r {
            Some((ratio, t)) => {
                est.n_probes_used += 1;
                // strict comparison keeps the lowest index on ties
                if *ratio > est.raw_max {
                    est.raw_max = *ratio;
                    est.worst_probe = Some(WorstProbe { index: i, probe: probes[i].clone(), t: *t, ratio: *ratio });
                }
            }
            None if (f1 - f0).abs() <= floor => est.n_excluded += 1,
            None => est.n_descending += 1,
        }
    }
    if est.n_probes_used == 0 {
        return Err(Error::EmptyProbeSet);
    }
    est.m_hat = est.raw_max.max(1.0);
    Ok(est)
}

/// Grid maximum of the QQconv ratio refined at `t_i ± Δ/2`; returns `(ratio, t)`.
fn refine_ratio(cost: &CostModel, probe: &Probe, seg: &Segment) -> (f64, f64) {
    let (r, i) = seg.max_ratio();
    let mut best = (r, seg.ts[i]);
    let (f0, f1) = (seg.f0(), seg.f1());
    let Ok(f) = ComparisonFunction::for_probe(cost, probe) else {
        return best;
    };
    let n = seg.ts.len();
    let left = if i > 0 { seg.ts[i] - seg.ts[i - 1] } else { 0.0 };
    let right = if i + 1 < n { seg.ts[i + 1] - seg.ts[i] } else { 0.0 };
    for t in [seg.ts[i] - left / 2.0, seg.ts[i] + right / 2.0] {
        if t <= 0.0 || t > 1.0 || t == seg.ts[i] {
            continue;
        }
        if let Ok((ft, _)) = f.eval_with(&probe.v_at(t), Some(&seg.ys[i])) {
            let rt = (ft - f0) / (t * (f1 - f0));
            if rt > best.0 {
                best = (rt, t);
            }
        }
    }
    best
}

/// `M̂` on the first half and on all of `probes`, and their relative change.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MStability {
    pub m_half: f64,
    pub m_full: f64,
    pub relative_change: f64,
    pub stable: bool,
}

pub fn m_stability(half: &QQconvEstimate, full: &QQconvEstimate) -> MStability {
    let change = (full.m_hat - half.m_hat).abs() / half.m_hat;
    MStability { m_half: half.m_hat, m_full: full.m_hat, relative_change: change, stable: change < M_STABILITY }
}

/// How probe segments are placed in `Y*_{x₀}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProbeStrategy {
    /// Both endpoints are images of uniform points of Y.
    Uniform,
    /// `v₀` within `radius` of `∂Y*_{x₀}`.
    BoundaryBiased { radius: f64 },
    /// `v₁ ∈ B⁺_radius(v₀)`, the half-ball on the side of `∇F(v₀)`.
    HalfBall { radius: f64 },
}

/// A pair `x₀ ≠ x₁` of X.
pub(crate) fn sample_pair<R: Rng>(cost: &CostModel, rng: &mut R) -> Option<(Vector, Vector)> {
    let xd = cost.x_domain();
    for _ in 0..MAX_ATTEMPTS {
        let x0 = xd.sample_interior(rng);
        let x1 = xd.sample_interior(rng);
        if (&x1 - &x0).norm() > 1e-9 * xd.diameter() {
            return Some((x0, x1));
        }
    }
    None
}

fn measured_image(cost: &CostModel, x0: &Vector) -> Result<ImageDomain> {
    let img = image_domain(cost, x0, Side::X, PROBE_BOUNDARY.max(8 * cost.dim()))?;
    if !(img.inradius > 0.0) {
        return Err(Error::DegenerateDomain("Y*_x0 has zero measured inradius".into()));
    }
    Ok(img)
}

/// One probe of the given strategy from its own random stream; `None` if every
/// attempt was rejected.
pub fn generate_probe(cost: &CostModel, seed: u64, tag: u64, index: u64, strategy: ProbeStrategy) -> Result<Option<Probe>> {
    let mut rng = stream_rng(seed, tag, index);
    let yd = cost.y_domain();
    for _ in 0..MAX_ATTEMPTS {
        let Some((x0, x1)) = sample_pair(cost, &mut rng) else { return Ok(None) };
        let solver = CExpSolver::at_x(cost, &x0)?;
        let probe = match strategy {
            ProbeStrategy::Uniform => {
                let v0 = solver.forward(&yd.sample_interior(&mut rng))?;
                let v1 = solver.forward(&yd.sample_interior(&mut rng))?;
                Some(Probe::new(x0, x1, v0, v1))
            }
            ProbeStrategy::BoundaryBiased { radius } => {
                let img = measured_image(cost, &x0)?;
                let (b, _) = img.sample_boundary(&mut rng)?;
                let inward = &img.inball_center - &b;
                let reach = inward.norm();
                let s = (radius * rng.gen::<f64>()).min(reach);
                let v0 = &b + inward * (s / reach);
                let v1 = solver.forward(&yd.sample_interior(&mut rng))?;
                img.contains(&v0).then(|| Probe::new(x0, x1, v0, v1))
            }
            ProbeStrategy::HalfBall { radius } => {
                let img = measured_image(cost, &x0)?;
                let (v0, _) = img.sample_interior(&mut rng)?;
                let f = ComparisonFunction::new(cost, &x0, &x1)?;
                let g = f.grad(&v0)?;
                let gn = g.norm();
                if !(gn > 0.0) {
                    None
                } else {
                    let u = direction_in_band(&mut rng, &(g / gn), 0.0, 1.0)
                        .ok_or_else(|| Error::InvalidParameter("half-ball direction".into()))?;
                    let v1 = &v0 + u * radius_in(&mut rng, radius);
                    img.contains_exact(&v1).then(|| Probe::new(x0, x1, v0, v1))
                }
            }
        };
        if probe.is_some() {
            return Ok(probe);
        }
    }
    Ok(None)
}

/// `n` seeded probes. Slot `i` draws from its own stream, so a longer list extends a
/// shorter one with the same seed. Slots whose attempts are all rejected are dropped.
pub fn generate_probes(cost: &CostModel, n: usize, seed: u64, strategy: ProbeStrategy) -> Result<Vec<Probe>> {
    generate_probes_tagged(cost, n, seed, tags::PROBES, strategy)
}

pub fn generate_probes_tagged(cost: &CostModel, n: usize, seed: u64, tag: u64, strategy: ProbeStrategy) -> Result<Vec<Probe>> {
    if n == 0 {
        return Err(Error::InvalidParameter("probe count must be at least 1".into()));
    }
    let slots: Vec<Result<Option<Probe>>> =
        (0..n as u64).into_par_iter().map(|i| generate_probe(cost, seed, tag, i, strategy)).collect();
    let mut out = Vec::with_capacity(n);
    for s in slots {
        if let Some(p) = s? {
            out.push(p);
        }
    }
    Ok(out)
}

/// Midpoint convexity of sampled sublevel sets `{F ≤ F(v₀)}` of each probe's `F`.
pub fn check_sublevel_midpoints(cost: &CostModel, probes: &[Probe], n_pairs: usize, seed: u64, tol: f64) -> ConditionReport {
    let mut report = ConditionReport::new("sublevel-convexity");
    let results: Vec<(usize, usize, f64, Option<Witness>)> = probes
        .par_iter()
        .enumerate()
        .map(|(i, p)| sublevel_probe(cost, p, i, n_pairs, seed, tol))
        .collect();
    for (checked, excluded, worst, w) in results {
        report.n_checked += checked;
        report.n_excluded += excluded;
        if checked > 0 {
            report.observe_margin(worst);
        }
        if let Some(w) = w {
            report.escalate(Verdict::Violated);
            if report.witnesses.len() < MAX_WITNESSES {
                report.witnesses.push(w);
            }
        }
    }
    if report.n_checked == 0 {
        report.escalate(Verdict::Inconclusive);
    }
    report
}

fn sublevel_probe(cost: &CostModel, p: &Probe, i: usize, n_pairs: usize, seed: u64, tol: f64) -> (usize, usize, f64, Option<Witness>) {
    let Ok(f) = ComparisonFunction::for_probe(cost, p) else { return (0, n_pairs, 0.0, None) };
    let Ok(level) = f.eval(&p.v0) else { return (0, n_pairs, 0.0, None) };
    let mut rng = stream_rng(seed, tags::SUBLEVEL, i as u64);
    let yd = cost.y_domain();
    // points of the sublevel set: images of uniform points of Y with F ≤ F(v₀)
    let mut members: Vec<(Vector, Vector, f64)> = vec![(p.v0.clone(), f.solver().solve(&p.v0).unwrap_or(yd.center().clone()), level)];
    for _ in 0..4 * n_pairs {
        let y = yd.sample_interior(&mut rng);
        let (Ok(v), Ok(fv)) = (f.solver().forward(&y), f.value_at_y(&y)) else { continue };
        if fv <= level {
            members.push((v, y, fv));
        }
        if members.len() > 2 * n_pairs {
            break;
        }
    }
    let (mut checked, mut excluded, mut worst, mut witness) = (0, 0, f64::INFINITY, None);
    for j in 0..n_pairs {
        if members.len() < 2 {
            excluded += n_pairs - j;
            break;
        }
        let a = rng.gen_range(0..members.len());
        let b = rng.gen_range(0..members.len());
        if a == b {
            excluded += 1;
            continue;
        }
        let (u, yu, fu) = &members[a];
        let (w, yw, fw) = &members[b];
        let mid = (u + w) * 0.5;
        let guess = (yu + yw) * 0.5;
        match f.eval_with(&mid, Some(&guess)) {
            Ok((fm, _)) => {
                checked += 1;
                let top = fu.max(*fw);
                let scale = Probe::scale(*fu, *fw);
                let m = (top - fm) / scale;
                worst = worst.min(m);
                if m < -tol && witness.is_none() {
                    witness = Some(
                        probe_witness("sublevel-midpoint", i, p)
                            .point("u", u)
                            .point("w", w)
                            .value("margin", m),
                    );
                }
            }
            // midpoint outside a non-convex image: nothing to test
            Err(_) => excluded += 1,
        }
    }
    (checked, excluded, worst, witness)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{build_cost, CostParams};
    use nalgebra::DVector;

    fn v(c: &[f64]) -> Vector {
        DVector::from_column_slice(c)
    }

    fn cost(name: &str) -> CostModel {
        build_cost(name, &CostParams::default(), None).unwrap()
    }

    fn probe(x0: &[f64], x1: &[f64], v0: &[f64], v1: &[f64]) -> Probe {
        Probe::new(v(x0), v(x1), v(v0), v(v1))
    }

    #[test]
    fn bilinear_f_is_linear() {
        let p = probe(&[0.0, 0.0], &[1.0, 0.0], &[0.3, 0.7], &[0.9, 0.1]);
        assert!((eval_F(&cost("bilinear"), &p, 0.0).unwrap() - 0.3).abs() < 1e-15);
        let g = grad_F(&cost("bilinear"), &p, 0.4).unwrap();
        assert!((g - v(&[1.0, 0.0])).norm() < 1e-15);
    }

    #[test]
    fn coincident_points_give_zero() {
        for name in ["bilinear", "quadratic", "log"] {
            let c = cost(name);
            let x = c.x_domain().center().clone();
            let solver = CExpSolver::at_x(&c, &x).unwrap();
            let v0 = solver.forward(c.y_domain().center()).unwrap();
            let p = Probe::new(x.clone(), x.clone(), v0.clone(), v0);
            assert_eq!(eval_F(&c, &p, 0.5).unwrap(), 0.0);
            assert_eq!(grad_F(&c, &p, 0.5).unwrap().norm(), 0.0);
        }
    }

    #[test]
    fn quadratic_f_example() {
        // v = (0.5, 0.5) at x0 = 0 is y = (0.5, 0.5)
        let p = probe(&[0.0, 0.0], &[0.2, 0.0], &[0.5, 0.5], &[0.5, 0.5]);
        assert!((eval_F(&cost("quadratic"), &p, 0.0).unwrap() - 0.08).abs() < 1e-15);
    }

    #[test]
    fn log_gradient_matches_differences() {
        let c = cost("log");
        let probes = generate_probes(&c, 20, 5, ProbeStrategy::Uniform).unwrap();
        for p in &probes {
            let f = ComparisonFunction::for_probe(&c, p).unwrap();
            let vm = p.v_at(0.5);
            let g = f.grad(&vm).unwrap();
            let fd = grad_F_fd(&f, &vm, 1e-5).unwrap();
            assert!((&g - fd).norm() <= 1e-6 * g.norm().max(1.0));
        }
    }

    #[test]
    fn loeper_and_m_for_flat_costs() {
        for name in ["bilinear", "quadratic"] {
            let c = cost(name);
            let probes = generate_probes(&c, 200, 0, ProbeStrategy::Uniform).unwrap();
            let r = check_loeper(&c, &probes, LOEPER_TOL);
            assert_eq!(r.verdict, Verdict::Holds);
            let m = estimate_qqconv_m(&c, &probes, DELTA_FLOOR).unwrap();
            assert!((m.m_hat - 1.0).abs() <= 1e-9, "{name}: {}", m.m_hat);
            assert!(m.n_probes_used > 0);
        }
    }

    #[test]
    fn probes_are_deterministic_and_extend() {
        let c = cost("log");
        let a = generate_probes(&c, 12, 42, ProbeStrategy::Uniform).unwrap();
        let b = generate_probes(&c, 12, 42, ProbeStrategy::Uniform).unwrap();
        assert_eq!(a, b);
        let longer = generate_probes(&c, 24, 42, ProbeStrategy::Uniform).unwrap();
        assert_eq!(&longer[..12], &a[..]);
        assert!(generate_probes(&c, 0, 42, ProbeStrategy::Uniform).is_err());
    }

    #[test]
    fn half_ball_probes_point_up_the_gradient() {
        let c = cost("log");
        let probes = generate_probes(&c, 30, 1, ProbeStrategy::HalfBall { radius: 0.02 }).unwrap();
        assert!(!probes.is_empty());
        for p in &probes {
            let g = grad_F(&c, p, 0.0).unwrap();
            assert!((&p.v1 - &p.v0).dot(&g) >= -1e-12);
        }
    }

    #[test]
    fn boundary_biased_probes_hug_the_boundary() {
        let c = cost("bilinear");
        let probes = generate_probes(&c, 30, 1, ProbeStrategy::BoundaryBiased { radius: 0.01 }).unwrap();
        for p in &probes {
            // the image is Y itself
            let d = c.y_domain().depth(&p.v0);
            assert!((-1e-12..=0.01 + 1e-12).contains(&d));
        }
    }

    #[test]
    fn perturbed_positive_eps_violates_loeper() {
        let c = build_cost("perturbed-bilinear", &CostParams { epsilon: Some(0.5) }, None).unwrap();
        let probes = generate_probes(&c, 300, 0, ProbeStrategy::Uniform).unwrap();
        let r = check_loeper(&c, &probes, LOEPER_TOL);
        assert_eq!(r.verdict, Verdict::Violated);
        assert_eq!(r.witnesses[0].note.as_deref(), Some("reproduced"));
    }

    #[test]
    fn sublevel_sets_of_log_cost_are_midpoint_convex() {
        let c = cost("log");
        let probes = generate_probes(&c, 20, 2, ProbeStrategy::Uniform).unwrap();
        let r = check_sublevel_midpoints(&c, &probes, 10, 2, LOEPER_TOL);
        assert_eq!(r.verdict, Verdict::Holds);
        assert!(r.n_checked > 0);
    }

    #[test]
    fn empty_probe_set_is_an_error() {
        let c = cost("bilinear");
        let p = probe(&[0.2, 0.2], &[0.5, 0.5], &[0.5, 0.5], &[0.5, 0.5]);
        assert!(matches!(estimate_qqconv_m(&c, &[p], DELTA_FLOOR), Err(Error::EmptyProbeSet)));
    }
}
