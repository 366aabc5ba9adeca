//! Lemma-level inequalities checked on sampled configurations.
//!
//! Every check reduces to `lhs ≤ rhs + tol` per configuration; the recorded margin is
//! `(rhs + tol − lhs)/(rhs + tol)`, so a pass has margin ≥ 0 and `0/0` counts as 0.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{m_k_kprime, StructuralConstants};
use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::geometry::{image_domain, ConeSpec, ImageDomain, Side};
use crate::report::{finite, ArgMin, Verdict, Witness};
use crate::sampling::{direction_in_band, radius_in, stream_rng, tags, unit_vector};
use crate::synthetic::{
    check_loeper, default_t_grid, estimate_qqconv_m, generate_probe, generate_probes_tagged, m_stability, probe_witness,
    sample_pair, ComparisonFunction, Probe, ProbeStrategy, DELTA_FLOOR, LOEPER_TOL,
};
use crate::{Matrix, Vector};

/// Absolute tolerance relative to the natural scale of each inequality.
pub const LEMMA_TOL: f64 = 1e-8;
/// Factor on `C₁` in the gradient lower bound.
pub const GRAD_LOWER_SLACK: f64 = 0.9;
/// Cone-lemma factor.
pub const CONE_FACTOR: f64 = 5.0;
/// Smallest usable near-boundary radius `r_k/4`, relative to `diam(Y*)`.
pub const RADIUS_FLOOR: f64 = 1e-6;
const IMAGE_BOUNDARY: usize = 64;
const ATTEMPTS: usize = 32;
const PILOT_PROBES: usize = 64;
const CONCAVE_T_STEPS: usize = 16;
const BISECTION_STEPS: usize = 48;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LemmaStatus {
    Pass,
    Fail,
    /// The lemma's hypothesis does not hold on the sampled cost.
    VacuousHypothesis,
    /// No admissible parameters for the measured constants.
    Infeasible,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub lemma_id: String,
    pub status: LemmaStatus,
    pub n_configs: usize,
    /// Configurations dropped because a solve failed or a sample left the domain.
    pub n_excluded: usize,
    /// Configurations where the lemma's hypothesis was not met.
    pub n_unmet: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(default)]
    pub estimates: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl LemmaCheck {
    pub fn new(lemma_id: &str, status: LemmaStatus) -> Self {
        LemmaCheck {
            lemma_id: lemma_id.to_string(),
            status,
            n_configs: 0,
            n_excluded: 0,
            n_unmet: 0,
            worst_margin: None,
            witness: None,
            estimates: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn estimate(&mut self, name: &str, v: f64) {
        self.estimates.insert(name.to_string(), finite(v));
    }

    /// `fail` → violated, `infeasible`/`inconclusive` → inconclusive.
    pub fn verdict(&self) -> Verdict {
        match self.status {
            LemmaStatus::Pass | LemmaStatus::VacuousHypothesis => Verdict::Holds,
            LemmaStatus::Fail => Verdict::Violated,
            LemmaStatus::Infeasible | LemmaStatus::Inconclusive => Verdict::Inconclusive,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == LemmaStatus::Pass
    }
}

/// `(rhs + tol − lhs)/(rhs + tol)`.
pub fn margin(lhs: f64, rhs: f64, tol: f64) -> f64 {
    let d = rhs + tol;
    if d > 0.0 {
        (d - lhs) / d
    } else if lhs <= d {
        0.0
    } else {
        -1.0
    }
}

/// One evaluated configuration.
struct Config {
    margin: f64,
    stat: f64,
    witness: Witness,
}

#[derive(Clone, Copy)]
enum Reduce {
    Max,
    Min,
}

/// Runs `f` over `0..n` in parallel and reduces in index order. `Ok(None)` marks an
/// unmet hypothesis, `Err` an excluded configuration.
fn collect<F>(id: &str, n: usize, stat_name: &str, reduce: Reduce, f: F) -> LemmaCheck
where
    F: Fn(usize) -> Result<Option<Config>> + Sync,
{
    let results: Vec<Result<Option<Config>>> = (0..n).into_par_iter().map(&f).collect();
    let mut check = LemmaCheck::new(id, LemmaStatus::Pass);
    let mut worst: Option<ArgMin<Witness>> = None;
    let mut stat: Option<f64> = None;
    let mut first_error = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Err(e) => {
                check.n_excluded += 1;
                first_error.get_or_insert_with(|| format!("config {i}: {e}"));
            }
            Ok(None) => check.n_unmet += 1,
            Ok(Some(c)) => {
                check.n_configs += 1;
                stat = Some(match (stat, reduce) {
                    (None, _) => c.stat,
                    (Some(s), Reduce::Max) => s.max(c.stat),
                    (Some(s), Reduce::Min) => s.min(c.stat),
                });
                worst = ArgMin::pick(worst, Some(ArgMin { value: c.margin, index: i, item: c.witness }));
            }
        }
    }
    if let Some(e) = first_error {
        check.notes.push(e);
    }
    if let Some(s) = stat {
        check.estimate(stat_name, s);
    }
    match worst {
        None => {
            check.status = if check.n_unmet > 0 { LemmaStatus::VacuousHypothesis } else { LemmaStatus::Inconclusive };
        }
        Some(w) => {
            check.worst_margin = Some(finite(w.value));
            check.status = if w.value >= 0.0 { LemmaStatus::Pass } else { LemmaStatus::Fail };
            check.witness = Some(w.item.value("config", w.index as f64));
        }
    }
    check
}

/// Worst margin of `F(v_t) − F(v₀) ≤ bound · t (F(v₁) − F(v₀))₊ + tol` over `ts`, the
/// largest sampled QQconv ratio and the `t` of the worst margin.
fn segment_check(f: &ComparisonFunction, v0: &Vector, v1: &Vector, ts: &[f64], bound: f64) -> Result<(f64, f64, f64)> {
    let seg = f.segment(v0, v1, ts)?;
    let (f0, f1) = (seg.f0(), seg.f1());
    let scale = Probe::scale(f0, f1);
    let tol = LEMMA_TOL * scale;
    let delta = f1 - f0;
    let mut worst = (f64::INFINITY, 0.0);
    let mut ratio = f64::NEG_INFINITY;
    for (&t, &ft) in seg.ts.iter().zip(&seg.f) {
        let m = margin(ft - f0, bound * t * delta.max(0.0), tol);
        if m < worst.0 {
            worst = (m, t);
        }
        if t > 0.0 && delta > DELTA_FLOOR * scale {
            ratio = ratio.max((ft - f0) / (t * delta));
        }
    }
    Ok((worst.0, ratio, worst.1))
}

fn image_at(cost: &CostModel, x0: &Vector) -> Result<ImageDomain> {
    image_domain(cost, x0, Side::X, IMAGE_BOUNDARY.max(8 * cost.dim()))
}

fn unit(v: &Vector) -> Result<Vector> {
    let n = v.norm();
    if !(n > 0.0) {
        return Err(Error::ZeroAxis(n));
    }
    Ok(v / n)
}

/// A point of the image drawn by `draw`, retried until it passes the inverse-map test.
fn draw_inside<R: Rng>(img: &ImageDomain, rng: &mut R, mut draw: impl FnMut(&mut R) -> Vector) -> Result<Vector> {
    for _ in 0..ATTEMPTS {
        let v = draw(rng);
        if img.contains_exact(&v) {
            return Ok(v);
        }
    }
    Err(Error::StencilOutOfDomain)
}

/// `|∇F(v₁) − ∇F(v₀)| ≤ 1.1·C·|x₁ − x₀|·|v₁ − v₀|`, with `v₁` at `t ∈ {1, 1/4, 1/16}`
/// along each probe.
#[allow(non_snake_case)]
pub fn check_lip_grad_F(cost: &CostModel, constants: &StructuralConstants, n: usize, seed: u64) -> LemmaCheck {
    let bound = constants.inflation * constants.c;
    let mut check = collect("lip-grad-F", n, "C_empirical", Reduce::Max, |i| {
        let Some(p) = generate_probe(cost, seed, tags::LEMMA_LIP, i as u64, ProbeStrategy::Uniform)? else {
            return Err(Error::EmptyProbeSet);
        };
        let f = ComparisonFunction::for_probe(cost, &p)?;
        let g0 = f.grad(&p.v0)?;
        let dx = (&p.x1 - &p.x0).norm();
        let mut best: Option<Config> = None;
        for t in [1.0, 0.25, 0.0625] {
            let w = p.v_at(t);
            let Ok(gw) = f.grad(&w) else { continue };
            let base = dx * (&w - &p.v0).norm();
            let lhs = (gw - &g0).norm();
            let m = margin(lhs, bound * base, LEMMA_TOL * base);
            let stat = if base > 0.0 { lhs / base } else { 0.0 };
            let keep_stat = best.as_ref().map_or(stat, |b| b.stat.max(stat));
            if best.as_ref().map_or(true, |b| m < b.margin) {
                let witness = probe_witness("lip-grad-F", i, &p).value("t", t).value("lhs", lhs).value("rhs", bound * base);
                best = Some(Config { margin: m, stat: keep_stat, witness });
            } else if let Some(b) = best.as_mut() {
                b.stat = keep_stat;
            }
        }
        best.map(Some).ok_or(Error::StencilOutOfDomain)
    });
    check.estimate("C_formula", constants.c);
    check.estimate("C_bound", bound);
    check
}

/// `|∇F(v)| ≥ 0.9·C₁·|x₁ − x₀|` at both probe endpoints and the midpoint.
pub fn check_grad_lower(cost: &CostModel, constants: &StructuralConstants, n: usize, seed: u64) -> LemmaCheck {
    let c1 = GRAD_LOWER_SLACK * constants.c1;
    let mut check = collect("grad-lower", n, "C1_empirical", Reduce::Min, |i| {
        let Some(p) = generate_probe(cost, seed, tags::LEMMA_GRAD, i as u64, ProbeStrategy::Uniform)? else {
            return Err(Error::EmptyProbeSet);
        };
        let f = ComparisonFunction::for_probe(cost, &p)?;
        let dx = (&p.x1 - &p.x0).norm();
        let mut best: Option<Config> = None;
        for t in [0.0, 0.5, 1.0] {
            let Ok(g) = f.grad(&p.v_at(t)) else { continue };
            let gn = g.norm();
            let m = margin(c1 * dx, gn, LEMMA_TOL * dx);
            let stat = (gn / dx).min(best.as_ref().map_or(f64::INFINITY, |b| b.stat));
            if best.as_ref().map_or(true, |b| m < b.margin) {
                let witness = probe_witness("grad-lower", i, &p).value("t", t).value("grad_norm", gn).value("bound", c1 * dx);
                best = Some(Config { margin: m, stat, witness });
            } else if let Some(b) = best.as_mut() {
                b.stat = stat;
            }
        }
        best.map(Some).ok_or(Error::StencilOutOfDomain)
    });
    check.estimate("C1_formula", constants.c1);
    check
}

/// Loeper on a small pilot set; `Some(witness)` when it is violated.
fn loeper_pilot(cost: &CostModel, seed: u64) -> Option<Witness> {
    let probes = generate_probes_tagged(cost, PILOT_PROBES, seed, tags::LEMMA_PILOT, ProbeStrategy::Uniform).ok()?;
    let report = check_loeper(cost, &probes, LOEPER_TOL);
    (report.verdict == Verdict::Violated).then(|| report.witnesses.into_iter().next().unwrap_or_else(|| Witness::new("loeper")))
}

/// Marks a check whose pilot run found a Loeper violation.
fn apply_pilot(check: &mut LemmaCheck, pilot: Option<Witness>) {
    if let Some(w) = pilot {
        check.status = LemmaStatus::VacuousHypothesis;
        check.notes.push("Loeper violated on the pilot set; margins are reported as measured".into());
        check.witness = Some(w);
    }
}

/// `F(v_t) − F(v₀) ≤ 5t (F(v₁) − F(v₀)) + tol` for `v₁ ∈ C_k(v₀) ∩ B_{r_k}(v₀) ∩ Y*_{x₀}`.
pub fn check_cone_5t(cost: &CostModel, constants: &StructuralConstants, k: f64, n: usize, seed: u64) -> LemmaCheck {
    if !(k >= 1.0) {
        let mut c = LemmaCheck::new("cone-5t", LemmaStatus::Inconclusive);
        c.notes.push(format!("aperture k = {k} must be at least 1"));
        return c;
    }
    let ts = default_t_grid();
    let r_k = constants.r_k(k);
    let mut check = collect("cone-5t", n, "ratio_max", Reduce::Max, |i| {
        let mut rng = stream_rng(seed, tags::LEMMA_CONE, i as u64);
        let (x0, x1) = sample_pair(cost, &mut rng).ok_or(Error::EmptyProbeSet)?;
        let img = image_at(cost, &x0)?;
        let (v0, _) = img.sample_interior(&mut rng)?;
        let f = ComparisonFunction::new(cost, &x0, &x1)?;
        let g = f.grad(&v0)?;
        let cone = ConeSpec::forward(v0.clone(), g, k);
        let r = r_k.min(img.diameter);
        let mut err = None;
        let v1 = draw_inside(&img, &mut rng, |rng| match cone.sample(rng, r) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                v0.clone()
            }
        })?;
        if let Some(e) = err {
            return Err(e);
        }
        let (m, ratio, t) = segment_check(&f, &v0, &v1, &ts, CONE_FACTOR)?;
        let p = Probe::new(x0, x1, v0, v1);
        Ok(Some(Config { margin: m, stat: ratio, witness: probe_witness("cone-5t", i, &p).value("t", t).value("radius", r) }))
    });
    check.estimate("k", k);
    check.estimate("r_k", r_k);
    apply_pilot(&mut check, loeper_pilot(cost, seed));
    check
}

/// Boundary Lipschitz cone `{v : ⟨v − v₀, u⟩ ≥ σ|v − v₀|} ∩ B_ρ(p)` lies in `Y*_{x₀}` for boundary
/// points `p` and `v₀ ∈ B_ρ(p) ∩ Y*_{x₀}`, with `u` pointing from `p` to the inball center.
pub fn check_boundary_lip_cone(cost: &CostModel, constants: &StructuralConstants, n: usize, seed: u64) -> LemmaCheck {
    const CONE_SAMPLES: usize = 4;
    let (rho, sigma) = (constants.rho, constants.sigma);
    let diam_y = cost.y_domain().diameter();
    let mut check = collect("boundary-lip-cone", n, "depth_min", Reduce::Min, |i| {
        let mut rng = stream_rng(seed, tags::LEMMA_BOUNDARY, i as u64);
        let x0 = cost.x_domain().sample_interior(&mut rng);
        let img = image_at(cost, &x0)?;
        let (p, _) = img.sample_boundary(&mut rng)?;
        let u = unit(&(&img.inball_center - &p))?;
        let v0 = if i % 4 == 0 {
            p.clone()
        } else {
            let dim = p.len();
            draw_inside(&img, &mut rng, |rng| &p + unit_vector(rng, dim) * radius_in(rng, rho))?
        };
        let reach = rho + (&v0 - &p).norm();
        let mut best: Option<Config> = None;
        for _ in 0..CONE_SAMPLES {
            let mut v = None;
            for _ in 0..ATTEMPTS {
                let dir = direction_in_band(&mut rng, &u, sigma, 1.0).ok_or(Error::ZeroAxis(0.0))?;
                let cand = &v0 + dir * radius_in(&mut rng, reach);
                if (&cand - &p).norm() <= rho {
                    v = Some(cand);
                    break;
                }
            }
            let Some(v) = v else { continue };
            let (m, depth) = match img.preimage(&v) {
                Ok(pre) => {
                    let d = img.solver().target().depth(&pre) / diam_y;
                    (d.max(0.0), d)
                }
                Err(Error::OutsideImage { .. }) => {
                    let d = -(img.boundary_distance(&v) / rho).max(1e-12);
                    (d, d)
                }
                Err(e) => return Err(e),
            };
            let stat = depth.min(best.as_ref().map_or(f64::INFINITY, |b| b.stat));
            if best.as_ref().map_or(true, |b| m < b.margin) {
                let witness = Witness::new("boundary-lip-cone")
                    .point("x0", &x0)
                    .point("p", &p)
                    .point("v0", &v0)
                    .point("v", &v)
                    .point("u", &u);
                best = Some(Config { margin: m, stat, witness });
            } else if let Some(b) = best.as_mut() {
                b.stat = stat;
            }
        }
        best.map(Some).ok_or(Error::StencilOutOfDomain)
    });
    check.estimate("rho", rho);
    check.estimate("sigma", sigma);
    check
}

/// Aperture pair `(k, k')` of the near-boundary lemma and what follows from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearBoundaryParams {
    pub k: f64,
    pub k_prime: f64,
    pub r_k: f64,
    #[serde(rename = "M_k_kprime")]
    pub m_k_kprime: f64,
    /// Interior constant `2k'`.
    #[serde(rename = "M_kprime")]
    pub m_kprime: f64,
    /// `2r_k ≤ ρ`.
    pub radius_ok: bool,
    /// `1/k' ≤ √(1 − σ²)`.
    pub aperture_ok: bool,
    /// `4 ≤ k' < k`.
    pub order_ok: bool,
    /// `r_k/4` above the resolution floor.
    pub resolvable: bool,
}

impl NearBoundaryParams {
    pub fn new(constants: &StructuralConstants, k: f64, k_prime: f64, image_diameter: f64) -> Self {
        let r_k = constants.r_k(k);
        NearBoundaryParams {
            k,
            k_prime,
            r_k,
            m_k_kprime: m_k_kprime(k, k_prime),
            m_kprime: 2.0 * k_prime,
            radius_ok: constants.linear_f || 2.0 * r_k <= constants.rho,
            aperture_ok: k_prime >= constants.k_prime_floor() * (1.0 - 1e-12),
            order_ok: (4.0..k).contains(&k_prime),
            resolvable: r_k / 4.0 >= RADIUS_FLOOR * image_diameter,
        }
    }

    pub fn admissible(&self) -> bool {
        self.radius_ok && self.aperture_ok && self.order_ok && self.resolvable
    }

    fn record(&self, check: &mut LemmaCheck) {
        check.estimate("k", self.k);
        check.estimate("k_prime", self.k_prime);
        check.estimate("r_k", self.r_k);
        check.estimate("M_k_kprime", self.m_k_kprime);
        check.estimate("M_kprime", self.m_kprime);
        if !self.admissible() {
            check.notes.push(format!(
                "(k, k') outside the lemma's hypotheses: radius_ok={}, aperture_ok={}, order_ok={}, resolvable={}",
                self.radius_ok, self.aperture_ok, self.order_ok, self.resolvable
            ));
        }
    }
}

/// Smallest admissible pair: `k' = ⌈max(4, √(L² + 1))⌉`, `k = max(2k', ⌈C₁/(Cρ)⌉)`.
pub fn select_near_boundary(constants: &StructuralConstants, image_diameter: f64) -> Result<NearBoundaryParams> {
    let k_prime = constants.k_prime_floor().max(4.0).ceil();
    let mut k = 2.0 * k_prime;
    if !constants.linear_f {
        k = k.max((constants.c1 / (constants.c * constants.rho)).ceil());
    }
    let params = NearBoundaryParams::new(constants, k, k_prime, image_diameter);
    if !params.resolvable {
        return Err(Error::InfeasibleParameters(format!(
            "r_k/4 = {:.3e} below {RADIUS_FLOOR:.0e}·diam(Y*) = {:.3e} for k = {k}, k' = {k_prime}",
            params.r_k / 4.0,
            RADIUS_FLOOR * image_diameter
        )));
    }
    Ok(params)
}

/// `diam(Y*_x)` at the center of X, the reference scale for the radius floor.
pub fn reference_image_diameter(cost: &CostModel) -> Result<f64> {
    Ok(image_at(cost, cost.x_domain().center())?.diameter)
}

/// Interior arm: `B_r(v₀) ⊂ Y*_{x₀}`, `v₁ ∈ B⁺_r(v₀)` ⇒ ratio ≤ 1.1·2k' + tol, with
/// `r = r_k` (half the boundary distance when `r_k = ∞`).
pub fn check_local_qqconv(cost: &CostModel, constants: &StructuralConstants, params: &NearBoundaryParams, n: usize, seed: u64) -> LemmaCheck {
    let ts = default_t_grid();
    let bound = constants.inflation * params.m_kprime;
    let mut check = collect("local-qqconv", n, "ratio_max", Reduce::Max, |i| {
        let mut rng = stream_rng(seed, tags::LEMMA_LOCAL, i as u64);
        let (x0, x1) = sample_pair(cost, &mut rng).ok_or(Error::EmptyProbeSet)?;
        let img = image_at(cost, &x0)?;
        let (v0, _) = img.sample_interior(&mut rng)?;
        let dist = img.boundary_distance(&v0);
        let r = if params.r_k.is_finite() { params.r_k } else { 0.5 * dist };
        // the polyline distance can overestimate by the chord sag, hence the factor 2
        if !(dist >= 2.0 * r) || !(r > 0.0) {
            return Ok(None);
        }
        let f = ComparisonFunction::new(cost, &x0, &x1)?;
        let g = unit(&f.grad(&v0)?)?;
        let v1 = draw_inside(&img, &mut rng, |rng| {
            let u = direction_in_band(rng, &g, 0.0, 1.0).unwrap_or_else(|| g.clone());
            &v0 + u * radius_in(rng, r)
        })?;
        let (m, ratio, t) = segment_check(&f, &v0, &v1, &ts, bound)?;
        let p = Probe::new(x0, x1, v0, v1);
        Ok(Some(Config { margin: m, stat: ratio, witness: probe_witness("local-qqconv", i, &p).value("t", t).value("radius", r) }))
    });
    params.record(&mut check);
    check.estimate("bound", bound);
    check
}

/// Near-boundary inequality with `M_{k,k'}` on probes with `B_{r_k/4}(v₀) ∩ ∂Y*_{x₀} ≠ ∅` and
/// `v₁ ∈ B⁺_{r_k/4}(v₀) \ C_k(v₀)`; the interior arm is [`check_local_qqconv`].
pub fn check_near_boundary_with(
    cost: &CostModel,
    constants: &StructuralConstants,
    params: &NearBoundaryParams,
    local: &LemmaCheck,
    n: usize,
    seed: u64,
) -> LemmaCheck {
    let ts = default_t_grid();
    let bound = constants.inflation * params.m_k_kprime;
    let k = params.k;
    let mut check = collect("near-boundary", n, "ratio_max", Reduce::Max, |i| {
        let mut rng = stream_rng(seed, tags::LEMMA_NEAR, i as u64);
        let (x0, x1) = sample_pair(cost, &mut rng).ok_or(Error::EmptyProbeSet)?;
        let img = image_at(cost, &x0)?;
        let r = params.r_k.min(img.diameter) / 4.0;
        let (b, _) = img.sample_boundary(&mut rng)?;
        let inward = unit(&(&img.inball_center - &b))?;
        let v0 = draw_inside(&img, &mut rng, |rng| &b + &inward * (r * rng.gen::<f64>()))?;
        let f = ComparisonFunction::new(cost, &x0, &x1)?;
        let g = unit(&f.grad(&v0)?)?;
        let v1 = draw_inside(&img, &mut rng, |rng| {
            let u = direction_in_band(rng, &g, 0.0, 1.0 / k).unwrap_or_else(|| g.clone());
            &v0 + u * radius_in(rng, r)
        })?;
        let (m, ratio, t) = segment_check(&f, &v0, &v1, &ts, bound)?;
        let p = Probe::new(x0, x1, v0, v1);
        let witness = probe_witness("near-boundary", i, &p).value("t", t).point("boundary_point", &b).value("radius", r);
        Ok(Some(Config { margin: m, stat: ratio, witness }))
    });
    params.record(&mut check);
    check.estimate("bound", bound);
    if let Some(m) = local.worst_margin {
        check.estimate("interior_arm_margin", m);
        if local.status == LemmaStatus::Fail && check.status == LemmaStatus::Pass {
            check.status = LemmaStatus::Fail;
            check.worst_margin = Some(m);
            check.witness = local.witness.clone();
        }
    }
    apply_pilot(&mut check, loeper_pilot(cost, seed));
    check
}

/// [`check_near_boundary_with`] for an explicit `(k, k')`, running the interior arm too.
/// Parameters outside the lemma's hypotheses are recorded, not rejected.
pub fn check_near_boundary(cost: &CostModel, constants: &StructuralConstants, k: f64, k_prime: f64, n: usize, seed: u64) -> LemmaCheck {
    let diam = match reference_image_diameter(cost) {
        Ok(d) => d,
        Err(e) => {
            let mut c = LemmaCheck::new("near-boundary", LemmaStatus::Inconclusive);
            c.notes.push(e.to_string());
            return c;
        }
    };
    let params = NearBoundaryParams::new(constants, k, k_prime, diam);
    let local = check_local_qqconv(cost, constants, &params, n, seed);
    check_near_boundary_with(cost, constants, &params, &local, n, seed)
}

/// A `LemmaCheck` recording why no parameters could be chosen.
pub fn infeasible(lemma_id: &str, err: &Error) -> LemmaCheck {
    let mut c = LemmaCheck::new(lemma_id, LemmaStatus::Infeasible);
    c.notes.push(err.to_string());
    c
}

/// Root of `s ↦ F(v + sν) − level` in `[−reach, reach]` by bisection; `None` if the
/// level is not bracketed inside the image.
fn level_crossing(f: &ComparisonFunction, v: &Vector, nu: &Vector, level: f64, reach: f64) -> Option<Vector> {
    let phi = |s: f64| f.eval(&(v + nu * s)).ok().map(|x| x - level);
    let p0 = phi(0.0)?;
    if p0 == 0.0 {
        return Some(v.clone());
    }
    // F increases along ν, so the crossing lies forward when below the level; the
    // bracket grows geometrically so it stays inside the image when the root is close
    let dir = if p0 < 0.0 { 1.0 } else { -1.0 };
    let (mut lo, mut hi) = (0.0, f64::NAN);
    let mut s = reach / 1024.0;
    while s <= reach * (1.0 + 1e-12) {
        let ps = phi(dir * s)?;
        if ps.signum() != p0.signum() {
            hi = dir * s;
            break;
        }
        lo = dir * s;
        s *= 2.0;
    }
    if hi.is_nan() {
        return None;
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        match phi(mid) {
            Some(pm) if pm.signum() == p0.signum() => lo = mid,
            Some(_) => hi = mid,
            None => return None,
        }
    }
    Some(v + nu * (0.5 * (lo + hi)))
}

/// Concave-method inequality with `M_{k,k'}` for `v₁ ∈ B⁺_{r}(v₀) \ C_k(v₀)` and `ν ∈ C_{k'}`,
/// on configurations where every `v_t + s_t ν` reaches `L_{v₁} ∩ B⁺_r(v₀)`.
pub fn check_concave_method(cost: &CostModel, constants: &StructuralConstants, params: &NearBoundaryParams, n: usize, seed: u64) -> LemmaCheck {
    let ts = default_t_grid();
    let coarse: Vec<f64> = (0..=CONCAVE_T_STEPS).map(|i| i as f64 / CONCAVE_T_STEPS as f64).collect();
    let bound = constants.inflation * params.m_k_kprime;
    let (k, k_prime) = (params.k, params.k_prime);
    let mut check = collect("concave-method", n, "ratio_max", Reduce::Max, |i| {
        let mut rng = stream_rng(seed, tags::LEMMA_CONCAVE, i as u64);
        let (x0, x1) = sample_pair(cost, &mut rng).ok_or(Error::EmptyProbeSet)?;
        let img = image_at(cost, &x0)?;
        let (v0, _) = img.sample_interior(&mut rng)?;
        let r = params.r_k.min(img.diameter);
        let f = ComparisonFunction::new(cost, &x0, &x1)?;
        let grad = f.grad(&v0)?;
        let g = unit(&grad)?;
        let v1 = draw_inside(&img, &mut rng, |rng| {
            let u = direction_in_band(rng, &g, 0.0, 1.0 / k).unwrap_or_else(|| g.clone());
            &v0 + u * radius_in(rng, r)
        })?;
        let nu = direction_in_band(&mut rng, &g, 1.0 / k_prime, 1.0).ok_or(Error::ZeroAxis(0.0))?;
        let level = f.eval(&v1)?;
        for &t in &coarse {
            let vt = &v0 * (1.0 - t) + &v1 * t;
            let Some(w) = level_crossing(&f, &vt, &nu, level, 2.0 * r) else { return Ok(None) };
            let d = &w - &v0;
            if d.norm() > r * (1.0 + 1e-9) || d.dot(&grad) < -1e-12 * d.norm() * grad.norm() {
                return Ok(None);
            }
        }
        let (m, ratio, t) = segment_check(&f, &v0, &v1, &ts, bound)?;
        let p = Probe::new(x0, x1, v0, v1);
        let witness = probe_witness("concave-method", i, &p).value("t", t).point("nu", &nu).value("radius", r);
        Ok(Some(Config { margin: m, stat: ratio, witness }))
    });
    params.record(&mut check);
    check.estimate("bound", bound);
    check
}

/// Loeper on `n` probes, then `M̂` on an independent set and its stability under
/// doubling (first half against all).
pub fn check_main_theorem(cost: &CostModel, n: usize, seed: u64) -> LemmaCheck {
    let mut check = LemmaCheck::new("main-theorem", LemmaStatus::Pass);
    let n = n.max(2);
    let probes = match generate_probes_tagged(cost, n, seed, tags::PROBES, ProbeStrategy::Uniform) {
        Ok(p) => p,
        Err(e) => {
            check.status = LemmaStatus::Inconclusive;
            check.notes.push(e.to_string());
            return check;
        }
    };
    let loeper = check_loeper(cost, &probes, LOEPER_TOL);
    check.estimate("loeper_probes", loeper.n_checked as f64);
    if let Some(m) = loeper.worst_margin {
        check.estimate("loeper_worst_margin", m);
    }
    match loeper.verdict {
        Verdict::Violated => {
            check.status = LemmaStatus::VacuousHypothesis;
            check.witness = loeper.witnesses.into_iter().next();
            check.notes.push("Loeper violated: the theorem's hypothesis fails".into());
            return check;
        }
        Verdict::Inconclusive => {
            check.status = LemmaStatus::Inconclusive;
            check.witness = loeper.witnesses.into_iter().next();
            check.notes.push("Loeper check inconclusive".into());
            return check;
        }
        Verdict::Holds => {}
    }
    let independent = match generate_probes_tagged(cost, n, seed, tags::PROBES_INDEPENDENT, ProbeStrategy::Uniform) {
        Ok(p) => p,
        Err(e) => {
            check.status = LemmaStatus::Inconclusive;
            check.notes.push(e.to_string());
            return check;
        }
    };
    let half = &independent[..independent.len() / 2];
    match (estimate_qqconv_m(cost, half, DELTA_FLOOR), estimate_qqconv_m(cost, &independent, DELTA_FLOOR)) {
        (Ok(h), Ok(full)) => {
            let s = m_stability(&h, &full);
            check.n_configs = full.n_probes_used;
            check.n_excluded = full.n_excluded + full.n_failed;
            check.estimate("M_hat", full.m_hat);
            check.estimate("M_hat_half", h.m_hat);
            check.estimate("relative_change", s.relative_change);
            check.worst_margin = Some(finite(margin(s.relative_change, crate::synthetic::M_STABILITY, 0.0)));
            if let Some(w) = &full.worst_probe {
                check.witness = Some(probe_witness("qqconv-argmax", w.index, &w.probe).value("t", w.t).value("ratio", w.ratio));
            }
            if !s.stable {
                check.status = LemmaStatus::Fail;
                check.notes.push("M_hat changes by more than 10% under probe doubling".into());
            }
        }
        (Err(e), _) | (_, Err(e)) => {
            check.status = LemmaStatus::Inconclusive;
            check.notes.push(e.to_string());
        }
    }
    check
}

/// Sample counts and apertures of the lemma suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LemmaCounts {
    pub n_lip: usize,
    pub n_grad: usize,
    pub n_cone: usize,
    pub n_boundary: usize,
    pub n_near: usize,
    pub n_local: usize,
    pub n_concave: usize,
    pub n_main: usize,
    pub k_cone: f64,
}

impl Default for LemmaCounts {
    fn default() -> Self {
        LemmaCounts {
            n_lip: 1000,
            n_grad: 500,
            n_cone: 500,
            n_boundary: 500,
            n_near: 500,
            n_local: 500,
            n_concave: 200,
            n_main: 10_000,
            k_cone: 8.0,
        }
    }
}

/// Every lemma check, in a fixed order.
pub fn run_lemmas(cost: &CostModel, constants: &StructuralConstants, counts: &LemmaCounts, seed: u64) -> Vec<LemmaCheck> {
    let mut out = vec![
        check_lip_grad_F(cost, constants, counts.n_lip, seed),
        check_grad_lower(cost, constants, counts.n_grad, seed),
        check_cone_5t(cost, constants, counts.k_cone, counts.n_cone, seed),
        check_boundary_lip_cone(cost, constants, counts.n_boundary, seed),
    ];
    let params = reference_image_diameter(cost).and_then(|d| select_near_boundary(constants, d));
    match params {
        Ok(params) => {
            let local = check_local_qqconv(cost, constants, &params, counts.n_local, seed);
            let near = check_near_boundary_with(cost, constants, &params, &local, counts.n_near, seed);
            let concave = check_concave_method(cost, constants, &params, counts.n_concave, seed);
            out.extend([local, concave, near]);
        }
        Err(e) => {
            for id in ["local-qqconv", "concave-method", "near-boundary"] {
                out.push(infeasible(id, &e));
            }
        }
    }
    out.push(check_main_theorem(cost, counts.n_main, seed));
    out
}

/// Measured Lipschitz constant of `g` on `B_{l/2}(center)` from `n` random pairs, and
/// the bound `4 sup_{B_l}|g| / l` with the supremum taken over `n` samples of `B_l` and
/// its boundary.
pub fn convex_lipschitz_check<R: Rng>(g: impl Fn(&Vector) -> f64, center: &Vector, l: f64, n: usize, rng: &mut R) -> (f64, f64) {
    let dim = center.len();
    let mut sup: f64 = 0.0;
    for i in 0..n {
        let r = if i % 2 == 0 { l } else { l * rng.gen::<f64>().powf(1.0 / dim as f64) };
        sup = sup.max(g(&(center + unit_vector(rng, dim) * r)).abs());
    }
    let mut lip: f64 = 0.0;
    for _ in 0..n {
        let a = center + unit_vector(rng, dim) * (0.5 * l * rng.gen::<f64>().powf(1.0 / dim as f64));
        let b = center + unit_vector(rng, dim) * (0.5 * l * rng.gen::<f64>().powf(1.0 / dim as f64));
        let d = (&a - &b).norm();
        if d > 0.0 {
            lip = lip.max((g(&a) - g(&b)).abs() / d);
        }
    }
    (lip, 4.0 * sup / l)
}

/// `x ↦ ½ xᵀQx + bᵀx + c`.
pub fn quadratic_form(q: &Matrix, b: &Vector, c: f64) -> impl Fn(&Vector) -> f64 {
    let (q, b) = (q.clone(), b.clone());
    move |x: &Vector| 0.5 * x.dot(&(&q * x)) + b.dot(x) + c
}
