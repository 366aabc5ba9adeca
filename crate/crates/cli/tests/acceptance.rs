//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use mtwv::config::RunConfig;
use mtwv::{run, Report};
use mtwv_core::conditions::{run_structural, StructuralCounts};
use mtwv_core::cost::{build_cost, load_catalog, CostParams, PERTURBATION_SWEEP};
use mtwv_core::lemmas::{check_cone_5t, check_lip_grad_F, check_main_theorem};
use mtwv_core::mtw::scan_a3;
use mtwv_core::sampling::{orthogonal_unit, stream_rng, unit_vector};
use mtwv_core::synthetic::{estimate_qqconv_m, generate_probes, grad_F, DELTA_FLOOR};
use mtwv_core::{CExpSolver, ComparisonFunction, CostModel, LemmaStatus, MtwEvaluator, ProbeStrategy, Vector, Verdict};

const SEED: u64 = 0;
const ROUND_TRIP: u64 = 0xA3;
const MTW_POINTS: u64 = 0xA8;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn catalog() -> Vec<(String, CostModel)> {
    load_catalog().into_iter().map(|e| (e.name, e.cost)).collect()
}

/// Catalog costs plus the non-zero members of the perturbation sweep.
fn catalog_and_sweep() -> Vec<(String, CostModel)> {
    let mut out = catalog();
    for eps in PERTURBATION_SWEEP.into_iter().filter(|e| *e != 0.0) {
        let cost = build_cost("perturbed-bilinear", &CostParams { epsilon: Some(eps) }, None).unwrap();
        out.push((format!("perturbed-bilinear(eps={eps})"), cost));
    }
    out
}

fn closed_form_regression(name: &str) -> Outcome {
    let start = Instant::now();
    let report = run(&RunConfig::new(name)).unwrap();
    let cost = build_cost(name, &CostParams::default(), None).unwrap();
    let probes = generate_probes(&cost, 10_000, SEED, ProbeStrategy::Uniform).unwrap();
    let m = estimate_qqconv_m(&cost, &probes, DELTA_FLOOR).unwrap();
    let scan = scan_a3(&cost, 100, 8, SEED);
    let elapsed = start.elapsed().as_secs_f64();

    let loeper = &report.verdicts["loeper"][0];
    let violations = loeper.estimate_or("violations", f64::NAN);
    let abs: Vec<f64> = scan.evaluations.iter().map(|e| e.value.abs()).collect();
    let min_abs = abs.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_abs = abs.iter().cloned().fold(0.0, f64::max);
    let bad_lemmas: Vec<&str> = report
        .lemmas
        .iter()
        .filter(|l| !l.passed() || l.worst_margin.is_some_and(|w| w < -1e-9))
        .map(|l| l.lemma_id.as_str())
        .collect();
    let worst_lemma = report.lemmas.iter().filter_map(|l| l.worst_margin).fold(f64::INFINITY, f64::min);
    let pass = loeper.verdict == Verdict::Holds
        && violations == 0.0
        && loeper.n_checked == 10_000
        && (m.m_hat - 1.0).abs() <= 1e-9
        && min_abs <= 1e-9
        && bad_lemmas.is_empty()
        && elapsed < 60.0;
    outcome(
        pass,
        format!(
            "{name}: loeper violations {violations} on {} probes, M_hat {:.12}, a3 min|value| {min_abs:.1e} (max {max_abs:.1e}), \
             {} lemmas, worst margin {worst_lemma:.3e}, failing {bad_lemmas:?}, {elapsed:.1}s",
            loeper.n_checked,
            m.m_hat,
            report.lemmas.len()
        ),
    )
}

fn round_trip() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, cost) in catalog() {
        let mut ok = 0;
        let mut worst: f64 = 0.0;
        for i in 0..200u64 {
            let mut rng = stream_rng(SEED, ROUND_TRIP, i);
            let x = cost.x_domain().sample_interior(&mut rng);
            let y = cost.y_domain().sample_interior(&mut rng);
            let solver = CExpSolver::at_x(&cost, &x).unwrap();
            let p = solver.forward(&y).unwrap();
            if let Ok(z) = solver.c_exp(&p) {
                let r = solver.residual(&z, &p).unwrap();
                worst = worst.max(r);
                if r <= 1e-10 {
                    ok += 1;
                }
            }
        }
        let need = if name == "log" { 198 } else { 200 };
        pass &= ok >= need;
        parts.push(format!("{name} {ok}/200 (worst residual {worst:.1e})"));
    }
    outcome(pass, parts.join(", "))
}

/// Five-point central differences of `F` at `v`, shrinking the step until the stencil fits
/// inside the image.
fn fd_gradient(f: &ComparisonFunction, v: &Vector) -> Option<Vector> {
    'step: for h in [1e-3, 1e-4, 1e-5] {
        let mut g = Vector::zeros(v.len());
        for i in 0..v.len() {
            let at = |s: f64| {
                let mut w = v.clone();
                w[i] += s * h;
                f.eval(&w)
            };
            let (Ok(m2), Ok(m1), Ok(p1), Ok(p2)) = (at(-2.0), at(-1.0), at(1.0), at(2.0)) else {
                continue 'step;
            };
            g[i] = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
        }
        return Some(g);
    }
    None
}

fn gradient_oracle() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, cost) in catalog() {
        let probes = generate_probes(&cost, 100, SEED, ProbeStrategy::Uniform).unwrap();
        let mut worst: f64 = 0.0;
        let mut failed = 0;
        for p in &probes {
            let f = ComparisonFunction::for_probe(&cost, p).unwrap();
            let v = p.v_at(0.5);
            match (grad_F(&cost, p, 0.5), fd_gradient(&f, &v)) {
                (Ok(g), Some(fd)) => worst = worst.max((&g - &fd).norm() / fd.norm().max(1e-300)),
                _ => failed += 1,
            }
        }
        pass &= failed == 0 && worst <= 1e-6;
        parts.push(format!("{name} worst rel {worst:.1e}, {failed} unevaluated"));
    }
    outcome(pass, parts.join(", "))
}

fn lipschitz_constant() -> Outcome {
    let cost = build_cost("log", &CostParams::default(), None).unwrap();
    let k = run_structural(&cost, &StructuralCounts::default(), SEED).constants.unwrap();
    let formula = k.lambda * k.lambda * k.lip_hessian + k.alpha * k.alpha * k.lambda * k.lip_hessian;
    let check = check_lip_grad_F(&cost, &k, 1000, SEED);
    let empirical = check.estimates["C_empirical"];
    let pass = check.passed() && check.n_configs + check.n_excluded == 1000 && empirical <= 1.1 * formula;
    outcome(
        pass,
        format!(
            "log: empirical ratio {empirical:.4} vs 1.1*C = {:.4} (C = {formula:.4}), {} configs, {} excluded",
            1.1 * formula,
            check.n_configs,
            check.n_excluded
        ),
    )
}

struct MainRun {
    name: String,
    cost: CostModel,
    status: LemmaStatus,
    detail: String,
    ok: bool,
}

fn main_theorem_runs() -> Vec<MainRun> {
    catalog_and_sweep()
        .into_iter()
        .map(|(name, cost)| {
            let c = check_main_theorem(&cost, 10_000, SEED);
            let (ok, detail) = match c.status {
                LemmaStatus::Pass => (
                    true,
                    format!("M_hat {:.4} (half {:.4}) stable", c.estimates["M_hat"], c.estimates["M_hat_half"]),
                ),
                LemmaStatus::VacuousHypothesis => {
                    let w = c.witness.as_ref();
                    let complete = w.is_some_and(|w| {
                        ["x0", "x1", "v0", "v1"].iter().all(|k| w.points.contains_key(*k))
                            && w.values.contains_key("t")
                            && w.values.contains_key("margin")
                    });
                    let reproduced = w.is_some_and(|w| w.note.as_deref() == Some("reproduced"));
                    let m = w.and_then(|w| w.values.get("margin").copied()).unwrap_or(f64::NAN);
                    let mr = w.and_then(|w| w.values.get("margin_refined").copied()).unwrap_or(f64::NAN);
                    (complete && reproduced, format!("loeper violated, witness margin {m:.2e} refined {mr:.2e}"))
                }
                s => (false, format!("{s:?}: {:?}", c.notes)),
            };
            MainRun { name, cost, status: c.status, detail, ok }
        })
        .collect()
}

fn cone_factor_five(runs: &[MainRun]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs.iter().filter(|r| matches!(r.status, LemmaStatus::Pass | LemmaStatus::Fail)) {
        let k = run_structural(&r.cost, &StructuralCounts::default(), SEED).constants.unwrap();
        // configurations whose cone sample cannot be placed inside the image are excluded;
        // extend the seeded index range until 500 are evaluated
        let mut n = 500;
        let mut c = check_cone_5t(&r.cost, &k, 8.0, n, SEED);
        while c.n_configs < 500 && n < 1000 {
            n += 500 - c.n_configs;
            c = check_cone_5t(&r.cost, &k, 8.0, n, SEED);
        }
        pass &= c.passed() && c.n_configs >= 500;
        parts.push(format!(
            "{} {:?} ({} configs, {} excluded, margin {:.3})",
            r.name,
            c.status,
            c.n_configs,
            c.n_excluded,
            c.worst_margin.unwrap_or(f64::NAN)
        ));
    }
    outcome(pass && !parts.is_empty(), parts.join(", "))
}

fn main_theorem(runs: &[MainRun]) -> Outcome {
    let parts: Vec<String> = runs.iter().map(|r| format!("{}: {}", r.name, r.detail)).collect();
    outcome(runs.iter().all(|r| r.ok), parts.join("; "))
}

fn mtw_two_paths() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, cost) in catalog() {
        let mut n = 0;
        let mut worst: f64 = 0.0;
        let mut i = 0u64;
        while n < 10 && i < 100 {
            let mut rng = stream_rng(SEED, MTW_POINTS, i);
            i += 1;
            let x = cost.x_domain().sample_interior(&mut rng);
            let y = cost.y_domain().sample_interior(&mut rng);
            let xi = unit_vector(&mut rng, cost.dim());
            let eta = orthogonal_unit(&mut rng, &xi).unwrap();
            let ev = MtwEvaluator::new(&cost, &x).unwrap();
            let p = CExpSolver::at_x(&cost, &x).unwrap().forward(&y).unwrap();
            let (Ok(a), Ok(b)) = (ev.eval(&p, &xi, &eta), ev.eval_oracle(&p, &xi, &eta)) else {
                continue;
            };
            let tol = (1e-3 * a.value.abs()).max(1e-6);
            worst = worst.max((a.value - b.value).abs() / tol);
            n += 1;
        }
        pass &= n == 10 && worst <= 1.0;
        parts.push(format!("{name} {n} pairs, worst |diff|/tol {worst:.2e}"));
    }
    outcome(pass, parts.join(", "))
}

fn determinism() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut sweep = RunConfig::new("perturbed-bilinear");
    sweep.cost.epsilon = Some(0.1);
    sweep.seed = 7;
    for cfg in [RunConfig::new("log"), sweep] {
        let a: Report = run(&cfg).unwrap();
        let b: Report = run(&cfg).unwrap();
        let same = a.without_timing().to_json() == b.without_timing().to_json();
        pass &= same;
        parts.push(format!("{} seed {}: {}", cfg.cost.name, cfg.seed, if same { "identical" } else { "differ" }));
    }
    outcome(pass, parts.join(", "))
}

fn main() {
    let start = Instant::now();
    let runs = std::cell::OnceCell::new();
    let runs = || runs.get_or_init(main_theorem_runs);
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("closed-form regression, bilinear", Box::new(|| closed_form_regression("bilinear"))),
        ("closed-form regression, quadratic", Box::new(|| closed_form_regression("quadratic"))),
        ("round-trip inversion", Box::new(round_trip)),
        ("gradient oracle", Box::new(gradient_oracle)),
        ("Lipschitz constant of grad F", Box::new(lipschitz_constant)),
        ("cone factor 5", Box::new(|| cone_factor_five(runs()))),
        ("main-theorem consistency", Box::new(|| main_theorem(runs()))),
        ("MTW two-path oracle", Box::new(mtw_two_paths)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !o.pass {
            failed += 1;
        }
        println!(
            "[{}] criterion {} {name} ({:.1}s): {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            t.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {}/{} passed in {:.1}s", criteria.len() - failed, criteria.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
