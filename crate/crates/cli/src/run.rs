//! Suite orchestration and the emitted report.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use mtwv_core::conditions::{run_structural, StructuralConstants};
use mtwv_core::cost::build_cost;
use mtwv_core::geometry::{image_domain, Side};
use mtwv_core::lemmas::{run_lemmas, LemmaCheck};
use mtwv_core::mtw::scan_a3;
use mtwv_core::report::finite;
use mtwv_core::synthetic::{
    check_loeper_segments, check_sublevel_midpoints, estimate_qqconv_segments, evaluate_segments, generate_probes,
    m_stability, MStability, Probe, DELTA_FLOOR, LOEPER_TOL,
};
use mtwv_core::{ConditionReport, CostModel, QQconvEstimate, Verdict};
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, RunConfig, Suite, DEFAULT_GRID_RESOLUTION};
use crate::export;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QQconvSummary {
    pub estimate: QQconvEstimate,
    pub stability: MStability,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteError {
    pub suite: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub config_echo: RunConfig,
    pub constants: Option<StructuralConstants>,
    /// Condition reports keyed by suite.
    pub verdicts: BTreeMap<String, Vec<ConditionReport>>,
    pub lemmas: Vec<LemmaCheck>,
    pub qqconv: Option<QQconvSummary>,
    pub errors: Vec<SuiteError>,
    pub overall: Verdict,
    /// Wall time per suite in seconds; the only non-reproducible field.
    pub timing: BTreeMap<String, f64>,
}

impl Report {
    /// Worst verdict over every report, lemma and captured error.
    pub fn compute_overall(&self) -> Verdict {
        let mut v = Verdict::Holds;
        for r in self.verdicts.values().flatten() {
            v = v.worst(r.verdict);
        }
        for l in &self.lemmas {
            v = v.worst(l.verdict());
        }
        if !self.errors.is_empty() {
            v = v.worst(Verdict::Inconclusive);
        }
        v
    }

    /// `0` holds, `2` violated, `3` inconclusive.
    pub fn exit_code(&self) -> i32 {
        match self.overall {
            Verdict::Holds => 0,
            Verdict::Violated => 2,
            Verdict::Inconclusive => 3,
        }
    }

    pub fn without_timing(&self) -> Report {
        let mut r = self.clone();
        r.timing.clear();
        r
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Report> {
        serde_json::from_str(text)
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json() + "\n")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cost: {0}")]
    Cost(#[from] mtwv_core::Error),
}

fn build(cfg: &RunConfig) -> Result<CostModel, RunError> {
    let domains = cfg.domains.as_ref().map(|d| (d.x.clone(), d.y.clone()));
    Ok(build_cost(&cfg.cost.name, &cfg.cost.params(), domains)?)
}

struct Timer(BTreeMap<String, f64>);

impl Timer {
    fn time<T>(&mut self, suite: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        *self.0.entry(suite.to_string()).or_default() += start.elapsed().as_secs_f64();
        out
    }
}

fn export_to(path: &Path, f: impl FnOnce(BufWriter<File>) -> Result<(), export::ExportError>) -> Result<(), String> {
    let file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
    f(BufWriter::new(file)).map_err(|e| format!("{}: {e}", path.display()))
}

/// Runs the requested suites in dependency order (structural → synthetic / analytic →
/// lemmas). Suite failures are captured in the report; only configuration and cost
/// construction errors are returned.
pub fn run(cfg: &RunConfig) -> Result<Report, RunError> {
    cfg.validate()?;
    let cost = build(cfg)?;
    let suites = cfg.resolved_suites();
    let seed = cfg.seed;
    let counts = &cfg.counts;
    let mut timer = Timer(BTreeMap::new());
    let mut report = Report {
        version: VERSION.to_string(),
        config_echo: cfg.clone(),
        constants: None,
        verdicts: BTreeMap::new(),
        lemmas: Vec::new(),
        qqconv: None,
        errors: Vec::new(),
        overall: Verdict::Holds,
        timing: BTreeMap::new(),
    };
    let fail = |report: &mut Report, suite: &str, message: String| {
        report.errors.push(SuiteError { suite: suite.to_string(), message });
    };

    // lemmas consume the constants, so structural runs whenever either is requested
    if suites.contains(&Suite::Structural) || suites.contains(&Suite::Lemmas) {
        let s = timer.time("structural", || run_structural(&cost, &counts.structural, seed));
        report.constants = s.constants.clone();
        report.verdicts.insert("structural".into(), s.reports);
    }

    if let Some(path) = &cfg.export.image_points {
        match image_domain(&cost, cost.x_domain().center(), Side::X, counts.structural.n_boundary.max(8 * cost.dim())) {
            Ok(img) => {
                if let Err(e) = export_to(path, |w| export::export_image_points(&img, w)) {
                    fail(&mut report, "export", e);
                }
            }
            Err(e) => fail(&mut report, "export", e.to_string()),
        }
    }

    let wants_probes = suites.contains(&Suite::Loeper) || suites.contains(&Suite::Qqconv);
    let probes: Option<Vec<Probe>> = if wants_probes || cfg.export.grid.is_some() || cfg.export.probes.is_some() {
        let loaded = match &cfg.probes_in {
            Some(path) => File::open(path)
                .map_err(|e| format!("{}: {e}", path.display()))
                .and_then(|f| export::read_probes(f).map_err(|e| e.to_string())),
            None => timer
                .time("probes", || generate_probes(&cost, counts.n_probes, seed, counts.probe_strategy))
                .map_err(|e| e.to_string()),
        };
        match loaded {
            Ok(p) => Some(p),
            Err(e) => {
                fail(&mut report, "probes", e);
                None
            }
        }
    } else {
        None
    };

    if let Some(probes) = &probes {
        if let Some(path) = &cfg.export.probes {
            if let Err(e) = export_to(path, |w| export::write_probes(probes, w)) {
                fail(&mut report, "export", e);
            }
        }
        if let Some(path) = &cfg.export.grid {
            let res = cfg.export.grid_resolution.unwrap_or(DEFAULT_GRID_RESOLUTION);
            match probes.first() {
                Some(p) => {
                    if let Err(e) = export_to(path, |w| export::export_level_set_grid(&cost, p, res, w)) {
                        fail(&mut report, "export", e);
                    }
                }
                None => fail(&mut report, "export", "no probe for the level-set grid".into()),
            }
        }
        if wants_probes {
            let segments = timer.time("segments", || evaluate_segments(&cost, probes));
            if suites.contains(&Suite::Loeper) {
                let reports = timer.time("loeper", || {
                    vec![
                        check_loeper_segments(&cost, probes, &segments, LOEPER_TOL),
                        check_sublevel_midpoints(&cost, probes, counts.n_sublevel_pairs, seed, LOEPER_TOL),
                    ]
                });
                report.verdicts.insert("loeper".into(), reports);
            }
            if suites.contains(&Suite::Qqconv) {
                let half = probes.len() / 2;
                let est = timer.time("qqconv", || {
                    let full = estimate_qqconv_segments(&cost, probes, &segments, DELTA_FLOOR)?;
                    let h = estimate_qqconv_segments(&cost, &probes[..half], &segments[..half], DELTA_FLOOR)?;
                    Ok::<_, mtwv_core::Error>((full, h))
                });
                match est {
                    Ok((full, h)) => {
                        let stability = m_stability(&h, &full);
                        let mut r = ConditionReport::new("qqconv");
                        r.n_checked = full.n_probes_used;
                        r.n_excluded = full.n_excluded + full.n_failed;
                        r.estimate("M_hat", full.m_hat);
                        r.estimate("M_hat_half", h.m_hat);
                        r.estimate("relative_change", stability.relative_change);
                        r.estimate("descending", full.n_descending as f64);
                        if !stability.stable {
                            r.escalate(Verdict::Inconclusive);
                            r.notes.push("M_hat not stable under probe doubling".into());
                        }
                        report.verdicts.insert("qqconv".into(), vec![r]);
                        report.qqconv = Some(QQconvSummary { estimate: full, stability });
                    }
                    Err(e) => fail(&mut report, "qqconv", e.to_string()),
                }
            }
        }
    }

    if suites.contains(&Suite::A3) {
        let scan = timer.time("a3", || scan_a3(&cost, counts.a3_points, counts.a3_dirs, seed));
        if let Some(path) = &cfg.export.a3_scan {
            if let Err(e) = export_to(path, |w| export::export_a3_scan(&scan.evaluations, w)) {
                fail(&mut report, "export", e);
            }
        }
        report.verdicts.insert("a3".into(), vec![scan.report]);
    }

    if suites.contains(&Suite::Lemmas) {
        match report.constants.clone() {
            Some(k) => report.lemmas = timer.time("lemmas", || run_lemmas(&cost, &k, &counts.lemmas, seed)),
            None => fail(&mut report, "lemmas", "structural constants unavailable".into()),
        }
    }

    report.timing = timer.0.into_iter().map(|(k, v)| (k, finite(v))).collect();
    report.overall = report.compute_overall();
    Ok(report)
}
