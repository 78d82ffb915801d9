use serde::{Deserialize, Serialize};

use super::dcov::increment_independence_test;
use super::energy::{stationarity_test, GaussianGof};
use super::qv::{qv_linearity, QVReport, QvConfig};
use super::regression::{conditional_mean_test, DriftEstimate};
use super::report::{TestReport, Verdict};
use super::TestConfig;
use crate::error::{Error, Result};
use crate::process::PathEnsemble;
use crate::rng::derive_seed;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityWindows {
    pub delta: f64,
    pub t1: f64,
    pub t2: f64,
}

/// Which diagnostics the suite runs, and where.
///
/// The conditional-mean test regresses the process on its own past, so all
/// verdicts are relative to the natural filtration of the observed paths.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub alpha: f64,
    pub marginal_times: Vec<f64>,
    pub stationarity: Option<StationarityWindows>,
    pub independence_windows: Vec<((f64, f64), (f64, f64))>,
    pub conditional_mean: Option<(f64, f64)>,
    pub qv: bool,
    pub tests: TestConfig,
    pub qv_calibration: QvConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            marginal_times: vec![0.5, 1.0, 2.0],
            stationarity: Some(StationarityWindows { delta: 1.0, t1: 0.0, t2: 1.0 }),
            independence_windows: vec![((0.0, 1.0), (1.0, 2.0))],
            conditional_mean: Some((1.0, 2.0)),
            qv: true,
            tests: TestConfig::default(),
            qv_calibration: QvConfig::default(),
        }
    }
}

impl SuiteConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.tests.seed = seed;
        self.qv_calibration.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    /// Component reports; p-values are Holm-adjusted, raw values are kept in the details.
    pub reports: Vec<TestReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub qv: Option<QVReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub drift: Option<DriftEstimate>,
    pub family_alpha: f64,
    pub corrected_rejections: Vec<String>,
    pub verdict: Verdict,
}

impl SuiteReport {
    pub fn report(&self, prefix: &str) -> Option<&TestReport> {
        self.reports.iter().find(|r| r.name.starts_with(prefix))
    }

    pub fn rejected(&self) -> Vec<&str> {
        self.reports
            .iter()
            .filter(|r| r.verdict.is_reject())
            .map(|r| r.name.as_str())
            .collect()
    }
}

/// Holm step-down adjusted p-values, in input order.
pub fn holm_adjust(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut out = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &i) in order.iter().enumerate() {
        running = running.max(((m - rank) as f64 * p[i]).min(1.0));
        out[i] = running;
    }
    out
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// Runs the configured battery on `ensemble` and combines it with Holm's
/// correction at family level `cfg.alpha`. The suite passes iff no corrected
/// test rejects and the QV residual is within its threshold.
pub fn conformance_suite<T: Real>(ensemble: &PathEnsemble<T>, cfg: &SuiteConfig) -> Result<SuiteReport> {
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0,1), got {}", cfg.alpha)));
    }
    let seed = cfg.tests.seed;
    let sub = |name: &str, i: usize| TestConfig {
        alpha: cfg.alpha,
        seed: derive_seed(seed, name, i as u64),
        ..cfg.tests
    };
    let t0 = ensemble.grid().times()[0].to_f64_lossy();
    let mut reports = Vec::new();

    if !cfg.marginal_times.is_empty() {
        let gof = stage(
            "marginal",
            GaussianGof::calibrate(ensemble.n_paths(), ensemble.dim(), &sub("marginal", 0)),
        )?;
        for &t in &cfg.marginal_times {
            let x = stage("marginal", ensemble.increments(t0, t))?;
            reports.push(stage("marginal", gof.test(x.view(), t - t0))?);
        }
    }
    if let Some(w) = cfg.stationarity {
        reports.push(stage(
            "stationarity",
            stationarity_test(ensemble, w.delta, w.t1, w.t2, &sub("stationarity", 0)),
        )?);
    }
    for (i, &(a, b)) in cfg.independence_windows.iter().enumerate() {
        reports.push(stage(
            "independence",
            increment_independence_test(ensemble, a, b, &sub("independence", i)),
        )?);
    }
    let mut drift = None;
    if let Some((s, t)) = cfg.conditional_mean {
        let (d, r) = stage(
            "conditional_mean",
            conditional_mean_test(ensemble, ensemble, s, t, &sub("conditional_mean", 0)),
        )?;
        drift = Some(d);
        reports.push(r);
    }

    let raw: Vec<f64> = reports.iter().map(|r| r.p_value.unwrap_or(1.0)).collect();
    let adjusted = holm_adjust(&raw);
    let mut reports: Vec<TestReport> = reports
        .into_iter()
        .zip(adjusted)
        .map(|(r, p)| {
            let mut r = r.with_adjusted_p(p);
            r.threshold = cfg.alpha;
            r.verdict = if p < cfg.alpha { Verdict::Reject } else { Verdict::Pass };
            r
        })
        .collect();
    let corrected_rejections: Vec<String> =
        reports.iter().filter(|r| r.verdict.is_reject()).map(|r| r.name.clone()).collect();

    let qv = if cfg.qv {
        let qcfg = QvConfig { seed: derive_seed(seed, "qv", 0), ..cfg.qv_calibration };
        let q = stage("qv", qv_linearity(ensemble, &qcfg))?;
        reports.push(q.to_test_report());
        Some(q)
    } else {
        None
    };
    let qv_ok = qv.as_ref().map_or(true, |q| !q.verdict.is_reject());
    let verdict = if corrected_rejections.is_empty() && qv_ok { Verdict::Pass } else { Verdict::Reject };
    Ok(SuiteReport { reports, qv, drift, family_alpha: cfg.alpha, corrected_rejections, verdict })
}
