use std::time::Instant;

use super::config::{ScenarioConfig, TestSpec, Validated};
use super::report::{Meta, Overall, ReportEntry, RunReport, REPORT_SCHEMA_VERSION};
use crate::conformance::{
    conformance_suite, holm_adjust, increment_independence_test, qv_linearity, stationarity_test, two_sample_test,
    conditional_mean_test, Details, GaussianGof, QvConfig, StationarityWindows, SuiteConfig, TestConfig, Verdict,
};
use crate::error::{Error, Result};
use crate::pde::{
    ball_volume, ball_volume_mc, eikonal_residual, gamma_half_variant, gradient_constancy, jensen_gap,
    laplacian_residual, mean_value_check, smoothing_representation_check,
};
use crate::process::{sample_paths, PathEnsemble, TimeGrid};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Record wall-clock duration and throughput (makes the report time-dependent).
    pub timing: bool,
}

/// A row plus whether it counts towards the run's expectations (suite
/// components are informational; the suite's own summary row counts).
struct Row {
    entry: ReportEntry,
    scored: bool,
}

struct Ensembles {
    base: Option<PathEnsemble<f64>>,
    out: PathEnsemble<f64>,
}

fn simulate(cfg: &ScenarioConfig, v: &Validated) -> Result<Ensembles> {
    let origin = ndarray::Array1::from(v.origin.clone());
    let paths = sample_paths(&v.law, &v.grid, cfg.paths, &origin, derive_seed(cfg.seed, "paths", 0))
        .map_err(|e| e.in_stage("simulate"))?;
    let keep_base = cfg.tests.iter().any(|t| matches!(t, TestSpec::ConditionalMean { .. }));
    if keep_base {
        let out = paths.apply_transform(&v.transform).map_err(|e| e.in_stage("transform"))?;
        Ok(Ensembles { base: Some(paths), out })
    } else {
        let out = paths.into_transformed(&v.transform).map_err(|e| e.in_stage("transform"))?;
        Ok(Ensembles { base: None, out })
    }
}

/// Executes simulate → transform → the configured tests and assembles the report.
pub fn run_scenario(cfg: &ScenarioConfig, opts: RunOptions) -> Result<RunReport> {
    let start = Instant::now();
    let v = cfg.validate()?;
    let ens = if cfg.needs_paths() { Some(simulate(cfg, &v)?) } else { None };
    execute(cfg, &v, ens, opts, start)
}

/// Runs the configured tests on an existing ensemble instead of simulating one.
///
/// The ensemble plays the role of the transformed process; its dimension,
/// path count and grid must match the configuration.
pub fn run_on_ensemble(cfg: &ScenarioConfig, ensemble: PathEnsemble<f64>, opts: RunOptions) -> Result<RunReport> {
    let start = Instant::now();
    let v = cfg.validate()?;
    if ensemble.dim() != v.transform.output_dim() {
        return Err(Error::config(
            "law.dim",
            format!("ensemble has dimension {}, config expects {}", ensemble.dim(), v.transform.output_dim()),
        ));
    }
    if ensemble.n_paths() != cfg.paths {
        return Err(Error::config("paths", format!("ensemble has {} paths", ensemble.n_paths())));
    }
    if ensemble.grid() != &v.grid {
        return Err(Error::config("grid", "ensemble grid differs from the configured grid"));
    }
    execute(cfg, &v, Some(Ensembles { base: None, out: ensemble }), opts, start)
}

fn execute(
    cfg: &ScenarioConfig,
    v: &Validated,
    ens: Option<Ensembles>,
    opts: RunOptions,
    start: Instant,
) -> Result<RunReport> {

    let mut rows = Vec::new();
    for (i, test) in cfg.tests.iter().enumerate() {
        let group = format!("tests[{i}]");
        let stage = format!("{group} ({})", test.kind());
        let mut produced = run_test(cfg, v, ens.as_ref(), i, test, &group).map_err(|e| e.in_stage(stage))?;
        for row in &mut produced {
            if row.scored {
                row.entry.expect_reject = test.expect_reject();
            }
        }
        rows.extend(produced);
    }

    // Stand-alone p-values form one Holm family; suites have already corrected theirs.
    let family: Vec<usize> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.scored && r.entry.p_value.is_some())
        .map(|(k, _)| k)
        .collect();
    let raw: Vec<f64> = family.iter().map(|&k| rows[k].entry.p_value.unwrap_or(1.0)).collect();
    for (&k, adj) in family.iter().zip(holm_adjust(&raw)) {
        let e = &mut rows[k].entry;
        e.details.insert("p_value_raw".into(), e.p_value.unwrap_or(1.0).into());
        e.p_value = Some(adj);
        e.threshold = cfg.alpha;
        e.verdict = if adj < cfg.alpha { Verdict::Reject } else { Verdict::Pass };
    }

    let corrected_rejections: Vec<String> =
        rows.iter().filter(|r| r.entry.verdict.is_reject()).map(|r| r.entry.name.clone()).collect();
    let unmet: Vec<String> = rows
        .iter()
        .filter(|r| r.scored && r.entry.verdict.is_reject() != r.entry.expect_reject.unwrap_or(false))
        .map(|r| {
            let expected = if r.entry.expect_reject.unwrap_or(false) { "reject" } else { "pass" };
            format!("{} [{}]: expected {expected}", r.entry.name, r.entry.group)
        })
        .collect();
    let verdict = if rows.is_empty() {
        "vacuous-pass"
    } else if rows.iter().any(|r| r.scored && r.entry.verdict.is_reject()) {
        "reject"
    } else {
        "pass"
    };
    let elapsed = start.elapsed().as_secs_f64();
    let paths_run = if ens.is_some() { cfg.paths as f64 } else { 0.0 };
    Ok(RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        reports: rows.into_iter().map(|r| r.entry).collect(),
        overall: Overall {
            verdict: verdict.into(),
            corrected_rejections,
            expectations_met: unmet.is_empty(),
            unmet_expectations: unmet,
        },
        meta: Meta {
            seed: cfg.seed,
            duration_ms: opts.timing.then_some(elapsed * 1e3),
            throughput_paths_per_s: opts.timing.then_some(paths_run / elapsed.max(1e-9)),
            version: env!("CARGO_PKG_VERSION").into(),
        },
    })
}

fn scored(entry: ReportEntry) -> Row {
    Row { entry, scored: true }
}

fn run_test(
    cfg: &ScenarioConfig,
    v: &Validated,
    ens: Option<&Ensembles>,
    i: usize,
    test: &TestSpec,
    group: &str,
) -> Result<Vec<Row>> {
    let seed = derive_seed(cfg.seed, "test", i as u64);
    let tcfg = TestConfig {
        alpha: cfg.alpha,
        permutations: cfg.resampling.permutations,
        bootstrap: cfg.resampling.bootstrap,
        directions: None,
        projections: None,
        seed,
    };
    let paths = || ens.map(|e| &e.out).ok_or_else(|| Error::InvalidArgument("no simulated paths".into()));
    let field = || v.fields[i].as_ref().unwrap_or(&v.transform);
    let g = || group.to_string();
    let t0 = v.grid.times()[0];
    use TestSpec::*;
    Ok(match test {
        Suite { marginal_times, stationarity, independence_windows, conditional_mean, qv, .. } => {
            let defaults = SuiteConfig::default();
            let shift = |t: f64| t0 + t;
            let suite = SuiteConfig {
                alpha: cfg.alpha,
                marginal_times: marginal_times.clone().unwrap_or_else(|| defaults.marginal_times.iter().map(|&t| shift(t)).collect()),
                stationarity: stationarity.or_else(|| {
                    defaults.stationarity.map(|w| StationarityWindows { t1: shift(w.t1), t2: shift(w.t2), ..w })
                }),
                independence_windows: match independence_windows {
                    Some(ws) => ws.iter().map(|w| ((w[0][0], w[0][1]), (w[1][0], w[1][1]))).collect(),
                    None => defaults
                        .independence_windows
                        .iter()
                        .map(|&((a, b), (c, d))| ((shift(a), shift(b)), (shift(c), shift(d))))
                        .collect(),
                },
                conditional_mean: match conditional_mean {
                    Some(w) => Some((w[0], w[1])),
                    None => defaults.conditional_mean.map(|(s, t)| (shift(s), shift(t))),
                },
                qv: qv.unwrap_or(v.grid.steps() >= crate::conformance::qv::MIN_STEPS),
                tests: tcfg,
                qv_calibration: QvConfig { seed, ..QvConfig::default() },
            };
            let report = conformance_suite(paths()?, &suite)?;
            let mut rows: Vec<Row> = report
                .reports
                .iter()
                .map(|r| {
                    let kind = r.name.split(['[', '@']).next().unwrap_or("suite").to_string();
                    Row { entry: ReportEntry::from_test(&kind, format!("{group}.suite"), r.clone()), scored: false }
                })
                .collect();
            let mut details = Details::new();
            details.insert("family_alpha".into(), report.family_alpha.into());
            details.insert("corrected_rejections".into(), serde_json::json!(report.corrected_rejections));
            if let Some(q) = &report.qv {
                details.insert("qv_verdict".into(), serde_json::to_value(q.verdict)?);
            }
            if let Some(d) = &report.drift {
                details.insert("mu_hat".into(), serde_json::json!(d.mu));
                details.insert("mu_std_error".into(), serde_json::json!(d.std_error));
            }
            let rejected = report.reports.iter().filter(|r| r.verdict.is_reject()).count();
            rows.push(scored(ReportEntry {
                name: "conformance_suite".into(),
                kind: "suite".into(),
                group: g(),
                statistic: rejected as f64,
                p_value: None,
                residual: None,
                threshold: 0.0,
                verdict: report.verdict,
                details,
                expect_reject: None,
            }));
            rows
        }
        TwoSampleMarginal { times, .. } => {
            let e = paths()?;
            let origin = ndarray::Array1::from(v.origin.clone());
            let mut rows = Vec::new();
            for (k, &t) in times.iter().enumerate() {
                let grid = TimeGrid::new(vec![0.0, t - t0])?;
                let fresh = sample_paths(&v.law, &grid, cfg.paths, &origin, derive_seed(seed, "reference", k as u64))?;
                let x = e.values_at_time(t)?;
                let c = TestConfig { seed: derive_seed(seed, "two-sample", k as u64), ..tcfg };
                let mut r = two_sample_test(x, fresh.values_at(1), &c)?;
                r.name = format!("two_sample_marginal@t={t}");
                r.details.insert("t".into(), t.into());
                rows.push(scored(ReportEntry::from_test("two_sample_marginal", g(), r)));
            }
            rows
        }
        GaussianMarginal { times, .. } => {
            let e = paths()?;
            let gof = GaussianGof::calibrate(e.n_paths(), e.dim(), &tcfg)?;
            let mut rows = Vec::new();
            for &t in times {
                let x = e.increments(t0, t)?;
                rows.push(scored(ReportEntry::from_test("gaussian_marginal", g(), gof.test(x.view(), t - t0)?)));
            }
            rows
        }
        Stationarity { delta, t1, t2, .. } => {
            vec![scored(ReportEntry::from_test("stationarity", g(), stationarity_test(paths()?, *delta, *t1, *t2, &tcfg)?))]
        }
        Independence { window1, window2, .. } => {
            let r = increment_independence_test(paths()?, (window1[0], window1[1]), (window2[0], window2[1]), &tcfg)?;
            vec![scored(ReportEntry::from_test("independence", g(), r))]
        }
        ConditionalMean { s, t, .. } => {
            let e = ens.ok_or_else(|| Error::InvalidArgument("no simulated paths".into()))?;
            let base = e.base.as_ref().unwrap_or(&e.out);
            let (_, r) = conditional_mean_test(base, &e.out, *s, *t, &tcfg)?;
            vec![scored(ReportEntry::from_test("conditional_mean", g(), r))]
        }
        QvLinearity { .. } => {
            let q = qv_linearity(paths()?, &QvConfig { seed, ..QvConfig::default() })?;
            vec![scored(ReportEntry::from_test("qv_linearity", g(), q.to_test_report()))]
        }
        Laplacian { tolerance, .. } => {
            let mut e = ReportEntry::from_residual("laplacian", g(), laplacian_residual(field(), &v.domain, *tolerance)?);
            e.details.insert("field".into(), field().to_string().into());
            vec![scored(e)]
        }
        Eikonal { target, tolerance, .. } => {
            let mut e =
                ReportEntry::from_residual("eikonal", g(), eikonal_residual(field(), &v.domain, *target, *tolerance)?);
            e.details.insert("field".into(), field().to_string().into());
            vec![scored(e)]
        }
        GradientConstancy { tolerance, .. } => {
            let (_, r) = gradient_constancy(field(), &v.domain, *tolerance)?;
            let mut e = ReportEntry::from_residual("gradient_constancy", g(), r);
            e.details.insert("field".into(), field().to_string().into());
            vec![scored(e)]
        }
        MeanValue { x, r, samples, .. } => {
            let mut e = ReportEntry::from_residual("mean_value", g(), mean_value_check(field(), x, *r, *samples, seed)?);
            e.details.insert("field".into(), field().to_string().into());
            vec![scored(e)]
        }
        Smoothing { tau, x, mu, samples, .. } => {
            let r = smoothing_representation_check(field(), &v.law, *tau, x, *mu, *samples, seed)?;
            let mut e = ReportEntry::from_residual("smoothing", g(), r);
            e.details.insert("field".into(), field().to_string().into());
            vec![scored(e)]
        }
        JensenGap { tau, x, samples, .. } => {
            let mut e = ReportEntry::from_jensen(g(), jensen_gap(field(), &v.law, *tau, x, *samples, seed)?);
            e.details.insert("field".into(), field().to_string().into());
            vec![scored(e)]
        }
        BallVolume { dims, samples, .. } => dims
            .iter()
            .map(|&n| {
                let exact = ball_volume(n);
                let (est, se) = ball_volume_mc(n, *samples, derive_seed(seed, "ball", n as u64));
                let residual = est - exact;
                let tol = 3.0 * se;
                let mut details = Details::new();
                details.insert("formula".into(), exact.into());
                details.insert("monte_carlo".into(), est.into());
                details.insert("std_error".into(), se.into());
                details.insert("gamma_half_variant".into(), gamma_half_variant(n).into());
                if n != 2 {
                    details.insert(
                        "note".into(),
                        format!(
                            "π^(n/2)/Γ(n/2) = {:.6} is not the unit-ball volume for n = {n}; π^(n/2)/Γ(n/2+1) is used",
                            gamma_half_variant(n)
                        )
                        .into(),
                    );
                }
                scored(ReportEntry {
                    name: format!("ball_volume[n={n}]"),
                    kind: "ball_volume".into(),
                    group: g(),
                    statistic: residual.abs(),
                    p_value: None,
                    residual: Some(residual.abs()),
                    threshold: tol,
                    verdict: if residual.abs() > tol { Verdict::Reject } else { Verdict::Pass },
                    details,
                    expect_reject: None,
                })
            })
            .collect(),
    })
}
