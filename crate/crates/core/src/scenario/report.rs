use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use crate::conformance::{Details, TestReport, Verdict};
use crate::error::{Error, Result};
use crate::pde::{JensenGapReport, ResidualReport};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One row of a run report: a statistical test or a numerical residual check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub name: String,
    pub kind: String,
    /// Config entry that produced the row, e.g. `tests[2]` or `tests[0].suite`.
    pub group: String,
    pub statistic: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    pub threshold: f64,
    pub verdict: Verdict,
    pub details: Details,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_reject: Option<bool>,
}

impl ReportEntry {
    pub fn from_test(kind: &str, group: String, r: TestReport) -> Self {
        let residual = if r.p_value.is_none() { Some(r.statistic) } else { None };
        Self {
            name: r.name,
            kind: kind.into(),
            group,
            statistic: r.statistic,
            p_value: r.p_value,
            residual,
            threshold: r.threshold,
            verdict: r.verdict,
            details: r.details,
            expect_reject: None,
        }
    }

    pub fn from_residual(kind: &str, group: String, r: ResidualReport) -> Self {
        let mut details = r.details;
        details.insert("mean_abs".into(), r.mean_abs.into());
        details.insert("argmax".into(), serde_json::json!(r.argmax));
        if let Some(se) = r.std_error {
            details.insert("std_error".into(), se.into());
        }
        if !r.excluded.is_empty() {
            details.insert("excluded_points".into(), serde_json::json!(r.excluded));
        }
        Self {
            name: r.name,
            kind: kind.into(),
            group,
            statistic: r.max_abs,
            p_value: None,
            residual: Some(r.max_abs),
            threshold: r.tolerance,
            verdict: r.verdict,
            details,
            expect_reject: None,
        }
    }

    pub fn from_jensen(group: String, r: JensenGapReport) -> Self {
        let mut details = Details::new();
        details.insert("lhs".into(), r.lhs.into());
        details.insert("rhs".into(), r.rhs.into());
        details.insert("lhs_std_error".into(), r.lhs_std_error.into());
        details.insert("rhs_std_error".into(), r.rhs_std_error.into());
        details.insert("std_error".into(), r.std_error.into());
        details.insert("norm_spread".into(), r.norm_spread.into());
        details.insert("mean_gradient".into(), serde_json::json!(r.mean_gradient));
        details.insert("resampled".into(), r.resampled.into());
        details.insert("gap_within_error".into(), r.gap_within_error().into());
        Self {
            name: "jensen_gap".into(),
            kind: "jensen_gap".into(),
            group,
            statistic: r.gap,
            p_value: None,
            residual: Some(r.gap),
            threshold: r.tolerance,
            verdict: r.verdict,
            details,
            expect_reject: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overall {
    /// `pass`, `reject`, or `vacuous-pass` when nothing ran.
    pub verdict: String,
    pub corrected_rejections: Vec<String>,
    pub expectations_met: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unmet_expectations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub seed: u64,
    /// Wall-clock fields are only filled in when timing is requested, so that
    /// reports are reproducible byte for byte by default.
    pub duration_ms: Option<f64>,
    pub throughput_paths_per_s: Option<f64>,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: ScenarioConfig,
    pub reports: Vec<ReportEntry>,
    pub overall: Overall,
    pub meta: Meta,
}

impl RunReport {
    pub fn entry(&self, name_prefix: &str) -> Option<&ReportEntry> {
        self.reports.iter().find(|r| r.name.starts_with(name_prefix))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Summary,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "summary" => Ok(Self::Summary),
            other => Err(Error::UnsupportedFormat(other.into())),
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Reject => "reject",
    }
}

/// Serializes a report as canonical JSON, one CSV row per test, or a
/// fixed-width summary table.
pub fn emit_report(report: &RunReport, format: &str) -> Result<Vec<u8>> {
    match format.parse::<ReportFormat>()? {
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(report)?;
            out.push(b'\n');
            Ok(out)
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
            w.write_record([
                "name", "kind", "group", "statistic", "p_value", "residual", "threshold", "verdict", "expect_reject",
            ])
            .map_err(io)?;
            for r in &report.reports {
                w.write_record([
                    r.name.clone(),
                    r.kind.clone(),
                    r.group.clone(),
                    r.statistic.to_string(),
                    opt(r.p_value),
                    opt(r.residual),
                    r.threshold.to_string(),
                    verdict_str(r.verdict).to_string(),
                    r.expect_reject.map(|b| b.to_string()).unwrap_or_default(),
                ])
                .map_err(io)?;
            }
            w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
        }
        ReportFormat::Summary => Ok(summary(report).into_bytes()),
    }
}

fn summary(report: &RunReport) -> String {
    let mut s = String::new();
    let c = &report.config;
    let _ = writeln!(
        s,
        "scenario: {}  seed: {}  alpha: {}  paths: {}  transform: {}",
        if c.name.is_empty() { "(unnamed)" } else { &c.name },
        report.meta.seed,
        c.alpha,
        c.paths,
        c.transform
    );
    let _ = writeln!(
        s,
        "{:<44} {:<20} {:>14} {:>12} {:>12} {:<8} {:<8}",
        "test", "kind", "statistic", "p/residual", "threshold", "verdict", "expected"
    );
    let _ = writeln!(s, "{}", "-".repeat(124));
    for r in &report.reports {
        let pr = r.p_value.or(r.residual).map(|v| format!("{v:.4e}")).unwrap_or_default();
        let expected = match r.expect_reject {
            Some(true) => "reject",
            Some(false) => "pass",
            None => "",
        };
        let name: String = r.name.chars().take(44).collect();
        let _ = writeln!(
            s,
            "{:<44} {:<20} {:>14.6e} {:>12} {:>12.4e} {:<8} {:<8}",
            name,
            r.kind,
            r.statistic,
            pr,
            r.threshold,
            verdict_str(r.verdict),
            expected
        );
    }
    let _ = writeln!(s, "{}", "-".repeat(124));
    let _ = writeln!(
        s,
        "overall: {}  expectations: {}",
        report.overall.verdict,
        if report.overall.expectations_met { "met" } else { "NOT met" }
    );
    if !report.overall.corrected_rejections.is_empty() {
        let _ = writeln!(s, "rejections: {}", report.overall.corrected_rejections.join(", "));
    }
    for u in &report.overall.unmet_expectations {
        let _ = writeln!(s, "unmet: {u}");
    }
    if let Some(ms) = report.meta.duration_ms {
        let _ = writeln!(s, "duration: {ms:.0} ms");
    }
    s
}
