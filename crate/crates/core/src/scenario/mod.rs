//! Declarative scenarios: configuration, execution and report output.

pub mod builtin;
pub mod config;
pub mod report;
pub mod run;

pub use builtin::{builtin, builtin_names};
pub use config::{ScenarioConfig, TestSpec, Validated};
pub use report::{emit_report, Meta, Overall, ReportEntry, ReportFormat, RunReport};
pub use run::{run_on_ensemble, run_scenario, RunOptions};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn small(name: &str, paths: usize) -> ScenarioConfig {
        let mut c = builtin(name).unwrap();
        c.paths = paths;
        c.resampling.permutations = 50;
        c.resampling.bootstrap = 50;
        c
    }

    #[test]
    fn builtins_validate() {
        for name in builtin_names() {
            builtin(name).unwrap().validate().unwrap();
        }
        assert!(builtin("nope").unwrap_err().is_config());
    }

    #[test]
    fn affine_sanity_passes_at_small_scale() {
        let r = run_scenario(&small("affine-sanity", 2_000), RunOptions::default()).unwrap();
        assert_eq!(r.overall.verdict, "pass", "{:?}", r.overall);
        assert!(r.overall.expectations_met);
        assert!(r.meta.duration_ms.is_none());
    }

    #[test]
    fn report_is_reproducible() {
        let c = small("affine-sanity", 500);
        let a = emit_report(&run_scenario(&c, RunOptions::default()).unwrap(), "json").unwrap();
        let b = emit_report(&run_scenario(&c, RunOptions::default()).unwrap(), "json").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_test_list_is_vacuous() {
        let mut c = small("affine-sanity", 200);
        c.tests.clear();
        let r = run_scenario(&c, RunOptions::default()).unwrap();
        assert_eq!(r.overall.verdict, "vacuous-pass");
        let v: serde_json::Value = serde_json::from_slice(&emit_report(&r, "json").unwrap()).unwrap();
        assert_eq!(v["reports"], serde_json::json!([]));
        assert_eq!(v["overall"]["verdict"], "vacuous-pass");
    }

    #[test]
    fn csv_has_header_and_one_row_per_test() {
        let mut c = small("affine-sanity", 300);
        c.tests = vec![TestSpec::QvLinearity { expect_reject: None }];
        let out = emit_report(&run_scenario(&c, RunOptions::default()).unwrap(), "csv").unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("name,kind,group,statistic"));
        assert!(lines[1].starts_with("qv_linearity,qv_linearity,tests[0]"));
    }

    #[test]
    fn unsupported_format() {
        let mut c = small("affine-sanity", 200);
        c.tests.clear();
        let r = run_scenario(&c, RunOptions::default()).unwrap();
        assert!(matches!(emit_report(&r, "xml"), Err(Error::UnsupportedFormat(f)) if f == "xml"));
        let s = String::from_utf8(emit_report(&r, "summary").unwrap()).unwrap();
        assert!(s.contains("overall: vacuous-pass"));
    }

    #[test]
    fn invalid_alpha_is_a_config_error() {
        let mut c = small("affine-sanity", 200);
        c.alpha = 1.5;
        let err = run_scenario(&c, RunOptions::default()).unwrap_err();
        assert!(matches!(err, Error::ConfigInvalid { ref field, .. } if field == "alpha"), "{err:?}");
    }

    #[test]
    fn pde_gallery_meets_expectations() {
        let mut c = builtin("pde-gallery").unwrap();
        for t in &mut c.tests {
            match t {
                TestSpec::MeanValue { samples, .. }
                | TestSpec::Smoothing { samples, .. }
                | TestSpec::JensenGap { samples, .. }
                | TestSpec::BallVolume { samples, .. } => *samples = 100_000,
                _ => {}
            }
        }
        let r = run_scenario(&c, RunOptions::default()).unwrap();
        assert!(r.overall.expectations_met, "{:?}", r.overall.unmet_expectations);
        let note = r.entry("ball_volume[n=3]").unwrap().details.get("note").unwrap();
        assert!(note.as_str().unwrap().contains("Γ(n/2+1)"));
    }

    #[test]
    fn stage_is_named_in_runtime_errors() {
        let mut c = small("affine-sanity", 200);
        c.tests = vec![TestSpec::Laplacian { field: Some("restrict(harmonic(re_z^2), lo=[-1,-1], hi=[1,1])".into()), tolerance: 1e-6, expect_reject: None }];
        let err = run_scenario(&c, RunOptions::default()).unwrap_err();
        assert!(err.to_string().starts_with("tests[0] (laplacian)"), "{err}");
        assert!(matches!(err.root(), Error::HaloOutsideEvaluationDomain { .. }));
    }
}
