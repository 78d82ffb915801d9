use serde::{Deserialize, Serialize};

use crate::conformance::StationarityWindows;
use crate::error::{Error, Result};
use crate::pde::{GridDomain, Mask};
use crate::process::{GaussianLaw, TimeGrid};
use crate::transforms::Transform;

pub const SCHEMA_VERSION: u32 = 1;
pub const MIN_PATHS: usize = 100;

fn default_alpha() -> f64 {
    0.01
}
fn default_paths() -> usize {
    100_000
}
fn default_transform() -> String {
    "identity".into()
}
fn default_permutations() -> usize {
    500
}
fn default_bootstrap() -> usize {
    200
}
fn default_samples() -> usize {
    1_000_000
}
fn default_laplace_tol() -> f64 {
    1e-6
}
fn default_constancy_tol() -> f64 {
    1e-4
}
fn default_target() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawConfig {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<Vec<f64>>,
    /// Identity when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Explicit grid, used instead of `horizon`/`steps`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResamplingConfig {
    #[serde(default = "default_permutations")]
    pub permutations: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
}

impl Default for ResamplingConfig {
    fn default() -> Self {
        Self { permutations: default_permutations(), bootstrap: default_bootstrap() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub spacing: f64,
    #[serde(default = "default_mask")]
    pub mask: Mask,
}

fn default_mask() -> Mask {
    Mask::Box
}

/// One requested diagnostic. Every entry may set `expect_reject`; when it is
/// unset a pass is expected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestSpec {
    /// The full conformance battery on the transformed process.
    Suite {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        marginal_times: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stationarity: Option<StationarityWindows>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        independence_windows: Option<Vec<[[f64; 2]; 2]>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        conditional_mean: Option<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        qv: Option<bool>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_reject: Option<bool>,
    },
    /// Transformed process at `t` against fresh, independent draws of the
    /// untransformed law at `t`.
    TwoSampleMarginal {
        times: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_reject: Option<bool>,
    },
    GaussianMarginal {
        times: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_reject: Option<bool>,
    },
    Stationarity {
        delta: f64,
        t1: f64,
        t2: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_reject: Option<bool>,
    },
    Independence {
        window1: [f64; 2],
        window2: [f64; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_reject: Option<bool>,
    },
    /// Regression of transformed increments on the untransformed state.
    ConditionalMean {
        s: f64,
        t: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_reject: Option<bool>,
    },
    QvLinearity {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_reject: Option<bool>,
    },
    Laplacian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        field: Option<String>,
        #[serde(default = "default_laplace_tol")]
        tolerance: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_reject: Option<bool>,
    },
    Eikonal {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        field: Option<String>,
        #[serde(default = "default_target")]
        target: f64,
        #[serde(default = "default_laplace_tol")]
        tolerance: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_reject: Option<bool>,
    },
    GradientConstancy {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        field: Option<String>,
        #[serde(default = "default_constancy_tol")]
        tolerance: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_reject: Option<bool>,
    },
    MeanValue {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        field: Option<String>,
        x: Vec<f64>,
        r: f64,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_reject: Option<bool>,
    },
    Smoothing {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        field: Option<String>,
        tau: f64,
        x: Vec<f64>,
        mu: f64,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_reject: Option<bool>,
    },
    JensenGap {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        field: Option<String>,
        tau: f64,
        x: Vec<f64>,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_reject: Option<bool>,
    },
    BallVolume {
        dims: Vec<usize>,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_reject: Option<bool>,
    },
}

impl TestSpec {
    pub fn expect_reject(&self) -> Option<bool> {
        use TestSpec::*;
        match self {
            Suite { expect_reject, .. }
            | TwoSampleMarginal { expect_reject, .. }
            | GaussianMarginal { expect_reject, .. }
            | Stationarity { expect_reject, .. }
            | Independence { expect_reject, .. }
            | ConditionalMean { expect_reject, .. }
            | QvLinearity { expect_reject }
            | Laplacian { expect_reject, .. }
            | Eikonal { expect_reject, .. }
            | GradientConstancy { expect_reject, .. }
            | MeanValue { expect_reject, .. }
            | Smoothing { expect_reject, .. }
            | JensenGap { expect_reject, .. }
            | BallVolume { expect_reject, .. } => *expect_reject,
        }
    }

    /// Whether the test needs simulated paths.
    pub fn needs_paths(&self) -> bool {
        use TestSpec::*;
        matches!(
            self,
            Suite { .. }
                | TwoSampleMarginal { .. }
                | GaussianMarginal { .. }
                | Stationarity { .. }
                | Independence { .. }
                | ConditionalMean { .. }
                | QvLinearity { .. }
        )
    }

    pub fn kind(&self) -> &'static str {
        use TestSpec::*;
        match self {
            Suite { .. } => "suite",
            TwoSampleMarginal { .. } => "two_sample_marginal",
            GaussianMarginal { .. } => "gaussian_marginal",
            Stationarity { .. } => "stationarity",
            Independence { .. } => "independence",
            ConditionalMean { .. } => "conditional_mean",
            QvLinearity { .. } => "qv_linearity",
            Laplacian { .. } => "laplacian",
            Eikonal { .. } => "eikonal",
            GradientConstancy { .. } => "gradient_constancy",
            MeanValue { .. } => "mean_value",
            Smoothing { .. } => "smoothing",
            JensenGap { .. } => "jensen_gap",
            BallVolume { .. } => "ball_volume",
        }
    }

    fn field(&self) -> Option<&str> {
        use TestSpec::*;
        match self {
            Laplacian { field, .. }
            | Eikonal { field, .. }
            | GradientConstancy { field, .. }
            | MeanValue { field, .. }
            | Smoothing { field, .. }
            | JensenGap { field, .. } => field.as_deref(),
            _ => None,
        }
    }
}

/// Declarative experiment: law, grid, transform and the diagnostics to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_paths")]
    pub paths: usize,
    pub law: LawConfig,
    pub grid: GridConfig,
    #[serde(default = "default_transform")]
    pub transform: String,
    #[serde(default)]
    pub resampling: ResamplingConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub tests: Vec<TestSpec>,
}

/// A configuration whose fields have all been checked and parsed.
#[derive(Debug, Clone)]
pub struct Validated {
    pub law: GaussianLaw<f64>,
    pub origin: Vec<f64>,
    pub grid: TimeGrid<f64>,
    pub transform: Transform<f64>,
    pub domain: GridDomain,
    /// Parsed `field` of each PDE test (the scenario transform when unset).
    pub fields: Vec<Option<Transform<f64>>>,
}

fn invalid(field: impl Into<String>, message: impl std::fmt::Display) -> Error {
    Error::config(field, message.to_string())
}

fn on_grid(grid: &TimeGrid<f64>, field: &str, t: f64) -> Result<()> {
    grid.index_of(t).map(|_| ()).map_err(|_| invalid(field, format!("time {t} is not a grid point")))
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let field = e.span().map(|s| format!("byte {}..{}", s.start, s.end)).unwrap_or_else(|| "config".into());
            Error::config(field, e.message().to_string())
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario configs are always representable as TOML")
    }

    pub fn needs_paths(&self) -> bool {
        self.tests.iter().any(TestSpec::needs_paths)
    }

    /// Checks every field; errors name the offending field.
    pub fn validate(&self) -> Result<Validated> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", format!("must lie in (0, 1), got {}", self.alpha)));
        }
        if self.paths < MIN_PATHS {
            return Err(invalid("paths", format!("must be at least {MIN_PATHS}, got {}", self.paths)));
        }
        if self.resampling.permutations == 0 {
            return Err(invalid("resampling.permutations", "must be positive"));
        }
        if self.resampling.bootstrap == 0 {
            return Err(invalid("resampling.bootstrap", "must be positive"));
        }

        let n = self.law.dim;
        if n == 0 {
            return Err(invalid("law.dim", "must be positive"));
        }
        let drift = self.law.drift.clone().unwrap_or_else(|| vec![0.0; n]);
        if drift.len() != n {
            return Err(invalid("law.drift", format!("expected {n} entries, got {}", drift.len())));
        }
        let cov = match &self.law.covariance {
            None => ndarray::Array2::eye(n),
            Some(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(invalid("law.covariance", format!("must be {n}×{n}")));
                }
                ndarray::Array2::from_shape_fn((n, n), |(i, j)| rows[i][j])
            }
        };
        let law = GaussianLaw::new(ndarray::Array1::from(drift), cov).map_err(|e| invalid("law.covariance", e))?;
        let origin = self.law.origin.clone().unwrap_or_else(|| vec![0.0; n]);
        if origin.len() != n {
            return Err(invalid("law.origin", format!("expected {n} entries, got {}", origin.len())));
        }

        let grid = match (&self.grid.times, self.grid.horizon, self.grid.steps) {
            (Some(times), None, None) => TimeGrid::new(times.clone()).map_err(|e| invalid("grid.times", e))?,
            (None, Some(h), Some(k)) => TimeGrid::uniform(h, k).map_err(|e| invalid("grid", e))?,
            _ => return Err(invalid("grid", "give either `times` or both `horizon` and `steps`")),
        };

        // A bare `identity` adopts the law's dimension.
        let transform = if self.transform.trim() == "identity" {
            Transform::Identity(n)
        } else {
            Transform::parse(&self.transform).map_err(|e| invalid("transform", e))?
        };
        if transform.input_dim() != n {
            return Err(invalid(
                "transform",
                format!("takes {} inputs but the law has dimension {n}", transform.input_dim()),
            ));
        }

        let domain = match &self.domain {
            Some(d) => GridDomain::new(d.lo.clone(), d.hi.clone(), d.spacing, d.mask.clone())
                .map_err(|e| invalid("domain", e))?,
            None => GridDomain::cube(n, 0.05).map_err(|e| invalid("domain", e))?,
        };

        let mut fields = Vec::with_capacity(self.tests.len());
        for (i, test) in self.tests.iter().enumerate() {
            let at = |name: &str| format!("tests[{i}].{name}");
            self.validate_test(test, &grid, &at)?;
            let field = match test.field() {
                Some(spec) => {
                    let f = Transform::parse(spec).map_err(|e| invalid(at("field"), e))?;
                    Some(f)
                }
                None => None,
            };
            if !test.needs_paths() && !matches!(test, TestSpec::BallVolume { .. }) {
                let f = field.as_ref().unwrap_or(&transform);
                if !f.is_scalar() {
                    return Err(invalid(at("field"), format!("`{f}` is not scalar-valued")));
                }
                let dim = match test {
                    TestSpec::MeanValue { x, .. } | TestSpec::Smoothing { x, .. } | TestSpec::JensenGap { x, .. } => {
                        x.len()
                    }
                    _ => domain.dim(),
                };
                if f.input_dim() != dim {
                    return Err(invalid(at("field"), format!("`{f}` takes {} inputs, expected {dim}", f.input_dim())));
                }
                if matches!(test, TestSpec::Smoothing { .. } | TestSpec::JensenGap { .. }) && dim != n {
                    return Err(invalid(at("x"), format!("expected {n} coordinates to match the law")));
                }
            }
            fields.push(field);
        }
        Ok(Validated { law, origin, grid, transform, domain, fields })
    }

    fn validate_test(
        &self,
        test: &TestSpec,
        grid: &TimeGrid<f64>,
        at: &dyn Fn(&str) -> String,
    ) -> Result<()> {
        use TestSpec::*;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(at(name), format!("must be positive, got {v}")))
            }
        };
        let window = |name: &str, w: [f64; 2]| -> Result<()> {
            if !(w[0] < w[1]) {
                return Err(invalid(at(name), format!("window {w:?} must satisfy start < end")));
            }
            on_grid(grid, &at(name), w[0])?;
            on_grid(grid, &at(name), w[1])
        };
        let start = grid.times()[0];
        match test {
            Suite { marginal_times, stationarity, independence_windows, conditional_mean, .. } => {
                for &t in marginal_times.iter().flatten() {
                    if !(t > start) {
                        return Err(invalid(at("marginal_times"), format!("time {t} must follow the grid start")));
                    }
                    on_grid(grid, &at("marginal_times"), t)?;
                }
                if let Some(w) = stationarity {
                    positive("stationarity.delta", w.delta)?;
                    window("stationarity", [w.t1, w.t1 + w.delta])?;
                    window("stationarity", [w.t2, w.t2 + w.delta])?;
                }
                for pair in independence_windows.iter().flatten() {
                    window("independence_windows", pair[0])?;
                    window("independence_windows", pair[1])?;
                }
                if let Some(w) = conditional_mean {
                    window("conditional_mean", *w)?;
                }
                // Defaults must fit the grid as well.
                if marginal_times.is_none() || stationarity.is_none() || independence_windows.is_none() {
                    let horizon = grid.horizon();
                    if horizon < start + 2.0 {
                        return Err(invalid(
                            at("kind"),
                            "default suite windows need the grid to span two time units; set them explicitly",
                        ));
                    }
                    for t in [0.5, 1.0, 2.0] {
                        on_grid(grid, &at("marginal_times"), start + t)?;
                    }
                }
                Ok(())
            }
            TwoSampleMarginal { times, .. } | GaussianMarginal { times, .. } => {
                if times.is_empty() {
                    return Err(invalid(at("times"), "must not be empty"));
                }
                for &t in times {
                    if !(t > start) {
                        return Err(invalid(at("times"), format!("time {t} must follow the grid start")));
                    }
                    on_grid(grid, &at("times"), t)?;
                }
                Ok(())
            }
            Stationarity { delta, t1, t2, .. } => {
                positive("delta", *delta)?;
                window("t1", [*t1, t1 + delta])?;
                window("t2", [*t2, t2 + delta])
            }
            Independence { window1, window2, .. } => {
                window("window1", *window1)?;
                window("window2", *window2)
            }
            ConditionalMean { s, t, .. } => window("s", [*s, *t]),
            QvLinearity { .. } => {
                if grid.steps() < crate::conformance::qv::MIN_STEPS {
                    return Err(invalid(
                        "grid",
                        format!("QV linearity needs at least {} steps", crate::conformance::qv::MIN_STEPS),
                    ));
                }
                Ok(())
            }
            Laplacian { tolerance, .. } | GradientConstancy { tolerance, .. } => positive("tolerance", *tolerance),
            Eikonal { target, tolerance, .. } => {
                if !(*target >= 0.0) {
                    return Err(invalid(at("target"), "must be non-negative"));
                }
                positive("tolerance", *tolerance)
            }
            MeanValue { r, samples, .. } => {
                positive("r", *r)?;
                samples_ok(*samples, &at("samples"))
            }
            Smoothing { tau, samples, .. } | JensenGap { tau, samples, .. } => {
                positive("tau", *tau)?;
                samples_ok(*samples, &at("samples"))
            }
            BallVolume { dims, samples, .. } => {
                if dims.is_empty() || dims.contains(&0) {
                    return Err(invalid(at("dims"), "must list positive dimensions"));
                }
                samples_ok(*samples, &at("samples"))
            }
        }
    }
}

fn samples_ok(samples: usize, field: &str) -> Result<()> {
    if samples < 2 {
        Err(invalid(field, format!("need at least 2 samples, got {samples}")))
    } else {
        Ok(())
    }
}
