use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Reject,
}

impl Verdict {
    pub fn is_reject(self) -> bool {
        self == Verdict::Reject
    }
}

/// Key-value estimates attached to a report.
pub type Details = BTreeMap<String, Value>;

/// Outcome of one statistical or numerical diagnostic.
///
/// `verdict` is `reject` exactly when `p_value < threshold` (tests with a
/// p-value) or `statistic > threshold` (pure residual checks).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_value: Option<f64>,
    pub threshold: f64,
    pub verdict: Verdict,
    pub details: Details,
}

impl TestReport {
    pub fn from_p_value(name: impl Into<String>, statistic: f64, p_value: f64, alpha: f64, details: Details) -> Self {
        Self {
            name: name.into(),
            statistic,
            p_value: Some(p_value),
            threshold: alpha,
            verdict: if p_value < alpha { Verdict::Reject } else { Verdict::Pass },
            details,
        }
    }

    pub fn from_residual(name: impl Into<String>, residual: f64, threshold: f64, details: Details) -> Self {
        Self {
            name: name.into(),
            statistic: residual,
            p_value: None,
            threshold,
            verdict: if residual > threshold { Verdict::Reject } else { Verdict::Pass },
            details,
        }
    }

    pub fn detail(&self, key: &str) -> Option<f64> {
        self.details.get(key).and_then(Value::as_f64)
    }

    /// Re-evaluates the verdict against an adjusted p-value, keeping the raw one in the details.
    pub(crate) fn with_adjusted_p(mut self, adjusted: f64) -> Self {
        if let Some(raw) = self.p_value {
            self.details.insert("p_value_raw".into(), raw.into());
            self.p_value = Some(adjusted);
            self.verdict = if adjusted < self.threshold {
                Verdict::Reject
            } else {
                Verdict::Pass
            };
        }
        self
    }
}

/// Permutation/bootstrap p-value `(1 + #{null ≥ observed}) / (B + 1)`.
pub(crate) fn resampling_p_value(observed: f64, null: &[f64]) -> f64 {
    let exceed = null.iter().filter(|&&v| v >= observed).count();
    (1 + exceed) as f64 / (null.len() + 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_rule() {
        let r = TestReport::from_p_value("a", 1.0, 0.009, 0.01, Details::new());
        assert_eq!(r.verdict, Verdict::Reject);
        let r = TestReport::from_p_value("a", 1.0, 0.01, 0.01, Details::new());
        assert_eq!(r.verdict, Verdict::Pass);
        let r = TestReport::from_residual("b", 0.2, 0.1, Details::new());
        assert_eq!(r.verdict, Verdict::Reject);
        let r = TestReport::from_residual("b", 0.1, 0.1, Details::new());
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn json_shape() {
        let r = TestReport::from_residual("qv", 0.5, 1.0, Details::new());
        let v = serde_json::to_value(&r).unwrap();
        assert!(v.get("p_value").is_none());
        assert_eq!(v["verdict"], "pass");
        let r = TestReport::from_p_value("t", 0.5, 0.2, 0.01, Details::new());
        assert_eq!(serde_json::to_value(&r).unwrap()["p_value"], 0.2);
    }

    #[test]
    fn p_value_counts_ties() {
        assert_eq!(resampling_p_value(1.0, &[0.0, 1.0, 2.0]), 0.75);
        assert_eq!(resampling_p_value(5.0, &[0.0; 9]), 0.1);
    }
}
