use super::config::ScenarioConfig;
use crate::error::{Error, Result};

const BUILTINS: &[(&str, &str)] = &[
    ("affine-sanity", include_str!("../../scenarios/affine-sanity.toml")),
    ("counterexample", include_str!("../../scenarios/counterexample.toml")),
    ("pde-gallery", include_str!("../../scenarios/pde-gallery.toml")),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTINS.iter().map(|(n, _)| *n)
}

pub fn builtin(name: &str) -> Result<ScenarioConfig> {
    let (_, text) = BUILTINS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        Error::config(
            "scenario",
            format!("unknown builtin `{name}`; available: {}", builtin_names().collect::<Vec<_>>().join(", ")),
        )
    })?;
    ScenarioConfig::from_toml(text)
}
