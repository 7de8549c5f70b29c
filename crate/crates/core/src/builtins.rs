//! Scenario files shipped with the crate.

use std::path::Path;

use crate::scenario::{Scenario, ScenarioError};

macro_rules! scenario_sources {
    ($($name:literal),* $(,)?) => {
        /// `(name, TOML source)` of every built-in scenario.
        pub const SOURCES: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../scenarios/", $name, ".toml")))),*
        ];
    };
}

scenario_sources!(
    "trivial-static",
    "moving-half-line",
    "linear-ode",
    "exact-slow",
    "volterra-memory",
    "sliding-halfplane",
    "ball-volterra",
    "sphere-rotation",
    "sphere-slide",
    "translated-box",
    "moving-ball",
);

pub fn load(name: &str) -> Result<Scenario, ScenarioError> {
    let (_, source) = SOURCES.iter().find(|(n, _)| *n == name).ok_or_else(|| ScenarioError {
        origin: name.to_string(),
        line: None,
        message: "no built-in scenario with this name".into(),
    })?;
    Scenario::parse(source, &format!("builtin:{name}"), Path::new("."))
}

/// Every built-in scenario, parsed. Panics if a shipped file is invalid.
pub fn all() -> Vec<(&'static str, Scenario)> {
    SOURCES
        .iter()
        .map(|(name, _)| (*name, load(name).unwrap_or_else(|e| panic!("{e}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn every_builtin_parses() {
        assert_eq!(super::all().len(), super::SOURCES.len());
        assert!(super::load("nope").is_err());
    }
}
