//! The shipped scenarios, embedded at build time.

use super::driver::{run_scenario, ScenarioReport};
use super::scenario::{Scenario, ScenarioError};

/// File stem and TOML text of every shipped scenario.
pub const SCENARIOS: [(&str, &str); 10] = [
    ("golden_path", include_str!("../../scenarios/golden_path.toml")),
    ("prop1_secret_free", include_str!("../../scenarios/prop1_secret_free.toml")),
    ("prop2_hide", include_str!("../../scenarios/prop2_hide.toml")),
    ("prop2_tamper", include_str!("../../scenarios/prop2_tamper.toml")),
    ("prop2_wrong_readout", include_str!("../../scenarios/prop2_wrong_readout.toml")),
    ("prop2_false_time", include_str!("../../scenarios/prop2_false_time.toml")),
    ("prop3_transcript", include_str!("../../scenarios/prop3_transcript.toml")),
    ("prop4_evidence_service", include_str!("../../scenarios/prop4_evidence_service.toml")),
    ("prop5_post_compromise", include_str!("../../scenarios/prop5_post_compromise.toml")),
    ("prop6_forgery", include_str!("../../scenarios/prop6_forgery.toml")),
];

pub fn shipped() -> Vec<Scenario> {
    SCENARIOS
        .iter()
        .map(|(stem, text)| Scenario::from_toml(text).unwrap_or_else(|e| panic!("shipped scenario {stem}: {e}")))
        .collect()
}

pub fn find(name: &str) -> Option<Scenario> {
    shipped()
        .into_iter()
        .zip(SCENARIOS)
        .find(|(s, (stem, _))| s.name == name || *stem == name)
        .map(|(s, _)| s)
}

/// Runs every shipped scenario with `seed`, or with its own seed.
pub fn run_suite(seed: Option<u64>) -> Result<Vec<ScenarioReport>, ScenarioError> {
    shipped()
        .into_iter()
        .map(|mut s| {
            if let Some(seed) = seed {
                s.seed = seed;
            }
            run_scenario(&s)
        })
        .collect()
}
