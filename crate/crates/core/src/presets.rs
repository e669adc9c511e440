//! Scenario files shipped with the crate.

use crate::scenario::{parse_scenario, Scenario, ScenarioError};

pub const PRESETS: &[(&str, &str)] = &[
    ("fig3a", include_str!("../presets/fig3a.toml")),
    ("fig3b", include_str!("../presets/fig3b.toml")),
    ("fig6a", include_str!("../presets/fig6a.toml")),
    ("fig6b", include_str!("../presets/fig6b.toml")),
    ("fig7a", include_str!("../presets/fig7a.toml")),
    ("fig7b", include_str!("../presets/fig7b.toml")),
    ("fig9a", include_str!("../presets/fig9a.toml")),
    ("fig9b", include_str!("../presets/fig9b.toml")),
];

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Parses a preset. `None` if no preset has that name.
pub fn load_preset(name: &str) -> Option<Result<Scenario, ScenarioError>> {
    preset_text(name).map(parse_scenario)
}
