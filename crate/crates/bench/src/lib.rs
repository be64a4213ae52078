//! Fixtures shared by the benchmarks.

use dynmap_core::synth::SceneSpec;

pub const STREET_SCENE: &str = include_str!("../../core/data/scenes/street.toml");
pub const DENSE_SCENE: &str = include_str!("../../core/data/scenes/dense.toml");

pub fn street_scene() -> SceneSpec {
    SceneSpec::from_toml_str(STREET_SCENE).expect("bundled street scene parses")
}

/// Enclosed scene where nearly every ray returns, ~120k points per sweep.
pub fn dense_scene() -> SceneSpec {
    SceneSpec::from_toml_str(DENSE_SCENE).expect("bundled dense scene parses")
}
