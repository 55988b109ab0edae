//! Bundled example scenes.

use super::scene::{parse_scene, SceneError};
use super::suite::{run_suite, Overrides, Report};

macro_rules! scene {
    ($name:literal) => {
        ($name, include_str!(concat!("../../scenes/", $name, ".scene")))
    };
}

const EXAMPLES: [(&str, &str); 10] = [
    scene!("hopf"),
    scene!("poincare"),
    scene!("torus_quotient"),
    scene!("e67"),
    scene!("orthant_cone"),
    scene!("lorentz_cone"),
    scene!("sphere_cone"),
    scene!("halfplane_cone"),
    scene!("mapping_torus_halfplane"),
    scene!("lee_perturbation_torus"),
];

pub fn list_examples() -> Vec<&'static str> {
    EXAMPLES.iter().map(|(n, _)| *n).collect()
}

/// Source text of a bundled scene.
pub fn example_source(name: &str) -> Result<&'static str, SceneError> {
    EXAMPLES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| *s)
        .ok_or_else(|| {
            SceneError::Invalid(format!(
                "unknown example \"{name}\"; available: {}",
                list_examples().join(", ")
            ))
        })
}

pub fn run_example(name: &str, overrides: &Overrides) -> Result<Report, SceneError> {
    let scene = parse_scene(example_source(name)?)?;
    Ok(run_suite(&scene, overrides))
}
