//! Fixtures shared by the criterion benches.

use sciswarm_core::{load_config, RunConfig};

/// Sphere run of the given size in the given fitness mode.
pub fn fixture(mode: &str, labs: usize, iterations: u64) -> RunConfig {
    load_config(&format!(
        r#"{{"seed": 1, "landscape": "sphere", "dim": 10, "iterations": {iterations},
            "mode": "{mode}", "lifecycle.initial_population": {labs}}}"#
    ))
    .expect("valid bench config")
}
