//! Shared fixtures for the pipeline benchmarks.

use rcm_core::{JointConfig, Material, PanelSet};

/// Unoptimized three-panel record used as the synthesis starting point.
pub fn seed_panels() -> PanelSet {
    PanelSet::from_free_angles(
        [5.0, 15.6, 10.0],
        [5.15, 5.0, 10.05],
        159.8,
        150.6,
        10.0,
        Material::PA12,
    )
    .expect("valid seed record")
}

pub fn best_config() -> JointConfig {
    JointConfig::new(97.86, 95.98, 1.33, 3.42, 42.68)
}
