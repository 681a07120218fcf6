//! Ground-truth oracle, image metrics and the sweep experiments.

pub mod experiments;
pub mod metrics;
pub mod raycast;
pub mod scene;

pub use experiments::{
    disparity_sweep_experiment, evaluate_targets, layer_sweep_experiment, panorama_targets, standard_config,
    ring_targets, standard_rig, translated, SweepRow, SweepTable, STANDARD_VIEW_SIZE,
};
pub use metrics::{compute_metrics, Metrics, MetricsReport, PSNR_CAP};
pub use raycast::{raycast_render, render_rig_views, world_target, RaycastImage};
pub use scene::{Material, Primitive, SyntheticScene, Texture};
