//! Design and analysis of compliant off-axis remote-center-of-motion joints.
//!
//! The pipeline runs from a closed-form panel compliance model ([`model`],
//! [`synth`]) through a 3D beam finite-element model of the full joint
//! ([`fem`], [`joint`]) to directional metrics ([`characterize`]), design
//! space screening ([`feasibility`]), fatigue workspace ([`fatigue`]) and
//! comparison against bench data ([`validate`]).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod characterize;
pub mod error;
pub mod fatigue;
pub mod feasibility;
pub mod fem;
pub mod joint;
pub mod kv;
pub mod model;
pub mod svg;
pub mod synth;
pub mod validate;

pub use characterize::{
    design_metrics, fit_ellipse, DesignMetrics, DirectionalSweep, EllipseFit, MetricOptions, Safety,
};
pub use error::{Error, Result};
pub use fatigue::{FatigueParams, WorkspaceResult};
pub use feasibility::{pareto_filter, run_study, select_best, FeasibilityBounds, FeasibilityStudy};
pub use fem::{FrameAnalysis, FrameModel};
pub use joint::{build_joint, JointConfig};
pub use model::{
    anisotropy_index, assemble_stiffness, beam_stiffness, compliance, section_properties, Material,
    Panel, PanelSet,
};
pub use synth::{
    minimize_idx, normalize_ratios, Bounds, Ratios, SynthesisOptions, SynthesisResult,
};
pub use validate::{global_metrics, pct_error, MeasurementSet, ValidationReport};
