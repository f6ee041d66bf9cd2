//! End-to-end experiment orchestration: data ingestion, stratified
//! splitting, cross-validated hyperparameter selection, the dual-kernel
//! task flow, the feature and alpha sweeps, and persisted results.

pub mod config;
pub mod cv;
pub mod idx;
pub mod report;
pub mod split;
pub mod synth;
pub mod task;

pub use config::{derive_seed, ExperimentConfig, FeatureMapTemplate, GammaSpec, Grids};
pub use cv::{classical_candidates, cv_accuracy, cv_select, mixed_candidates, CvChoice, KernelCandidate};
pub use idx::{load_fashion_mnist, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels, IdxImages};
pub use report::{emit_report, KernelStatsRow, ReportBundle, RunManifest};
pub use split::{cv_folds, split};
pub use synth::{synth_dataset, uniform_features, write_synth_dir, SynthSpec};
pub use task::{
    config_tasks, default_tasks, run_dual_kernel_task, run_ovo_task, sweep_alpha,
    sweep_features, class_subset, AlphaRow, ModelOutcome, OvoOutcome, OvoRunSpec,
    SweepAlphaOutput, SweepFailure, SweepFeaturesOutput, SweepRow, TaskOutcome, TaskParams,
};
