//! Executable checks and measurements over encoders: gradient heatmaps,
//! permutation audits, recovery of static aggregations, linearization
//! remainders, runtime scaling, and paired significance tests.

mod equivariance;
mod gradcheck;
mod heatmap;
mod recovery;
mod remainder;
mod scaling;
mod wilcoxon;

pub use equivariance::{
    equivariance_audit, equivariance_audit_with, equivariance_suite, pinned_feature_forward, random_encoder,
    EquivarianceReport, SuiteBounds,
};
pub use gradcheck::{gradcheck, gradcheck_suite, GradcheckBounds, GradcheckCase, GradcheckReport};
pub use heatmap::{heatmap, heatmap_at, Heatmap, HeatmapConfig};
pub use recovery::{
    recovery_check, recovery_suite, row_weights, standard_rows, DenseTarget, RecoveryParams, RecoveryResult,
    RecoveryRow,
};
pub use remainder::{
    default_epsilons, remainder_probe, remainder_probe_at, LinearizationReport, LinearizationSample,
    SmoothMap, SquaredNorm,
};
pub use scaling::{scaling_probe, time_forward, ScalingPoint, ScalingReport, ScalingRow};
pub use wilcoxon::{
    wilcoxon_differences, wilcoxon_exact, wilcoxon_normal, wilcoxon_signed_rank, PValueMethod,
    PairedAccuracies, WilcoxonResult, EXACT_MAX_N,
};
