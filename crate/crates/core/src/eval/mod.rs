//! Metrics, agreement statistics, significance testing, the
//! leave-one-subject-out harness and sensor ablations.

pub mod ablate;
pub mod agreement;
pub mod loso;
pub mod metrics;
pub mod profile;
pub mod stats;

pub use ablate::{ablate, default_configs, AblationRow, AblationTable};
pub use agreement::{
    cohen_kappa, fleiss_kappa, fleiss_kappa_sequences, majority_truth, ratings_table, scott_pi,
    AgreementTier,
};
pub use loso::{
    loso_run, loso_with_runs, run_fold, FoldRun, LosoConfig, LosoReport, Subset, SubsetReport,
    TrackReport, TrackSelection,
};
pub use metrics::{confusion, summary_metrics, ClassScore, ConfusionMatrix, Metrics};
pub use profile::{activity_profile, profile_distance};
pub use stats::{mann_whitney, MannWhitney};
