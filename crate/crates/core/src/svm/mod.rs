//! Linear max-margin learners combined with error-correcting output codes.

pub mod ecoc;
pub mod linear;

pub use ecoc::{ecoc_code, ecoc_train, EcocModel};
pub use linear::{fit_linear_svm, hinge_objective, train_linear_svm, LinearModel, SvmParams};
