//! Linear classifiers, evaluation metrics and protocols.

mod metrics;
mod protocol;
mod report;
mod svm;

pub use metrics::{average_precision, mean_average_precision, mean_class_accuracy, mtsvf, tsvf, ClassAccuracy};
pub use protocol::{cross_validate, fixed_split, leave_one_group_out, leave_one_group_out_folds, Fold};
pub use report::{improvement_split, ClassResult, EvalReport, FoldResult, ImprovementSplit};
pub use svm::{train_binary, train_one_vs_all, BinaryFit, LinearModel, SvmParams, MODEL_MAGIC};
