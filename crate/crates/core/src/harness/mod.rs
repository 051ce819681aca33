//! Splitting, repeated evaluation, synthetic-pretraining experiments and
//! report tables.

pub mod cache;
pub mod config;
pub mod features;
pub mod method;
pub mod pipeline;
pub mod report;
pub mod run;
pub mod split;

pub use cache::{FeatureCache, CACHE_ENV};
pub use config::{run_experiment, AdaptationConfig, DatasetSource, ExperimentConfig};
pub use method::{
    baseline_methods, ClassifierKind, FeatureKind, MethodSpec, Reduction, DEFAULT_SRC_DIM,
    MAX_SRC_DIM,
};
pub use pipeline::{TrainedClassifier, TrainedPipeline};
pub use report::{
    format_accuracy, format_percent, render_report, ExperimentReport, ReportFormat, RunMode,
    RunRecord,
};
pub use run::{
    evaluate, evaluate_adapted, evaluate_synth_only, pretrain, run_adaptation, run_method,
    run_shuffles, AdaptOptions, AdaptationSummary, Outcome, Pretrained, ShuffleSummary,
};
pub use split::{make_split, split_label, Split, SplitSpec, PROTOCOL_FRACTIONS};
