//! Experiment configuration and pipeline stages.

mod config;
mod experiment;
mod stages;

pub use config::{Config, EncodeConfig, EvalConfig, FitConfig, Protocol, SweepConfig, SweepParameter};
pub use experiment::{
    encode_clip, featurize, fit_models, run_experiment, to_f64, ExperimentOutcome, ExperimentSpec, Models, RawBank,
};
pub use stages::{
    clip_stem, compare, load_manifest, protocol_folds, read_loglik, run_encode, run_eval, run_extract, run_fit,
    run_stats, run_sweep, run_synth, run_train, ExtractSummary, Layout, StageSummary,
};
