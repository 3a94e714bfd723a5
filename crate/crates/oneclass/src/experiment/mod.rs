//! Config-driven experiments: one TOML file in, a directory of models,
//! score tables, curves, and a provenance record out.

mod commands;
mod config;
mod outputs;

pub use commands::{
    cmd_compare_transforms, cmd_evaluate, cmd_preview_transforms, cmd_score, cmd_size_sweep,
    cmd_synth, cmd_train, resolve_dataset, resolve_transforms, run_full, ComparisonOutcome,
    EvaluateOutcome, PreviewOutcome, ResolvedDataset, ScoreOutcome, SweepOutcome, SynthOutcome,
    TrainOutcome, TrainRunArtifact,
};
pub use config::{
    parse_experiment_config, DatasetSection, Experiment, ExperimentConfig, TrainSize,
    TransformSection, OUTPUT_ROOT_VAR,
};
pub use outputs::write_atomic;
