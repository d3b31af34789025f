//! Metrics, the training loop, and the experiment runner.

mod bleu;
mod experiment;
mod train;

pub use bleu::{bleu, oov_recall, recalled_oov};
pub use experiment::{
    evaluate, run_experiment, setting_sources, sweep, EvalReport, ExampleReport, ExperimentConfig,
    ExperimentResult, Setting, SweepGrid, SweepPoint,
};
pub use train::{
    batch_gradients, build_nl_vocabulary, greedy_bleu, train, DocMode, DocSource, EarlyStopping, EpochRecord,
    StopDecision, TrainConfig, TrainOutcome,
};
