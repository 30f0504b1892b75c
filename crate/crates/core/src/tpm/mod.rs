//! Neural point process: intensity heads on a hierarchical LSTM, category
//! and space heads, joint likelihood training and teacher-forced
//! prediction, plus a squared-error regression baseline.

mod checkpoint;
mod heads;
mod infer;
mod model;
mod regression;
mod train;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, LoadedModel, ModelKind, CHECKPOINT_FORMAT, CHECKPOINT_VERSION,
};
pub use heads::{
    category_log_likelihood, gaussian_log_density, intensity_a, intensity_b, log_softmax, predict_category,
    predict_location, predict_time, softmax, space_log_likelihood, time_log_likelihood, CategoryHead,
    IntensityHeadA, IntensityHeadB, SpaceHead, TimeDistribution, TimeHead,
};
pub use infer::{trapezoid, DensityGrid, PredictionRecord};
pub use model::{HeadKind, Normalization, Objective, TpmConfig, TpmModel, TransitionTerms};
pub use regression::{train_regression_baseline, RegressionConfig, RegressionModel, MIN_INTERVAL};
pub use train::{train, EpochRecord, TrainConfig, TrainingLog};

use crate::neural::NeuralError;

#[derive(Debug, thiserror::Error)]
pub enum TpmError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no transitions to train on")]
    EmptyData,
    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },
    #[error("time {t} precedes the conditioning event at {last}")]
    BeforeLastEvent { t: f64, last: f64 },
    #[error("class {class} out of range for {n} classes")]
    ClassOutOfRange { class: usize, n: usize },
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("i/o error: {0}")]
    Io(String),
}

#[cfg(test)]
mod tests;
