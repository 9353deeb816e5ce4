//! Pretraining, frozen-encoder adaptation, and hyperparameter search.

mod adam;
mod adapt;
mod checkpoint;
mod config;
mod grid;
mod loss;
mod predictor;
mod pretrain;

pub use adam::{adam_step, Adam};
pub use adapt::{
    accuracy, adapt, adapt_on_states, adapt_with, evaluate, train_predictor, AdaptConfig, Adapted,
    DepthReport, FittedPredictor, Split,
};
pub use checkpoint::{
    load_predictor, save_predictor, Checkpoint, TrainingMeta, CHECKPOINT_MAGIC, FORMAT_VERSION,
    PREDICTOR_MAGIC,
};
pub use config::TrainConfig;
pub use grid::{grid_search, GridEntry, GridOutcome, GridSpace};
pub use loss::cross_entropy;
pub use predictor::{argmax, PredictorCache, PredictorKind, PredictorParams};
pub use pretrain::{pretrain, pretrain_with_hook, EpochRecord, PretrainRun};
