//! The learned static-to-dynamic map `d_t = f(I_t)`: a small convolutional
//! encoder-decoder with skip connections, trained with the rank loss or by
//! regressing precomputed targets.

mod adam;
mod checkpoint;
mod model;
mod train;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{
    load_checkpoint, load_checkpoint_for, save_checkpoint, BlockInfo, Checkpoint, CheckpointHeader, TrainState,
    CHECKPOINT_VERSION, MAGIC,
};
pub use model::{Cache, Model, ModelSpec};
pub use train::{
    all_centers, evaluate_ranking, model_accuracy, mse_and_grad, sample_centers, train, AccuracySummary,
    EpochMetrics, TrainConfig, TrainData, TrainMode, TrainOutcome,
};
