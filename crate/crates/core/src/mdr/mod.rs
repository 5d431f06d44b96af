//! Multi-level DR stacks and the downstream evaluation harness: a small
//! regressor over stacked channels and the agreement metrics.

mod metrics;
mod regressor;
mod stack;

pub use metrics::{icc_3_1, icc_3_1_matrix, mse, pcc, write_metrics, MetricsReport, TargetMetrics};
pub use regressor::{
    load_task_checkpoint, save_task_checkpoint, train_regressor, Regressor, RegressorConfig, RegressorSpec,
    TaskCheckpoint, TASK_MAGIC, TASK_VERSION,
};
pub use stack::{build_stack, check_levels, ChannelStats, DrBank, MdrStack};
