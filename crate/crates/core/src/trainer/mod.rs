//! Minimax training loops, checkpoints and metrics.

mod baselines;
pub mod checkpoint;
mod config;
mod lwgan;
mod metrics;

pub use baselines::{
    fit_critic, median_pairwise_distance, mmd, mmd_bandwidth, mmd_var, train_wae, train_wgan,
};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::{ConvergenceMonitor, TrainConfig};
pub use lwgan::{train_lwgan, LwganTrainer, TrainOutcome};
pub use metrics::{IterRecord, TrainHistory, METRICS_HEADER};
