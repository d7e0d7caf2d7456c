//! Losses, AdamW, the training loop and few-shot adaptation.

mod adamw;
mod config;
mod loss;
mod trainer;

pub use adamw::{AdamW, AdamWConfig};
pub use config::{ActionLossMode, Reduction, TrainConfig};
pub use loss::{action_loss, batch_loss, slu_loss, total_loss, BatchLoss, LossOptions};
pub use trainer::{adapt, fit, train, AdaptOutcome, EpochRecord, History, TrainOutcome};
