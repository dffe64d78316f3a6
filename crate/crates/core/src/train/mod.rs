//! Loss, optimizer, schedule, checkpoints and the training loop.

pub mod adam;
pub mod checkpoint;
pub mod fit;
pub mod loss;
pub mod schedule;

pub use adam::{adam_step, OptimState};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint};
pub use fit::{evaluate, fit, loss_weights, EpochLog, Evaluation, FitOutcome};
pub use loss::{hybrid_loss, hybrid_loss_batch, LossTerms, LossWeights};
pub use schedule::Schedule;
