//! MLP quality regressor trained with a composite MAE + rank loss.

mod checkpoint;
mod loss;
mod mlp;
mod optim;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointHeader};
pub use loss::{composite_grad, composite_loss, mae_loss, rank_loss, LossWeights};
pub use mlp::{
    gelu, gelu_grad, predict, predict_batch, ForwardCache, InputNorm, MlpModel, Mode, Params,
    RunningStats, BN_EPS, BN_MOMENTUM,
};
pub use optim::{cosine_lr, swa_start_epoch, Sgd, SwaAverage};
pub use train::{split_indices, select_rows, train, EpochLog, Selected, TrainConfig, TrainLog, TrainOutcome};
