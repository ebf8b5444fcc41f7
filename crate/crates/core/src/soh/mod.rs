//! Sequence-to-sequence SOH regression: LSTM model, optimizer, plateau
//! schedule, training loop, linear baseline and error metrics.

mod adam;
mod linreg;
mod metrics;
mod model;
mod schedule;
mod train;

pub use adam::{Adam, AdamConfig};
pub use linreg::LinearBaseline;
pub use metrics::{rmse, rmspe};
pub use model::{selu, ForwardCache, ModelConfig, SohModel, TensorInfo, SELU_ALPHA, SELU_SCALE};
pub use schedule::PlateauScheduler;
pub use train::{
    STD_FLOOR, MAX_SOH,
    batch_mse, evaluate_mse, train, EpochRecord, Normalizer, SequenceSample, TrainConfig,
    TrainResult,
};
