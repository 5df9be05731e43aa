//! Dense and convolutional regressors with hand-written backpropagation.

mod adam;
mod file;
mod layers;
mod network;
mod train;

pub use adam::Adam;
pub use file::{ModelFile, Prediction, Provenance};
pub use layers::{cnn, dnn, LayerPlan, LayerSpec, ModelSpec, Shape, CONV_KERNEL, CONV_STRIDE, POOL_SIZE};
pub use network::{swish, swish_derivative, Network, GRADIENT_CHUNK};
pub use train::{train, LossHistory, TrainConfig, TrainMeta, TrainOutcome};
