//! Convolutional autoencoder: tensors, layers, training and model files.

mod adam;
mod convert;
mod file;
mod gradcheck;
mod layer;
mod model;
pub mod ops;
mod tensor;
mod train;

pub use adam::{adam_update, Adam, AdamState, Optimizer};
pub use convert::{images_to_tensor, tensor_to_images};
pub use file::{decode_net, encode_net, load_model, save_model, MAGIC, VERSION};
pub use gradcheck::{check_gradients, gradient_check, relative_error, BlockCheck, GradCheckOptions, GradCheckReport, KinkPolicy};
pub use layer::{Layer, LayerKind, LayerSpec, KERNEL};
pub use model::{architecture, AeModel, Gradients, Sequential, Tape, LEAKY_SLOPE};
pub use ops::{mse_loss, BatchStats, ConvGeometry, Mode};
pub use tensor::Tensor;
pub use train::{train_autoencoder, train_on_images, EpochRecord, TrainConfig, TrainingLog};
