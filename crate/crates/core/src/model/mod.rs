//! Desk-scale segmentation model: frozen seeded encoder, trainable
//! imaginary-modality generators, U-Net decoder, focal-loss training and
//! tiled inference.

mod checkpoint;
mod config;
pub mod layers;
mod loss;
mod network;
mod tensor;
mod tiled;
mod train;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint};
pub use config::{format_modalities, parse_modalities, Modality, ModelConfig};
pub use loss::{focal_loss, focal_loss_with_grad, FocalParams};
pub use network::{
    tim_expand, DecoderGrads, FrozenEncoder, ParamGrads, TimGenerator, ToyModel, TrainableParams, UNetDecoder,
};
pub use tensor::FeatureMap;
pub use tiled::{predict_tiled, predict_tiled_rasters, stack_bands, tile_starts, tiled_logits};
pub use train::{train, EarlyStopping, Sample, StopDecision, TrainState};
