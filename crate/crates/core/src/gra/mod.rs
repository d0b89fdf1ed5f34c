//! The glaucoma risk assessment model: a diagnosis autoencoder and a
//! medication autoencoder feeding, together with demographics and
//! standardized measurements, a one-dimensional convolutional head.

mod autoencoder;
mod grid;
mod model;

pub use autoencoder::{autoencoder_specs, pretrain_autoencoder, Autoencoder, ReconstructionReport};
pub use grid::{
    best_per_k, grid_csv, heatmap, heatmap_csv, run_grid, GridResult, DEFAULT_FRACTIONS, DEFAULT_K_LIST, FINETUNE_LEARNING_RATE,
    GRID_CSV_HEADER,
};
pub use model::{
    cnn_specs, finetune, finetune_inputs, pretrain_gra, stratified_order, subsample, GraConfig, GraModel,
    PretrainReport, Validation, CNN_LAYERS,
};

#[cfg(test)]
mod tests;
