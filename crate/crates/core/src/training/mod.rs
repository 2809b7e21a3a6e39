//! Mass functional, losses, the lambda schedule and the WGAN-Sup loop.

mod adam;
mod loss;
mod mass;
mod train;

pub use adam::Adam;
pub use loss::{d_loss, g_loss, DLoss, GLoss, GLossWeights};
pub use mass::{mass_of, mass_of_frame, mass_weights, masses_flat};
pub use train::{
    denoise_with, lambda_schedule, train, train_with, Checkpoint, SeriesPair, StepRecord, TrainConfig, TrainHistory,
};
