//! Density reconstruction for dynamic radiography of axisymmetric implosions.
//!
//! The pipeline runs [`phantom`] series through the [`forward`] model,
//! inverts them with the inverse Abel transform, denoises the result with a
//! network trained in [`training`] and finishes with the mass + TV
//! [`refine`]ment. [`eval`] ties the stages together and owns the file formats.
//!
//! ```
//! use dyntomo::forward::{corrupt, direct_radiographs, reconstruct_series, BeamConfig, ScatterConfig};
//! use dyntomo::phantom::{generate_series, PhantomConfig};
//!
//! let clean = generate_series(&PhantomConfig::default(), 7).unwrap();
//! let beam = BeamConfig::default();
//! let rad = corrupt(&direct_radiographs(&clean, &beam), &beam, &ScatterConfig::default(), 1).unwrap();
//! let noisy = reconstruct_series(&rad, clean.grid, clean.norm_factor, 1e-6).unwrap();
//! assert_eq!(noisy.shape(), clean.shape());
//! ```

pub mod error;
pub mod eval;
pub mod forward;
pub mod nn;
pub mod phantom;
pub mod refine;
pub mod training;
pub mod wasserstein;

pub use error::{Error, Result};
pub use eval::{ExperimentManifest, Method, TensorContainer};
pub use forward::{BeamConfig, ScatterConfig};
pub use phantom::{DensityTimeSeries, GridSpec, PhantomConfig};
pub use refine::RefineConfig;
pub use training::{Checkpoint, TrainConfig};
