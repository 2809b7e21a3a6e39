//! Differentiable generator and critic networks.

pub mod blocks;
pub mod discriminator;
pub mod generator;
pub mod layers;
pub mod params;
pub mod scalar;
pub mod tensor;

pub use discriminator::{default_conv_blocks, ConvBlockSpec, Discriminator, DiscriminatorConfig};
pub use generator::{Generator, GeneratorConfig};
pub use params::{ParamStore, ParamTensor};
pub use scalar::{Dual, Scalar};
pub use tensor::Volume;
