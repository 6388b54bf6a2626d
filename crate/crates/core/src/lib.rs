pub mod constraint;
pub mod data;
pub mod error;
pub mod experiment;
pub mod image;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod objectives;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use model::{ConditionalGenerator, Discriminator, Generator};
pub use scalar::Scalar;

pub type Generator32 = Generator<f32>;
pub type Generator64 = Generator<f64>;
pub type Discriminator32 = Discriminator<f32>;
pub type Discriminator64 = Discriminator<f64>;
pub type TrainState32 = train::TrainState<f32>;
pub type TrainState64 = train::TrainState<f64>;
pub type ImageTensor32 = image::ImageTensor<f32>;
pub type ImageTensor64 = image::ImageTensor<f64>;
pub type ConstraintMap32 = constraint::ConstraintMap<f32>;
pub type ConstraintMap64 = constraint::ConstraintMap<f64>;
