//! Kolmogorov-Arnold network (KAN) feature extractors for IMU-based human
//! activity recognition, a 1-D CNN baseline, and the experiment harness
//! around them.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the element type for the common cases.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod features;
pub mod kan;
pub mod models;
pub mod nn;
pub mod results;
pub mod scalar;
pub mod spline;
pub mod training;

pub use data::{Instance, Recording, SplitPlan};
pub use error::{Error, Result};
pub use features::{segment, ChannelWiseBlock, WindowBank, WindowedFrame};
pub use kan::{FilterShape, FilterSpec, KanFilter, KanLayer, KanLayerSpec};
pub use models::{enumerate_table1, Model, ModelConfig, Variant};
pub use nn::{Grads, Parameterized};
pub use scalar::Scalar;
pub use spline::{GridSpec, SplineGrid};
pub use training::{ExperimentResult, TrainConfig};

pub type SplineGridF64 = SplineGrid<f64>;
pub type SplineGridF32 = SplineGrid<f32>;
pub type KanLayerF64 = KanLayer<f64>;
pub type KanLayerF32 = KanLayer<f32>;
pub type KanFilterF64 = KanFilter<f64>;
pub type KanFilterF32 = KanFilter<f32>;
pub type ModelF64 = Model<f64>;
pub type ModelF32 = Model<f32>;
