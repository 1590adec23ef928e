pub mod aggregation;
pub mod data;
pub mod error;
pub mod experiment;
pub mod loss;
pub mod network;
pub mod opinion;
pub mod oversample;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
