//! Deep convolutional sparse coding lab.
//!
//! Builds layered convolutional dictionaries with Rademacher sign masks,
//! samples stripe-sparse representations through the reverse pass, recovers
//! them with the layered hard-thresholding forward pass and compares the
//! outcome with closed-form recovery bounds.

pub mod bounds;
pub mod conv_dict;
pub mod error;
pub mod forward;
pub mod generator;
pub mod harness;
pub mod matrix;
pub mod measures;
pub mod seed;

pub use error::{Error, Result};
pub use matrix::Matrix;
