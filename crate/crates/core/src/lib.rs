//! Nullities of parametric Euclidean submanifolds.

pub mod analyzer;
pub mod bilinear;
pub mod catalog;
pub mod error;
pub mod extension;
pub mod fields;
pub mod geometry;
pub mod jets;
pub mod linalg;
pub mod series;
pub mod taylor;

pub use error::{Error, Result};
