pub mod cli;
pub mod error;
pub mod linfty;
pub mod normingset;
pub mod norms;
pub mod rational;
pub mod report;
pub mod sampling;
pub mod schreier;
pub mod sequences;

pub use error::{Error, Result};
