pub mod analysis;
pub mod basemodel;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod label;
pub mod mapping;
pub mod nn;
pub mod selftest;
pub mod synth;

pub use error::{Error, Result};
