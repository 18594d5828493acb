pub mod analysis;
pub mod cli;
pub mod error;
pub mod haar;
pub mod matcore;
pub mod mesh;
pub mod noise;
pub mod shadow;

pub use error::{Error, Result};
