mod binio;
pub mod cli;
pub mod data;
pub mod diffcore;
pub mod error;
pub mod eval;
pub mod exec;
pub mod gradsuite;
pub mod model;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use exec::Exec;
pub use tensor::Tensor;
