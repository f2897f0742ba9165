pub mod block;
pub mod classifier;
pub mod detector;
pub mod error;
pub mod eval;
pub mod fixture;
pub mod loss;
pub mod network;
pub mod ops;
pub mod pipeline;
pub mod record;
pub mod selfcheck;
pub mod tensor;
pub mod train;
pub mod weights;

pub use error::{Error, Result};
pub use tensor::Tensor;
