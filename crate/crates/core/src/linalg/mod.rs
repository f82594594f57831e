pub mod dense;
pub mod lanczos;

pub use lanczos::{LanczosOptions, LinearOperator};
