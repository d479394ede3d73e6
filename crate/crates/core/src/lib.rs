pub mod error;
pub mod exact;
pub mod real;

pub use error::{Error, Result};
pub use exact::Q;
pub use real::Real;
pub mod dequantize;
pub mod dynamics;
pub mod number;
pub mod tropical;

pub use number::Number;
pub mod cli;
pub mod interaction;
pub mod lattice;
pub mod mmm;
pub mod sweep;
