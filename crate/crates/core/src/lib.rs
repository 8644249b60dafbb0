pub mod circuit;
pub mod clifford;
pub mod dense;
pub mod error;
pub mod exec;
pub mod families;
pub mod gate;
pub mod learning;
pub mod noise;
pub mod pauli;
pub mod pec;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
