pub mod american;
pub mod analysis;
pub mod blackscholes;
pub mod cli;
pub mod error;
pub mod heat;
pub mod mesh;
pub mod quad;
pub mod symbol;
pub mod tridiag;

pub use error::{Error, Result};
