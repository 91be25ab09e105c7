pub mod anharmonic;
pub mod cli;
pub mod constants;
pub mod crystal;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod phasenoise;
pub mod protocol;
pub mod spectrum;

pub use error::{Error, Result};
