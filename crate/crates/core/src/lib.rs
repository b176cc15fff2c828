pub mod aiet;
pub mod analysis;
pub mod combinat;
pub mod error;
pub mod iet;
pub mod num;
pub mod renorm;
pub mod spectral;

pub use error::{Error, Result};
