pub mod error;
pub mod flow;
pub mod forms;
pub mod geodesic;
pub mod grassmann;
pub mod instances;
pub mod linalg;
#[cfg(test)]
mod properties;

pub use error::{Error, Result};
