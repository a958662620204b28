mod error;
pub mod agents;
pub mod dataset;
pub mod editor;
pub mod embedding;
pub mod evaluation;
pub mod indicator;
pub(crate) mod io;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod synthetic;
pub mod transport;

pub use error::{Error, Result};
