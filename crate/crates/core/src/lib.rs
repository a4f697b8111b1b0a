pub mod cost;
pub mod domain;
pub mod error;
pub mod io;
pub mod mining;
pub mod pipeline;
pub mod rng;
pub mod scheduler;
pub mod sim;

pub use error::{Error, Result};
