pub mod analysis;
pub mod config;
pub mod discrete;
pub mod dynamics;
pub mod error;
pub mod experiments;
mod linalg;
pub mod objectives;
pub mod restart;
pub mod theory;

pub use error::{Error, Result};
