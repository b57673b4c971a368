pub mod error;
pub mod grid;
pub mod harness;
pub mod initial_data;
pub mod linear_system;
pub mod littlewood_paley;
pub mod rng;
pub mod solver;
pub mod transport;

pub use error::{Error, Result};
