//! Simulation and analysis of impulsive semiflows.

pub mod catalog;
pub mod chains;
pub mod connect;
pub mod error;
pub mod flow;
pub mod impulse;
pub mod linalg;
pub mod periodic;
pub mod scenario;
pub mod sections;
pub mod semiflow;

pub use error::{Error, Result};
