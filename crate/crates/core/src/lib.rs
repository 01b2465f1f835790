//! Full counting statistics of energy transfer between an N-level quantum
//! system and a confined thermal reservoir, together with the finite
//! dimensional modular machinery (relative modular operators, standard
//! Liouvilleans, the Araki vector) used to express it.

pub mod asymptotics;
pub mod error;
pub mod fcs;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod modular;

pub use error::{Error, Result};
