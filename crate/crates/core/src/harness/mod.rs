//! Model builders, configuration, the verification suite, result caching
//! and the command-line interface.

pub mod builders;
pub mod cache;
pub mod cli;
pub mod config;
pub mod verify;

pub use builders::{build_named_model, NamedBuilder, RhoSpec};
pub use config::ExperimentConfig;
pub use verify::{verify_model, Check, VerifyReport};
