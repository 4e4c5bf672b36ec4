//! Two-step Darwin time-domain field solver on a structured staggered
//! hexahedral grid, with a full-Maxwell frequency-domain reference.

pub mod cli;
pub mod eqs;
pub mod error;
pub mod fields;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod materials;
pub mod mqs;
pub mod orchestrator;
pub mod reference;
pub mod scenarios;
pub mod study;

pub use error::{Error, Result};
