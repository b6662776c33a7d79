//! Moment-matrix nonclassicality criteria for single-mode bosonic states,
//! their multicopy observables and the linear-optics circuits that measure them.

pub mod boson_algebra;
pub mod circuits;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod minors;
pub mod moments;
pub mod repro;
pub mod multicopy;
pub mod states;

pub use error::{Error, Result};
