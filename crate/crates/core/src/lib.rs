pub mod bloch_section;
pub mod bloch_solver;
pub mod direct;
pub mod effective;
pub mod error;
pub mod grushin;
pub mod lattice;
pub mod linalg;
pub mod magnetic;
pub mod spectra;
pub mod symbols;

pub use error::{Error, Result};
