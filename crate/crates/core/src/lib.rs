pub mod cone;
pub mod discrimination;
pub mod ensembles;
pub mod error;
mod formulation;
pub mod operator;
pub mod solver;
pub mod tolerances;

pub use error::{Error, Result};
