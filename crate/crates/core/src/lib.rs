//! Finite-element simulation of Cahn-Hilliard phase separation coupled with
//! complete damage and quasi-static linear elasticity in two dimensions.

pub mod admissible;
pub mod cahn_hilliard;
pub mod elasticity;
pub mod cli;
pub mod config;
pub mod damage;
pub mod error;
pub mod grid;
pub mod ledger;
pub mod io;
pub mod linalg;
pub mod material;
pub mod rng;
pub mod stepper;
pub mod tensor;

pub use error::{Error, Result};
