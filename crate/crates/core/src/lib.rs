pub mod error;
pub mod fock;
pub mod dynamics;
pub mod models;
pub mod wigner;
pub mod experiments;
pub mod config;
pub mod output;
pub mod plot;
pub mod cli;

pub use num_complex::Complex64 as C64;
pub use error::{ Error, Result };
