pub mod error;
pub mod interp;
pub mod transform;
pub mod kinetic;
pub mod field_solver;
pub mod horizon;
pub mod coupling;
pub mod diagnostics;
pub mod config;
pub mod run;
pub mod cli;
