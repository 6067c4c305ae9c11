//! Asymptotic densities on ℕ, linear relations, and finite-horizon
//! classification of distributional and Li-Yorke chaos for orbit pairs.

pub mod classify;
pub mod config;
pub mod density;
pub mod lattice;
pub mod linalg;
pub mod metric;
pub mod natset;
pub mod orbits;
pub mod relations;
pub mod sampling;
pub mod scenario;

/// Formats a float with 17 significant digits, as used in every CSV output.
pub fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}
