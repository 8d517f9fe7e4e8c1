//! Mean-field linear-quadratic control: Riccati solver, optimal feedback,
//! particle simulation and a partially observed variant.

pub mod cli;
pub mod config;
pub mod control;
pub mod error;
pub mod model;
mod ode;
pub mod partial_obs;
pub mod riccati;
pub mod simulate;
