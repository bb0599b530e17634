//! Simulation and analysis of SDE systems driven by rapidly oscillating
//! functions of a diffusion, and of the Wiener-driven systems they converge to.
//!
//! * [`periodic`]: trigonometric polynomials, Gram matrices, PSD square roots.
//! * [`sde`]: Itô / Stratonovich systems, Euler–Maruyama and Heun, ensembles.
//! * [`systems`]: fast systems under amplitude, time and integrated-noise
//!   scaling, their limits, and the named presets.
//! * [`forms`]: the covariance bilinear forms (grid, series, Monte Carlo).
//! * [`lab`]: ε-ladders comparing fast ensembles with the limit.
//! * [`config`] / [`cli`]: the `fastosc` command line.

pub mod cli;
pub mod config;
pub mod forms;
pub mod lab;
pub mod periodic;
pub mod rng;
pub mod sde;
pub mod stats;
pub mod systems;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Periodic(#[from] periodic::PeriodicError),
    #[error(transparent)]
    Sde(#[from] sde::SdeError),
    #[error(transparent)]
    System(#[from] systems::SystemError),
    #[error(transparent)]
    Forms(#[from] forms::FormsError),
    #[error(transparent)]
    Lab(#[from] lab::LabError),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Runtime(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
