//! Soft-rank two-sample statistics built on entropic optimal transport, and a
//! knockoff generator trained with them.
//!
//! * [`halton`]: low-discrepancy reference grids on the unit cube.
//! * [`ot`]: exact and entropic transport onto a grid, hard and soft ranks.
//! * [`stats`]: energy distance, unbiased MMD, RE, sRE, sRMMD and the swap loss.
//! * [`decorrelation`]: the knockoff SDP target and correlation penalty.
//! * [`generator`]: the knockoff network, its loss, exact gradients and training.
//! * [`filter`]: LASSO statistics, the knockoff threshold and FDP/power.
//! * [`synth`]: synthetic feature distributions and linear responses.
//! * [`experiment`]: saturation sweeps and the end-to-end FDR benchmark.

pub mod decorrelation;
pub mod error;
pub mod experiment;
pub mod filter;
pub mod generator;
pub mod halton;
pub mod io;
pub mod ot;
pub mod rng;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};

/// An `n × d` sample matrix: rows are observations.
pub type DataMatrix = ndarray::Array2<f64>;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
