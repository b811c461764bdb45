//! Estimation of detector error models (DEMs) from syndrome data.
//!
//! A DEM is a list of independent events, each flipping a fixed set of
//! detectors with some probability. This crate samples detector histories from
//! a DEM, computes parity statistics of the histories, and inverts those
//! statistics back into event probabilities:
//!
//! - [`exact`] inverts all `2^N` polarizations for small `N`;
//! - [`aggregated`] estimates class attenuations, `p_ij` edge weights and
//!   Monte Carlo totals from low-weight parities;
//! - [`sparse`] recovers sparse DEMs at large `N` by lattice search.
//!
//! Estimators read their input through [`parity::ParityStatistics`], so the
//! same code runs on sampled shots and on exact polarizations of a known DEM.

pub mod aggregated;
pub mod cli;
pub mod dem;
pub mod error;
pub mod estimated;
pub mod exact;
pub mod mask;
pub mod parity;
mod rng;
pub mod sampling;
pub mod sparse;
pub mod stats;

pub use dem::{Attenuation, Dem, DemEvent, EventClass};
pub use error::{Error, Result};
pub use estimated::{EstimatedDem, EventEstimate};
pub use mask::EventMask;
pub use parity::{ExactModel, ParityStatistics, ShotData};
pub use sampling::DetectorHistories;
pub use stats::EstimateWithError;
