//! Sample polarizations, depolarizations, their error bars and covariances,
//! bootstrap resampling, and significance tests.

use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mask::EventMask;
use crate::sampling::DetectorHistories;

/// Default z-score for "statistically distinguishable from zero".
pub const DEFAULT_Z_THRESHOLD: f64 = 5.0;

/// A scalar estimate with its standard error. Divergent estimates carry an
/// infinite error and are never significant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateWithError {
    pub value: f64,
    pub std_error: f64,
    pub divergent: bool,
}

impl EstimateWithError {
    pub fn new(value: f64, std_error: f64) -> Self {
        Self {
            value,
            std_error: std_error.max(0.0),
            divergent: false,
        }
    }

    pub fn exact(value: f64) -> Self {
        Self::new(value, 0.0)
    }

    pub fn divergent(value: f64) -> Self {
        Self {
            value,
            std_error: f64::INFINITY,
            divergent: true,
        }
    }

    /// `|value| / std_error`, infinite for an exact nonzero value.
    pub fn z_score(&self) -> f64 {
        if self.divergent {
            return 0.0;
        }
        self.value.abs() / self.std_error
    }
}

impl fmt::Display for EstimateWithError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.divergent {
            write!(f, "{:.6} (divergent)", self.value)
        } else {
            write!(f, "{:.6} ± {:.6}", self.value, self.std_error)
        }
    }
}

/// Polarizations at or below this value are treated as indistinguishable from
/// zero: three standard errors of a zero-mean parity over `n_shots` shots.
pub fn divergence_floor(n_shots: u64) -> f64 {
    3.0 / (n_shots as f64).sqrt()
}

/// Standard error of a sample polarization: `sqrt(1 - z^2) / sqrt(K)`.
pub fn polarization_std_error(z: f64, n_shots: u64) -> f64 {
    (1.0 - z * z).max(0.0).sqrt() / (n_shots as f64).sqrt()
}

/// Sample polarization `(1/K) sum_i (-1)^(x_i . y)`.
pub fn sample_polarization(data: &DetectorHistories, y: &EventMask) -> Result<EstimateWithError> {
    if y.n_detectors() != data.n_detectors() {
        return Err(Error::Dimension {
            expected: data.n_detectors(),
            found: y.n_detectors(),
        });
    }
    let k = data.n_shots();
    if k == 0 {
        return Err(Error::EmptyData);
    }
    if y.is_zero() {
        return Ok(EstimateWithError::exact(1.0));
    }
    let odd: u64 = (0..k)
        .into_par_iter()
        .map(|i| {
            let ones: u32 = data
                .shot_words(i)
                .iter()
                .zip(y.words())
                .map(|(a, b)| (a & b).count_ones())
                .sum();
            (ones & 1) as u64
        })
        .sum();
    let z = 1.0 - 2.0 * odd as f64 / k as f64;
    Ok(EstimateWithError::new(
        z,
        polarization_std_error(z, k as u64),
    ))
}

/// Depolarization `omega = -ln z` with error `sigma_z / z`.
///
/// Flagged divergent when `z <= floor`, when `z <= 0`, or when the propagated
/// error reaches 1 (at which point `z` could plausibly be zero).
pub fn depolarization(z: EstimateWithError, floor: f64) -> EstimateWithError {
    if z.divergent || z.value <= 0.0 || z.value <= floor {
        let v = if z.value > 0.0 {
            -z.value.ln()
        } else {
            f64::INFINITY
        };
        return EstimateWithError::divergent(v);
    }
    let omega = -z.value.ln();
    let sigma = z.std_error / z.value;
    if sigma >= 1.0 {
        return EstimateWithError::divergent(omega);
    }
    EstimateWithError::new(omega, sigma)
}

/// Covariance matrix of sample polarizations:
/// `cov(z_y, z_y') = <z_(y xor y')> - <z_y><z_y'>`.
pub fn polarization_covariance(data: &DetectorHistories, ys: &[EventMask]) -> Result<DMatrix<f64>> {
    if data.n_shots() == 0 {
        return Err(Error::EmptyData);
    }
    let means = ys
        .iter()
        .map(|y| sample_polarization(data, y).map(|e| e.value))
        .collect::<Result<Vec<_>>>()?;
    let n = ys.len();
    let mut cov = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let joint = sample_polarization(data, &ys[i].xor(&ys[j])?)?.value;
            let c = joint - means[i] * means[j];
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
    }
    Ok(cov)
}

/// Standard deviation of `statistic` over `n_resamples` with-replacement
/// resamples of the shots. Deterministic given `seed`.
pub fn bootstrap_std_error<F>(
    data: &DetectorHistories,
    statistic: F,
    n_resamples: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(&DetectorHistories) -> f64 + Sync,
{
    if n_resamples < 2 {
        return Err(Error::Argument(
            "bootstrap needs at least 2 resamples".into(),
        ));
    }
    let k = data.n_shots();
    if k == 0 {
        return Err(Error::EmptyData);
    }
    let key = crate::rng::stream_key(seed);
    let values: Vec<f64> = (0..n_resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = crate::rng::stream(&key, b as u64);
            let picks: Vec<usize> = (0..k).map(|_| rng.random_range(0..k)).collect();
            statistic(&data.select(&picks))
        })
        .collect();
    Ok(sample_std(&values))
}

pub(crate) fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1.0)).sqrt()
}

/// How estimators attach standard errors to nonlinear statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorModel {
    /// Shot-level bootstrap with `resamples` draws, deterministic in `seed`.
    Bootstrap { resamples: usize, seed: u64 },
    /// First-order propagation of the polarization covariance.
    Delta,
}

/// True iff `est` is not divergent and `value > z_threshold * std_error`.
pub fn is_significant(est: &EstimateWithError, z_threshold: f64) -> bool {
    !est.divergent && est.value > z_threshold * est.std_error
}
