//! Aggregated class attenuations from low-weight parities, the pairwise
//! `p_ij` edge weights, and Monte Carlo estimators of single-event and total
//! attenuation.
//!
//! For a class fixing detectors `E` (size `k`) to values `v`,
//!
//! ```text
//! a_class = -(2 / 2^k) * sum_{u subset of E} (-1)^(u.v) * omega_u
//! ```
//!
//! which only needs the `2^k` polarizations supported on `E`.

use rand::Rng;
use rayon::prelude::*;

use crate::dem::EventClass;
use crate::error::{Error, Result};
use crate::exact::fwht_unnormalized;
use crate::mask::EventMask;
use crate::parity::{Marginal, ParityStatistics};
use crate::rng;
use crate::stats::{polarization_std_error, sample_std, ErrorModel, EstimateWithError};

/// Largest class (number of fixed detectors) accepted.
pub const MAX_CLASS_SIZE: usize = 20;

/// Resamples used by the default bootstrap error model.
pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 100;

/// Signed coefficients of the class formula, indexed by the parity `u` on the
/// fixed detectors (bit `j` = `indices[j]`).
pub(crate) fn class_coefficients(values: &[bool]) -> Vec<f64> {
    let k = values.len();
    let v = values
        .iter()
        .enumerate()
        .fold(0usize, |acc, (j, &b)| acc | (b as usize) << j);
    let scale = -2.0 / (1u64 << k) as f64;
    (0..1usize << k)
        .map(|u| {
            if (u & v).count_ones() % 2 == 0 {
                scale
            } else {
                -scale
            }
        })
        .collect()
}

fn class_value(z: &[f64], v: usize) -> Option<f64> {
    if z[1..].iter().any(|&x| x <= 0.0) {
        return None;
    }
    let mut omega: Vec<f64> = z.iter().map(|&x| -x.ln()).collect();
    omega[0] = 0.0;
    fwht_unnormalized(&mut omega);
    Some(-2.0 * omega[v] / z.len() as f64)
}

fn divergent_parities(m: &Marginal, floor: f64) -> bool {
    let z = m.polarizations();
    let k = m.n_shots();
    z[1..].iter().any(|&x| {
        let sigma = k.map(|k| polarization_std_error(x, k) / x).unwrap_or(0.0);
        x <= floor || sigma >= 1.0
    })
}

/// Class estimate with the default error model: a shot-level bootstrap with
/// 100 resamples, seeded from the class indices.
pub fn class_attenuation_estimate(
    source: &impl ParityStatistics,
    class: &EventClass,
) -> Result<EstimateWithError> {
    let seed = rng::derive_seed(0, class.fixed_indices());
    class_attenuation_estimate_with(
        source,
        class,
        ErrorModel::Bootstrap {
            resamples: DEFAULT_BOOTSTRAP_RESAMPLES,
            seed,
        },
    )
}

pub fn class_attenuation_estimate_with(
    source: &impl ParityStatistics,
    class: &EventClass,
    error: ErrorModel,
) -> Result<EstimateWithError> {
    if !class.is_estimable() {
        return Err(Error::UnsupportedClass);
    }
    class.check_range(source.n_detectors())?;
    if class.k() > MAX_CLASS_SIZE {
        return Err(Error::Capacity {
            what: "class estimate",
            n: class.k(),
            cap: MAX_CLASS_SIZE,
        });
    }
    let m = source.marginal(class.fixed_indices())?;
    estimate_from_marginal(
        &m,
        class.fixed_values(),
        source.divergence_floor(),
        source.std_error_floor(),
        error,
    )
}

pub(crate) fn estimate_from_marginal(
    m: &Marginal,
    values: &[bool],
    floor: f64,
    se_floor: f64,
    error: ErrorModel,
) -> Result<EstimateWithError> {
    let v = values
        .iter()
        .enumerate()
        .fold(0usize, |acc, (j, &b)| acc | (b as usize) << j);
    let z = m.polarizations();
    let Some(value) = class_value(z, v) else {
        return Ok(EstimateWithError::divergent(f64::NAN));
    };
    if divergent_parities(m, floor) {
        return Ok(EstimateWithError::divergent(value));
    }
    let se = match (m.counts(), error) {
        (None, _) => 0.0,
        (Some(_), ErrorModel::Bootstrap { resamples, seed }) => {
            m.bootstrap_std_error(|r| class_value(r.polarizations(), v), resamples, seed)
        }
        (Some(_), ErrorModel::Delta) => {
            let c = class_coefficients(values);
            let terms: Vec<(usize, f64)> = (1..c.len()).map(|u| (u, c[u])).collect();
            m.delta_variance(&terms).sqrt()
        }
    };
    Ok(EstimateWithError::new(value, se.max(se_floor)))
}

/// Probability of the class `{i, j} = [11]`, i.e. of all events that flip
/// both `i` and `j`:
///
/// ```text
/// p_ij = 1/2 - 1/2 * sqrt(<z_i><z_j> / <z_i z_j>)
/// ```
///
/// Divergent when `<z_i z_j> <= 0`, the radicand is not positive, or any of
/// the three polarizations is within the divergence floor. A radicand
/// above 1 (anticorrelated detectors) yields a negative `p`, returned as is.
/// The standard error is propagated from the polarization covariance.
pub fn pij(source: &impl ParityStatistics, i: usize, j: usize) -> Result<EstimateWithError> {
    pij_with(source, i, j, ErrorModel::Delta)
}

pub fn pij_with(
    source: &impl ParityStatistics,
    i: usize,
    j: usize,
    error: ErrorModel,
) -> Result<EstimateWithError> {
    if i == j {
        return Err(Error::Argument(format!(
            "p_ij needs two distinct detectors, got {i} twice"
        )));
    }
    let (i, j) = (i.min(j), i.max(j));
    let class = EventClass::new(vec![i, j], vec![true, true])?;
    class.check_range(source.n_detectors())?;
    let m = source.marginal(&[i, j])?;
    let z = m.polarizations();
    let radicand = z[1] * z[2] / z[3];
    if z[3] <= 0.0 || !(radicand > 0.0) {
        return Ok(EstimateWithError::divergent(f64::NAN));
    }
    let p = 0.5 - 0.5 * radicand.sqrt();
    let a = estimate_from_marginal(
        &m,
        &[true, true],
        source.divergence_floor(),
        source.std_error_floor(),
        error,
    )?;
    if a.divergent {
        return Ok(EstimateWithError::divergent(p));
    }
    // dp/da = e^-a / 2 = sqrt(radicand) / 2
    Ok(EstimateWithError::new(
        p,
        a.std_error * radicand.sqrt() / 2.0,
    ))
}

/// All pairwise `p_ij` and per-detector `p_i` (the probability of the class
/// `{i} = [1]`).
#[derive(Clone, Debug)]
pub struct PijMatrix {
    pub n_detectors: usize,
    pub singles: Vec<EstimateWithError>,
    /// `(i, j, p_ij)` for `i < j`.
    pub pairs: Vec<(usize, usize, EstimateWithError)>,
}

impl PijMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<&EstimateWithError> {
        let (i, j) = (i.min(j), i.max(j));
        self.pairs
            .iter()
            .find(|(a, b, _)| (*a, *b) == (i, j))
            .map(|(_, _, e)| e)
    }

    /// Replaces negative probabilities by zero.
    pub fn clamp(&mut self) {
        for e in self
            .singles
            .iter_mut()
            .chain(self.pairs.iter_mut().map(|(_, _, e)| e))
        {
            if e.value < 0.0 {
                e.value = 0.0;
            }
        }
    }
}

pub fn pij_matrix(source: &impl ParityStatistics) -> Result<PijMatrix> {
    pij_matrix_with(source, ErrorModel::Delta)
}

/// [`pij_matrix`] with a chosen error model for the pair estimates.
pub fn pij_matrix_with(source: &impl ParityStatistics, error: ErrorModel) -> Result<PijMatrix> {
    let n = source.n_detectors();
    let singles = (0..n)
        .into_par_iter()
        .map(|i| {
            let w = source.depolarization_estimate(&EventMask::from_indices(n, &[i])?);
            if w.divergent {
                return Ok(EstimateWithError::divergent(f64::NAN));
            }
            let p = -(-w.value).exp_m1() / 2.0;
            Ok(EstimateWithError::new(
                p,
                w.std_error * (-w.value).exp() / 2.0,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let pair_list: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let pairs = pair_list
        .into_par_iter()
        .map(|(i, j)| Ok((i, j, pij_with(source, i, j, error)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PijMatrix {
        n_detectors: n,
        singles,
        pairs,
    })
}

/// Options for the Monte Carlo estimators.
#[derive(Clone, Debug)]
pub struct McConfig {
    /// Number of random parities `R`.
    pub n_samples: usize,
    pub seed: u64,
    /// Enumerate all `2^N` parities instead of sampling (small `N` only).
    pub exhaustive: bool,
    /// Bootstrap resamples for the standard error.
    pub resamples: usize,
}

impl McConfig {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        Self {
            n_samples,
            seed,
            exhaustive: false,
            resamples: DEFAULT_BOOTSTRAP_RESAMPLES,
        }
    }

    pub fn exhaustive() -> Self {
        Self {
            n_samples: 0,
            seed: 0,
            exhaustive: true,
            resamples: DEFAULT_BOOTSTRAP_RESAMPLES,
        }
    }
}

/// A Monte Carlo estimate with the fraction of draws whose depolarization was
/// divergent. Divergent draws are left out of the mean; if more than 10% of
/// draws diverge the estimate as a whole is flagged divergent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub estimate: EstimateWithError,
    pub divergent_fraction: f64,
    pub n_draws: usize,
}

/// Fraction of divergent draws above which a Monte Carlo estimate is flagged.
pub const MAX_DIVERGENT_FRACTION: f64 = 0.1;

/// Shot batches used by the Monte Carlo bootstrap.
const MC_BATCHES: usize = 64;

fn draw_parities(n: usize, cfg: &McConfig) -> Result<Vec<EventMask>> {
    if cfg.exhaustive {
        if n > crate::sampling::DEFAULT_DENSE_CAP {
            return Err(Error::Capacity {
                what: "exhaustive parity enumeration",
                n,
                cap: crate::sampling::DEFAULT_DENSE_CAP,
            });
        }
        return Ok((0..1u64 << n).map(|y| EventMask::from_bits(n, y)).collect());
    }
    if cfg.n_samples == 0 {
        return Err(Error::Argument(
            "Monte Carlo needs at least one sample".into(),
        ));
    }
    let key = rng::stream_key(cfg.seed);
    Ok((0..cfg.n_samples)
        .map(|r| {
            let mut g = rng::stream(&key, r as u64);
            let mut y = EventMask::zeros(n);
            for i in 0..n {
                if g.random::<bool>() {
                    y.set(i, true);
                }
            }
            y
        })
        .collect())
}

/// `weight(y) * omega_y` averaged over parities `y`, with a joint bootstrap
/// over the parity draws and over blocks of shots.
fn mc_average(
    source: &impl ParityStatistics,
    cfg: &McConfig,
    weight: impl Fn(&EventMask) -> f64 + Sync,
) -> Result<McEstimate> {
    let n = source.n_detectors();
    let ys = draw_parities(n, cfg)?;
    struct Draw {
        weight: f64,
        omega: EstimateWithError,
        batches: Option<Vec<(u64, u64)>>,
    }
    let draws: Vec<Draw> = ys
        .par_iter()
        .map(|y| Draw {
            weight: weight(y),
            omega: source.depolarization_estimate(y),
            batches: if y.is_zero() {
                None
            } else {
                source.parity_batches(y, MC_BATCHES)
            },
        })
        .collect();
    let n_draws = draws.len();
    let n_div = draws.iter().filter(|d| d.omega.divergent).count();
    let divergent_fraction = n_div as f64 / n_draws as f64;
    let good: Vec<&Draw> = draws.iter().filter(|d| !d.omega.divergent).collect();
    if good.is_empty() {
        return Ok(McEstimate {
            estimate: EstimateWithError::divergent(f64::NAN),
            divergent_fraction,
            n_draws,
        });
    }
    let value = good.iter().map(|d| d.weight * d.omega.value).sum::<f64>() / good.len() as f64;
    if divergent_fraction > MAX_DIVERGENT_FRACTION {
        return Ok(McEstimate {
            estimate: EstimateWithError::divergent(value),
            divergent_fraction,
            n_draws,
        });
    }

    let n_batches = good
        .iter()
        .find_map(|d| d.batches.as_ref().map(|b| b.len()))
        .unwrap_or(0);
    let key = rng::stream_key(rng::derive_seed(cfg.seed, &[n_draws, 1]));
    let replicates: Vec<f64> = (0..cfg.resamples)
        .into_par_iter()
        .filter_map(|b| {
            let mut g = rng::stream(&key, b as u64);
            let mut mult = vec![0u64; n_batches];
            for _ in 0..n_batches {
                mult[g.random_range(0..n_batches)] += 1;
            }
            let omega_of = |d: &Draw| -> Option<f64> {
                match &d.batches {
                    None => Some(d.omega.value),
                    Some(batches) => {
                        let (odd, total) = batches
                            .iter()
                            .zip(&mult)
                            .fold((0u64, 0u64), |(o, t), (&(bo, bt), &m)| {
                                (o + m * bo, t + m * bt)
                            });
                        let z = 1.0 - 2.0 * odd as f64 / total as f64;
                        (z > 0.0).then(|| -z.ln())
                    }
                }
            };
            let mut sum = 0.0;
            let mut count = 0usize;
            let picks: Box<dyn Iterator<Item = usize>> = if cfg.exhaustive {
                Box::new(0..good.len())
            } else {
                Box::new(
                    (0..good.len())
                        .map(|_| g.random_range(0..good.len()))
                        .collect::<Vec<_>>()
                        .into_iter(),
                )
            };
            for i in picks {
                if let Some(w) = omega_of(good[i]) {
                    sum += good[i].weight * w;
                    count += 1;
                }
            }
            (count > 0).then(|| sum / count as f64)
        })
        .collect();
    let se = sample_std(&replicates).max(source.std_error_floor());
    Ok(McEstimate {
        estimate: EstimateWithError::new(value, se),
        divergent_fraction,
        n_draws,
    })
}

/// `a_s = 2 <(-1)^(y.s + 1) omega_y>_y` over uniformly random parities `y`,
/// the all-zero parity included.
pub fn mc_event_attenuation(
    source: &impl ParityStatistics,
    s: &EventMask,
    cfg: &McConfig,
) -> Result<McEstimate> {
    if s.n_detectors() != source.n_detectors() {
        return Err(Error::Dimension {
            expected: source.n_detectors(),
            found: s.n_detectors(),
        });
    }
    mc_average(source, cfg, |y| if y.dot_unchecked(s) { 2.0 } else { -2.0 })
}

/// Total attenuation `a_0 = 2 <omega_y>_y`: a random parity sees about half of
/// all events.
pub fn mc_total_attenuation(source: &impl ParityStatistics, cfg: &McConfig) -> Result<McEstimate> {
    mc_average(source, cfg, |_| 2.0)
}
