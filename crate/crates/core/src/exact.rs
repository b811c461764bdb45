//! Walsh-Hadamard machinery and exact inversion of polarizations into DEM
//! attenuations for small `N`.
//!
//! The pipeline is distribution -> polarizations (one transform) -> `-ln` ->
//! attenuations (a second transform). The logarithm between the two
//! transforms is what turns the multiplicative polarization structure into the
//! additive attenuation structure; skipping it gives the wrong answer.

use rayon::prelude::*;

use crate::dem::{attenuation_to_prob, Attenuation};
use crate::error::{Error, Result};
use crate::estimated::{EstimatedDem, EventEstimate};
use crate::mask::EventMask;
use crate::rng;
use crate::sampling::{DetectorHistories, Distribution, DEFAULT_DENSE_CAP};
use crate::stats::{divergence_floor, is_significant, sample_std, ErrorModel, EstimateWithError};

/// Unnormalized in-place butterfly: `v <- [(-1)^(y.s)] v`.
pub fn fwht_unnormalized(v: &mut [f64]) {
    let n = v.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in v.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

pub(crate) fn wht_i64(v: &mut [i64]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for block in v.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

fn log2_len(len: usize) -> Result<usize> {
    if !len.is_power_of_two() {
        return Err(Error::Argument(format!(
            "transform length {len} is not a power of two"
        )));
    }
    Ok(len.trailing_zeros() as usize)
}

/// Normalized Walsh-Hadamard transform `H v` with `H = 2^(-N/2) [(-1)^(y.s)]`.
/// `H` is symmetric and orthogonal, so `fwht(fwht(v)) = v`.
pub fn fwht(v: &[f64]) -> Result<Vec<f64>> {
    let n = log2_len(v.len())?;
    let mut out = v.to_vec();
    fwht_unnormalized(&mut out);
    let scale = (0.5f64).powf(n as f64 / 2.0);
    out.iter_mut().for_each(|x| *x *= scale);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectrumKind {
    Polarization,
    Depolarization,
    Attenuation,
}

/// `2^N` values indexed by mask-as-integer (bit `i` = detector `i`).
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumVector {
    n_detectors: usize,
    kind: SpectrumKind,
    entries: Vec<f64>,
}

impl SpectrumVector {
    pub fn new(kind: SpectrumKind, entries: Vec<f64>) -> Result<Self> {
        let n_detectors = log2_len(entries.len())?;
        let expect0 = if kind == SpectrumKind::Polarization {
            1.0
        } else {
            0.0
        };
        if (entries[0] - expect0).abs() > 1e-12 {
            return Err(Error::Argument(format!(
                "{kind:?} spectrum must have entry[0] = {expect0}, got {}",
                entries[0]
            )));
        }
        if kind != SpectrumKind::Polarization && entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!(
                "{kind:?} spectrum has non-finite entries"
            )));
        }
        Ok(Self {
            n_detectors,
            kind,
            entries,
        })
    }

    pub fn n_detectors(&self) -> usize {
        self.n_detectors
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, mask: &EventMask) -> Option<f64> {
        if mask.n_detectors() != self.n_detectors {
            return None;
        }
        mask.to_index().map(|i| self.entries[i])
    }

    fn expect(&self, kind: SpectrumKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Argument(format!(
                "expected a {kind:?} spectrum, got {:?}",
                self.kind
            )));
        }
        Ok(())
    }
}

/// `<z_y> = sum_x (-1)^(x.y) P(x)`.
pub fn polarizations_from_distribution(p: &Distribution) -> SpectrumVector {
    let mut z = p.weights().to_vec();
    fwht_unnormalized(&mut z);
    z[0] = 1.0;
    SpectrumVector {
        n_detectors: p.n_detectors(),
        kind: SpectrumKind::Polarization,
        entries: z,
    }
}

/// `omega_y = -ln <z_y>`. Nonpositive polarizations make the spectrum
/// undefined and are reported by parity.
pub fn depolarizations_from_polarizations(z: &SpectrumVector) -> Result<SpectrumVector> {
    z.expect(SpectrumKind::Polarization)?;
    let bad: Vec<usize> = (1..z.entries.len())
        .filter(|&y| z.entries[y] <= 0.0)
        .collect();
    if !bad.is_empty() {
        return Err(impossible(z.n_detectors, &bad));
    }
    let mut w: Vec<f64> = z.entries.iter().map(|&v| -v.ln()).collect();
    w[0] = 0.0;
    Ok(SpectrumVector {
        n_detectors: z.n_detectors,
        kind: SpectrumKind::Depolarization,
        entries: w,
    })
}

/// `a_s = -(2 / 2^N) sum_y (-1)^(y.s) omega_y`, with `a_0` projected out.
pub fn attenuations_from_depolarizations(omega: &SpectrumVector) -> Result<SpectrumVector> {
    omega.expect(SpectrumKind::Depolarization)?;
    if omega.entries[0].abs() > 1e-12 {
        return Err(Error::Argument(format!(
            "depolarization entry[0] must be 0, got {}",
            omega.entries[0]
        )));
    }
    Ok(SpectrumVector {
        n_detectors: omega.n_detectors,
        kind: SpectrumKind::Attenuation,
        entries: invert(&omega.entries),
    })
}

fn invert(omega: &[f64]) -> Vec<f64> {
    let mut a = omega.to_vec();
    a[0] = 0.0;
    fwht_unnormalized(&mut a);
    let scale = -2.0 / omega.len() as f64;
    a.iter_mut().for_each(|x| *x *= scale);
    a[0] = 0.0;
    a
}

/// `omega_y = sum_s (y.s) a_s = (sum_s a_s - [H a]_y) / 2` in unnormalized form.
pub fn depolarizations_from_attenuations(a: &SpectrumVector) -> Result<SpectrumVector> {
    a.expect(SpectrumKind::Attenuation)?;
    let total: f64 = a.entries[1..].iter().sum();
    let mut w = a.entries.clone();
    w[0] = 0.0;
    fwht_unnormalized(&mut w);
    w.iter_mut().for_each(|x| *x = (total - *x) / 2.0);
    w[0] = 0.0;
    Ok(SpectrumVector {
        n_detectors: a.n_detectors,
        kind: SpectrumKind::Depolarization,
        entries: w,
    })
}

/// `a_0 = 2 * mean_y omega_y` over all `2^N` parities, `y = 0` included.
pub fn total_attenuation_exact(omega: &SpectrumVector) -> Result<Attenuation> {
    omega.expect(SpectrumKind::Depolarization)?;
    let sum: f64 = omega.entries.iter().sum();
    Ok(Attenuation(2.0 * sum / omega.entries.len() as f64))
}

/// The attenuation spectrum of a known DEM.
pub fn attenuation_spectrum(dem: &crate::dem::Dem) -> Result<SpectrumVector> {
    let n = dem.n_detectors();
    if n > DEFAULT_DENSE_CAP {
        return Err(Error::Capacity {
            what: "attenuation spectrum",
            n,
            cap: DEFAULT_DENSE_CAP,
        });
    }
    let mut a = vec![0.0; 1 << n];
    for e in dem.events() {
        a[e.mask.to_index().expect("N is capped")] += e.attenuation()?.0;
    }
    SpectrumVector::new(SpectrumKind::Attenuation, a)
}

fn impossible(n: usize, parities: &[usize]) -> Error {
    Error::EstimationImpossible {
        parities: parities
            .iter()
            .map(|&y| EventMask::from_bits(n, y as u64).to_string())
            .collect(),
    }
}

/// Options for [`estimate_dem_exact`].
#[derive(Clone, Debug)]
pub struct ExactConfig {
    pub z_threshold: f64,
    pub error: ErrorModel,
    /// Largest `N` accepted.
    pub cap: usize,
}

impl Default for ExactConfig {
    fn default() -> Self {
        Self {
            z_threshold: crate::stats::DEFAULT_Z_THRESHOLD,
            error: ErrorModel::Bootstrap {
                resamples: 100,
                seed: 0,
            },
            cap: DEFAULT_DENSE_CAP,
        }
    }
}

/// Largest `N` for which the covariance-propagation error model is offered.
pub const DELTA_CAP: usize = 12;

fn histogram(data: &DetectorHistories) -> Vec<u64> {
    let n = data.n_detectors();
    let size = 1usize << n;
    let k = data.n_shots();
    let index = |i: usize| data.shot_words(i).first().copied().unwrap_or(0) as usize;
    if n <= 16 {
        let chunk = k.div_ceil(rayon::current_num_threads().max(1)).max(4096);
        (0..k)
            .into_par_iter()
            .with_min_len(chunk)
            .fold(
                || vec![0u64; size],
                |mut h, i| {
                    h[index(i)] += 1;
                    h
                },
            )
            .reduce(
                || vec![0u64; size],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    } else {
        let mut h = vec![0u64; size];
        (0..k).for_each(|i| h[index(i)] += 1);
        h
    }
}

fn polarizations_from_counts(counts: &[u64], total: u64) -> Vec<f64> {
    let mut signed: Vec<i64> = counts.iter().map(|&c| c as i64).collect();
    wht_i64(&mut signed);
    signed.iter().map(|&s| s as f64 / total as f64).collect()
}

/// Estimates the full DEM from shots: all `2^N` sample polarizations,
/// `-ln`, inversion, and a significance filter at `cfg.z_threshold`.
///
/// Fails with [`Error::EstimationImpossible`] if any depolarization is
/// divergent, since every attenuation depends on every depolarization.
pub fn estimate_dem_exact(data: &DetectorHistories, cfg: &ExactConfig) -> Result<EstimatedDem> {
    let n = data.n_detectors();
    if n > cfg.cap {
        return Err(Error::Capacity {
            what: "exact estimation (use the lattice method)",
            n,
            cap: cfg.cap,
        });
    }
    let k = data.n_shots() as u64;
    if k == 0 {
        return Err(Error::EmptyData);
    }
    let counts = histogram(data);
    let z = polarizations_from_counts(&counts, k);
    let floor = divergence_floor(k);
    let divergent: Vec<usize> = (1..z.len())
        .filter(|&y| {
            let sigma_omega = crate::stats::polarization_std_error(z[y], k) / z[y];
            z[y] <= floor || sigma_omega >= 1.0
        })
        .collect();
    if !divergent.is_empty() {
        return Err(impossible(n, &divergent));
    }
    let omega: Vec<f64> = z.iter().map(|&v| -v.ln()).collect();
    let a = invert(&omega);

    let std_errors = match cfg.error {
        ErrorModel::Bootstrap { resamples, seed } => bootstrap_errors(&counts, k, resamples, seed),
        ErrorModel::Delta => {
            if n > DELTA_CAP {
                return Err(Error::Capacity {
                    what: "covariance propagation",
                    n,
                    cap: DELTA_CAP,
                });
            }
            delta_errors(&z, k)
        }
    };

    let mut out = EstimatedDem::new(n);
    for s in 1..a.len() {
        let est = EstimateWithError::new(a[s], std_errors[s]);
        if is_significant(&est, cfg.z_threshold) {
            out.push(EventEstimate::new(EventMask::from_bits(n, s as u64), est));
        }
    }
    Ok(out)
}

fn bootstrap_errors(counts: &[u64], k: u64, resamples: usize, seed: u64) -> Vec<f64> {
    let marginal = crate::parity::Marginal::from_counts(Vec::new(), counts.to_vec());
    let key = rng::stream_key(seed);
    let draws: Vec<Vec<f64>> = (0..resamples)
        .into_par_iter()
        .filter_map(|b| {
            let mut r = rng::stream(&key, b as u64);
            let m = marginal.resample(&mut r)?;
            let z = m.polarizations();
            if z.iter().any(|&v| v <= 0.0) {
                return None;
            }
            let omega: Vec<f64> = z.iter().map(|&v| -v.ln()).collect();
            Some(invert(&omega))
        })
        .collect();
    let _ = k;
    (0..counts.len())
        .map(|s| sample_std(&draws.iter().map(|d| d[s]).collect::<Vec<_>>()))
        .collect()
}

/// First-order propagation of the full polarization covariance
/// `cov(z_y, z_y') = (z_(y xor y') - z_y z_y') / K` through `-ln` and the
/// inversion. With `h = 1/z` the double sum collapses to one transform of
/// `z_t (h * h)(t)`, where `*` is XOR-autocorrelation.
fn delta_errors(z: &[f64], k: u64) -> Vec<f64> {
    let len = z.len() as f64;
    let mut h: Vec<f64> = z.iter().map(|&v| 1.0 / v).collect();
    fwht_unnormalized(&mut h);
    h.iter_mut().for_each(|x| *x = *x * *x / len);
    fwht_unnormalized(&mut h);
    let mut q: Vec<f64> = z.iter().zip(&h).map(|(zt, ht)| zt * ht).collect();
    fwht_unnormalized(&mut q);
    let scale = 4.0 / (len * len * k as f64);
    q.iter().map(|&v| (v * scale).max(0.0).sqrt()).collect()
}

/// Per-event probabilities from an attenuation spectrum, dropping entries at
/// or below `min_attenuation`.
pub fn spectrum_to_events(
    a: &SpectrumVector,
    min_attenuation: f64,
) -> Result<Vec<(EventMask, f64)>> {
    a.expect(SpectrumKind::Attenuation)?;
    let mut out = Vec::new();
    for (s, &v) in a.entries.iter().enumerate().skip(1) {
        if v > min_attenuation {
            out.push((
                EventMask::from_bits(a.n_detectors, s as u64),
                attenuation_to_prob(Attenuation(v))?,
            ));
        }
    }
    Ok(out)
}
