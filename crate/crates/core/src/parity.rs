//! Sources of parity statistics.
//!
//! Estimators are written against [`ParityStatistics`], which is implemented
//! both by sampled shots ([`ShotData`]) and by a known DEM ([`ExactModel`]).
//! The second makes every estimator checkable against exact polarizations.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand_distr::{Binomial, Distribution as _};
use rayon::prelude::*;

use crate::dem::{validate_indices, Dem};
use crate::error::{Error, Result};
use crate::mask::EventMask;
use crate::rng;
use crate::sampling::DetectorHistories;
use crate::stats::{divergence_floor, polarization_std_error, sample_std, EstimateWithError};

/// Largest marginal materialized as a dense `2^k` table.
pub const MAX_MARGINAL_BITS: usize = 24;

pub trait ParityStatistics: Sync {
    fn n_detectors(&self) -> usize;

    /// Number of shots, or `None` when polarizations are exact.
    fn n_shots(&self) -> Option<u64>;

    /// Polarization `<z_y>`.
    fn polarization(&self, y: &EventMask) -> f64;

    /// Joint statistics of the detectors in `indices` (at most 24 of them).
    fn marginal(&self, indices: &[usize]) -> Result<Marginal>;

    /// Odd-parity counts of `y` in `n_batches` contiguous blocks of shots, as
    /// `(odd, shots)` pairs. `None` for exact sources.
    fn parity_batches(&self, y: &EventMask, n_batches: usize) -> Option<Vec<(u64, u64)>>;

    /// Sparse histogram of shots restricted to `indices` (at most 64), keyed by
    /// the restricted pattern. `None` for exact sources.
    fn pattern_counts(&self, indices: &[usize]) -> Option<BTreeMap<u64, u64>>;

    /// Smallest standard error reported by estimators on this source.
    fn std_error_floor(&self) -> f64 {
        0.0
    }

    /// Polarizations at or below this are treated as zero.
    fn divergence_floor(&self) -> f64 {
        self.n_shots().map(divergence_floor).unwrap_or(0.0)
    }

    fn polarization_estimate(&self, y: &EventMask) -> EstimateWithError {
        let z = self.polarization(y);
        match self.n_shots() {
            Some(k) => EstimateWithError::new(z, polarization_std_error(z, k)),
            None => EstimateWithError::new(z, self.std_error_floor()),
        }
    }

    /// Depolarization `-ln <z_y>` with divergence flagging.
    fn depolarization_estimate(&self, y: &EventMask) -> EstimateWithError {
        if y.is_zero() {
            return EstimateWithError::exact(0.0);
        }
        crate::stats::depolarization(self.polarization_estimate(y), self.divergence_floor())
    }
}

/// Shots transposed to detector-major bit columns, so that the parity of any
/// mask over all shots is an XOR of columns followed by a popcount.
#[derive(Clone, Debug)]
pub struct ShotData {
    n_detectors: usize,
    n_shots: usize,
    n_words: usize,
    /// Word `w` of detector `d`'s column lives at `blocks[w * n_detectors + d]`.
    blocks: Vec<u64>,
}

impl ShotData {
    pub fn new(histories: &DetectorHistories) -> Result<Self> {
        let n = histories.n_detectors();
        let k = histories.n_shots();
        if k == 0 {
            return Err(Error::EmptyData);
        }
        let n_words = k.div_ceil(64);
        let mut blocks = vec![0u64; n_words * n];
        let wps = histories.words_per_shot();
        let raw = histories.raw_words();
        if n > 0 {
            blocks.par_chunks_mut(n).enumerate().for_each(|(w, block)| {
                let first = w * 64;
                let last = (first + 64).min(k);
                for (b, shot) in (first..last).enumerate() {
                    for (wi, &word) in raw[shot * wps..(shot + 1) * wps].iter().enumerate() {
                        let mut rest = word;
                        while rest != 0 {
                            let d = wi * 64 + rest.trailing_zeros() as usize;
                            rest &= rest - 1;
                            block[d] |= 1 << b;
                        }
                    }
                }
            });
        }
        Ok(Self {
            n_detectors: n,
            n_shots: k,
            n_words,
            blocks,
        })
    }

    pub fn n_shots_usize(&self) -> usize {
        self.n_shots
    }

    fn valid_bits(&self, w: usize) -> u64 {
        let rem = self.n_shots - w * 64;
        if rem >= 64 {
            u64::MAX
        } else {
            (1u64 << rem) - 1
        }
    }

    fn parity_word(&self, w: usize, detectors: &[usize]) -> u64 {
        let block = &self.blocks[w * self.n_detectors..(w + 1) * self.n_detectors];
        detectors.iter().fold(0, |acc, &d| acc ^ block[d])
    }

    /// Number of shots with odd parity on `y`.
    pub fn odd_count(&self, y: &EventMask) -> u64 {
        let det: Vec<usize> = y.ones().collect();
        if det.is_empty() {
            return 0;
        }
        (0..self.n_words)
            .into_par_iter()
            .map(|w| self.parity_word(w, &det).count_ones() as u64)
            .sum()
    }

    /// Counts of every distinct restricted pattern, where bit `j` of a
    /// pattern is detector `indices[j]`.
    fn collect_patterns(&self, indices: &[usize]) -> BTreeMap<u64, u64> {
        debug_assert!(indices.len() <= 64);
        let n = self.n_detectors;
        (0..self.n_words)
            .into_par_iter()
            .fold(HashMap::new, |mut acc: HashMap<u64, u64>, w| {
                let block = &self.blocks[w * n..(w + 1) * n];
                let valid = self.valid_bits(w);
                let any = indices.iter().fold(0, |a, &d| a | block[d]) & valid;
                let zeros = (valid & !any).count_ones() as u64;
                if zeros > 0 {
                    *acc.entry(0).or_default() += zeros;
                }
                let mut rest = any;
                while rest != 0 {
                    let b = rest.trailing_zeros();
                    rest &= rest - 1;
                    let mut pattern = 0u64;
                    for (j, &d) in indices.iter().enumerate() {
                        pattern |= ((block[d] >> b) & 1) << j;
                    }
                    *acc.entry(pattern).or_default() += 1;
                }
                acc
            })
            .reduce(HashMap::new, |mut a, b| {
                for (k, v) in b {
                    *a.entry(k).or_default() += v;
                }
                a
            })
            .into_iter()
            .collect()
    }
}

/// Up to this many detectors, marginals are built from all `2^k` parity
/// words of each block rather than from a pattern histogram.
const SMALL_MARGINAL_BITS: usize = 8;
const PSEUDO_COUNT: f64 = 1.0;
const MAX_PSEUDO_COUNT_BITS: usize = 16;

impl ShotData {
    fn small_marginal(&self, indices: &[usize]) -> Marginal {
        let k = indices.len();
        let size = 1usize << k;
        let n = self.n_detectors;
        let odd = (0..self.n_words)
            .into_par_iter()
            .fold(
                || (vec![0u64; size], vec![0u64; size]),
                |(mut odd, mut words), w| {
                    let block = &self.blocks[w * n..(w + 1) * n];
                    for u in 1..size {
                        let low = u.trailing_zeros() as usize;
                        words[u] = words[u & (u - 1)] ^ block[indices[low]];
                        odd[u] += words[u].count_ones() as u64;
                    }
                    (odd, words)
                },
            )
            .map(|(odd, _)| odd)
            .reduce(
                || vec![0u64; size],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            );
        let total = self.n_shots as i64;
        let mut signed: Vec<i64> = odd.iter().map(|&o| total - 2 * o as i64).collect();
        signed[0] = total;
        crate::exact::wht_i64(&mut signed);
        let counts = signed.iter().map(|&c| (c >> k) as u64).collect();
        Marginal::from_counts(indices.to_vec(), counts)
    }
}

impl ParityStatistics for ShotData {
    fn n_detectors(&self) -> usize {
        self.n_detectors
    }

    fn n_shots(&self) -> Option<u64> {
        Some(self.n_shots as u64)
    }

    fn polarization(&self, y: &EventMask) -> f64 {
        1.0 - 2.0 * self.odd_count(y) as f64 / self.n_shots as f64
    }

    fn marginal(&self, indices: &[usize]) -> Result<Marginal> {
        check_marginal(indices, self.n_detectors)?;
        if indices.len() <= SMALL_MARGINAL_BITS {
            return Ok(self.small_marginal(indices));
        }
        let mut counts = vec![0u64; 1 << indices.len()];
        for (pattern, c) in self.collect_patterns(indices) {
            counts[pattern as usize] += c;
        }
        Ok(Marginal::from_counts(indices.to_vec(), counts))
    }

    fn parity_batches(&self, y: &EventMask, n_batches: usize) -> Option<Vec<(u64, u64)>> {
        let det: Vec<usize> = y.ones().collect();
        let n_batches = n_batches.clamp(1, self.n_words);
        let out = (0..n_batches)
            .into_par_iter()
            .map(|g| {
                let lo = g * self.n_words / n_batches;
                let hi = (g + 1) * self.n_words / n_batches;
                let mut odd = 0u64;
                let mut shots = 0u64;
                for w in lo..hi {
                    odd += (self.parity_word(w, &det) & self.valid_bits(w)).count_ones() as u64;
                    shots += self.valid_bits(w).count_ones() as u64;
                }
                (odd, shots)
            })
            .collect();
        Some(out)
    }

    fn pattern_counts(&self, indices: &[usize]) -> Option<BTreeMap<u64, u64>> {
        (indices.len() <= 64).then(|| self.collect_patterns(indices))
    }
}

/// Exact polarizations of a known DEM: `<z_y> = prod_s (1 - 2 p_s)^(y . s)`.
#[derive(Clone, Debug)]
pub struct ExactModel {
    dem: Dem,
    tolerance: f64,
}

impl ExactModel {
    /// Numerical tolerance reported as the standard error of exact estimates.
    pub const DEFAULT_TOLERANCE: f64 = 1e-12;

    pub fn new(dem: Dem) -> Self {
        Self {
            dem,
            tolerance: Self::DEFAULT_TOLERANCE,
        }
    }

    pub fn with_tolerance(dem: Dem, tolerance: f64) -> Self {
        Self { dem, tolerance }
    }

    pub fn dem(&self) -> &Dem {
        &self.dem
    }
}

impl ParityStatistics for ExactModel {
    fn n_detectors(&self) -> usize {
        self.dem.n_detectors()
    }

    fn n_shots(&self) -> Option<u64> {
        None
    }

    fn polarization(&self, y: &EventMask) -> f64 {
        self.dem
            .events()
            .iter()
            .filter(|e| y.dot_unchecked(&e.mask))
            .map(|e| 1.0 - 2.0 * e.probability)
            .product()
    }

    fn marginal(&self, indices: &[usize]) -> Result<Marginal> {
        check_marginal(indices, self.n_detectors())?;
        let k = indices.len();
        // Restrict every event once; a k-bit parity u sees event s iff u . s|idx = 1.
        let restricted: Vec<(u64, f64)> = self
            .dem
            .events()
            .iter()
            .map(|e| {
                let r = e.mask.restrict(indices);
                (
                    r.words().first().copied().unwrap_or(0),
                    1.0 - 2.0 * e.probability,
                )
            })
            .filter(|(r, _)| *r != 0)
            .collect();
        let polarizations: Vec<f64> = (0..1u64 << k)
            .into_par_iter()
            .map(|u| {
                restricted
                    .iter()
                    .filter(|(r, _)| (r & u).count_ones() & 1 == 1)
                    .map(|(_, d)| d)
                    .product()
            })
            .collect();
        Ok(Marginal {
            indices: indices.to_vec(),
            polarizations,
            counts: None,
            n_shots: None,
        })
    }

    fn parity_batches(&self, _: &EventMask, _: usize) -> Option<Vec<(u64, u64)>> {
        None
    }

    fn pattern_counts(&self, _: &[usize]) -> Option<BTreeMap<u64, u64>> {
        None
    }

    fn std_error_floor(&self) -> f64 {
        self.tolerance
    }
}

fn check_marginal(indices: &[usize], n: usize) -> Result<()> {
    validate_indices(indices, n)?;
    if indices.len() > MAX_MARGINAL_BITS {
        return Err(Error::Capacity {
            what: "marginal",
            n: indices.len(),
            cap: MAX_MARGINAL_BITS,
        });
    }
    Ok(())
}

/// All `2^k` polarizations on a set of `k` detectors. Parity `u` (a `k`-bit
/// integer, bit `j` = `indices[j]`) has polarization `polarizations[u]`.
#[derive(Clone, Debug)]
pub struct Marginal {
    indices: Vec<usize>,
    polarizations: Vec<f64>,
    counts: Option<Vec<u64>>,
    n_shots: Option<u64>,
}

impl Marginal {
    /// From a histogram of restricted shot patterns.
    pub fn from_counts(indices: Vec<usize>, counts: Vec<u64>) -> Self {
        let total: u64 = counts.iter().sum();
        let mut signed: Vec<i64> = counts.iter().map(|&c| c as i64).collect();
        crate::exact::wht_i64(&mut signed);
        let polarizations = signed.iter().map(|&s| s as f64 / total as f64).collect();
        Self {
            indices,
            polarizations,
            counts: Some(counts),
            n_shots: Some(total),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn k(&self) -> usize {
        self.indices.len()
    }

    pub fn polarizations(&self) -> &[f64] {
        &self.polarizations
    }

    pub fn counts(&self) -> Option<&[u64]> {
        self.counts.as_deref()
    }

    pub fn n_shots(&self) -> Option<u64> {
        self.n_shots
    }

    /// A multinomial resample of the shot histogram; equivalent to resampling
    /// shots with replacement and recomputing the histogram.
    pub fn resample(&self, rng: &mut impl Rng) -> Option<Self> {
        let counts = self.counts.as_ref()?;
        let total = self.n_shots?;
        let mut left = total;
        let mut mass_left = total;
        let mut out = vec![0u64; counts.len()];
        for (o, &c) in out.iter_mut().zip(counts) {
            if left == 0 || c == 0 {
                mass_left -= c;
                continue;
            }
            let draw = if c == mass_left {
                left
            } else {
                Binomial::new(left, c as f64 / mass_left as f64)
                    .unwrap()
                    .sample(rng)
            };
            *o = draw;
            left -= draw;
            mass_left -= c;
        }
        Some(Self::from_counts(self.indices.clone(), out))
    }

    /// Bootstrap standard error of `statistic`; zero for exact marginals.
    /// Resamples where the statistic is undefined are skipped.
    pub fn bootstrap_std_error(
        &self,
        statistic: impl Fn(&Marginal) -> Option<f64> + Sync,
        n_resamples: usize,
        seed: u64,
    ) -> f64 {
        if self.counts.is_none() {
            return 0.0;
        }
        let key = rng::stream_key(seed);
        let values: Vec<f64> = (0..n_resamples)
            .into_par_iter()
            .filter_map(|b| {
                let mut r = rng::stream(&key, b as u64);
                self.resample(&mut r).and_then(|m| statistic(&m))
            })
            .filter(|v| v.is_finite())
            .collect();
        sample_std(&values)
    }

    /// Delta-method variance of `sum_u c_u omega_u`, using
    /// `cov(z_u, z_v) = z_(u xor v) - z_u z_v` over the marginal.
    pub fn delta_variance(&self, terms: &[(usize, f64)]) -> f64 {
        let Some(k) = self.n_shots else {
            return 0.0;
        };
        let z = &self.polarizations;
        let mut var = 0.0;
        for &(u, cu) in terms {
            for &(v, cv) in terms {
                let cov = z[u ^ v] - z[u] * z[v];
                var += cu * cv * cov / (z[u] * z[v]);
            }
        }
        (var / k as f64).max(0.0)
    }
}

/// A linear combination of depolarizations `sum_y c_y omega_y` over full masks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearForm {
    terms: BTreeMap<EventMask, f64>,
}

impl LinearForm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, y: EventMask, coefficient: f64) {
        if y.is_zero() {
            return;
        }
        let c = self.terms.entry(y).or_default();
        *c += coefficient;
    }

    pub fn add_scaled(&mut self, other: &LinearForm, scale: f64) {
        for (y, c) in &other.terms {
            self.add(y.clone(), c * scale);
        }
        self.terms.retain(|_, c| c.abs() > 1e-15);
    }

    pub fn terms(&self) -> impl Iterator<Item = (&EventMask, f64)> {
        self.terms.iter().map(|(y, c)| (y, *c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Detectors touched by any term, sorted.
    pub fn support(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.terms.keys().flat_map(|y| y.ones()).collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    /// Evaluates the form with a delta-method standard error. Divergent if any
    /// term's polarization is at or below the source's divergence floor.
    pub fn evaluate(&self, source: &impl ParityStatistics) -> EstimateWithError {
        let floor = source.divergence_floor();
        let support = self.support();
        let patterns = if support.is_empty() {
            None
        } else {
            source.pattern_counts(&support)
        };
        let Some(patterns) = patterns else {
            // Exact source, or too wide for a pattern histogram: value only.
            let mut value = 0.0;
            let mut var = 0.0;
            for (y, c) in self.terms() {
                let w = source.depolarization_estimate(y);
                if w.divergent {
                    return EstimateWithError::divergent(value);
                }
                value += c * w.value;
                var += (c * w.std_error).powi(2);
            }
            let se = if source.n_shots().is_some() {
                var.sqrt()
            } else {
                source.std_error_floor()
            };
            return EstimateWithError::new(value, se.max(source.std_error_floor()));
        };
        let total: u64 = patterns.values().sum();
        let kf = total as f64;
        let restricted: Vec<(u64, f64)> = self
            .terms()
            .map(|(y, c)| (y.restrict(&support).words()[0], c))
            .collect();
        let sign = |u: u64, x: u64| {
            if (u & x).count_ones() & 1 == 0 {
                1.0
            } else {
                -1.0
            }
        };
        let mut zs = Vec::with_capacity(restricted.len());
        for &(u, _) in &restricted {
            let s: f64 = patterns.iter().map(|(&x, &n)| sign(u, x) * n as f64).sum();
            zs.push(s / kf);
        }
        let mut value = 0.0;
        let mut divergent = false;
        for (&(_, c), &z) in restricted.iter().zip(&zs) {
            if z <= floor {
                divergent = true;
            }
            value += c * -z.max(f64::MIN_POSITIVE).ln();
        }
        if divergent {
            return EstimateWithError::divergent(value);
        }
        // Influence of each shot pattern on the linearized estimator. Every
        // pattern cell gets one pseudo-count, so that residuals driven by rare
        // coincidences do not get error bars shrunk by an unlucky draw.
        let influence = |x: u64| -> f64 {
            restricted
                .iter()
                .zip(&zs)
                .map(|(&(u, c), &z)| c / z * sign(u, x))
                .sum()
        };
        let mut weight = 0.0;
        let mut mean = 0.0;
        let mut second = 0.0;
        let mut add = |n: f64, g: f64| {
            weight += n;
            mean += n * g;
            second += n * g * g;
        };
        if support.len() <= MAX_PSEUDO_COUNT_BITS {
            for x in 0..1u64 << support.len() {
                let n = patterns.get(&x).copied().unwrap_or(0) as f64 + PSEUDO_COUNT;
                add(n, influence(x));
            }
        } else {
            for (&x, &n) in &patterns {
                add(n as f64, influence(x));
            }
        }
        mean /= weight;
        second /= weight;
        let var = ((second - mean * mean) / kf).max(0.0);
        let noise: f64 = 64.0
            * f64::EPSILON
            * restricted
                .iter()
                .zip(&zs)
                .map(|(&(_, c), &z)| (c * z.ln()).abs())
                .sum::<f64>();
        EstimateWithError::new(value, var.sqrt().max(noise).max(source.std_error_floor()))
    }
}
