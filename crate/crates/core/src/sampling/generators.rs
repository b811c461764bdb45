//! Reference DEM families used as fixtures and benchmarks.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DEFAULT_DENSE_CAP;
use crate::dem::{Dem, DemEvent};
use crate::error::{Error, Result};
use crate::mask::EventMask;

/// Every nonzero `N`-bit event with probability `epsilon / 2^N`. The all-zero
/// event is unobservable and omitted; `epsilon = 0` yields an empty DEM.
pub fn make_uniform_depolarizing_dem(n_detectors: usize, epsilon: f64) -> Result<Dem> {
    if n_detectors == 0 || n_detectors > DEFAULT_DENSE_CAP {
        return Err(Error::Capacity {
            what: "uniformly depolarizing DEM",
            n: n_detectors,
            cap: DEFAULT_DENSE_CAP,
        });
    }
    let half = (1u64 << (n_detectors - 1)) as f64;
    if !(0.0..half).contains(&epsilon) {
        return Err(Error::Domain(format!(
            "epsilon must lie in [0, 2^(N-1)) = [0, {half}), got {epsilon}"
        )));
    }
    if epsilon == 0.0 {
        return Ok(Dem::empty(n_detectors));
    }
    let p = epsilon / (2.0 * half);
    let events = (1u64..1 << n_detectors).map(|s| DemEvent {
        mask: EventMask::from_bits(n_detectors, s),
        probability: p,
    });
    Dem::new(n_detectors, events)
}

/// Parameters for [`make_random_sparse_dem`].
#[derive(Clone, Debug)]
pub struct RandomDemSpec {
    pub n_detectors: usize,
    pub n_events: usize,
    pub max_weight: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub seed: u64,
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `n_events` distinct masks drawn uniformly from all masks of weight
/// `1..=max_weight`, with probabilities uniform in `[p_min, p_max]`.
pub fn make_random_sparse_dem(spec: &RandomDemSpec) -> Result<Dem> {
    let n = spec.n_detectors;
    if spec.max_weight == 0 || spec.max_weight > n {
        return Err(Error::Argument(format!(
            "max_weight must lie in 1..={n}, got {}",
            spec.max_weight
        )));
    }
    if !(spec.p_min > 0.0 && spec.p_min <= spec.p_max && spec.p_max < 0.5) {
        return Err(Error::Argument(format!(
            "need 0 < p_min <= p_max < 1/2, got [{}, {}]",
            spec.p_min, spec.p_max
        )));
    }
    let weight_counts: Vec<f64> = (1..=spec.max_weight).map(|w| binomial(n, w)).collect();
    let total: f64 = weight_counts.iter().sum();
    if spec.n_events as f64 > total {
        return Err(Error::Argument(format!(
            "cannot draw {} distinct masks from {total} candidates",
            spec.n_events
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut seen = HashSet::new();
    let mut events = Vec::with_capacity(spec.n_events);
    if spec.n_events as f64 > total / 2.0 {
        // Dense regime: enumerate all candidates and pick a subset.
        let mut all = Vec::new();
        for w in 1..=spec.max_weight {
            for c in crate::mask::combinations(n, w) {
                all.push(c);
            }
        }
        for i in sample(&mut rng, all.len(), spec.n_events) {
            let p = rng.random_range(spec.p_min..=spec.p_max);
            events.push(DemEvent {
                mask: EventMask::from_indices(n, &all[i])?,
                probability: p,
            });
        }
        return Dem::new(n, events);
    }
    while events.len() < spec.n_events {
        let mut r = rng.random::<f64>() * total;
        let mut w = spec.max_weight;
        for (i, c) in weight_counts.iter().enumerate() {
            if r < *c {
                w = i + 1;
                break;
            }
            r -= c;
        }
        let mut idx = sample(&mut rng, n, w).into_vec();
        idx.sort_unstable();
        let mask = EventMask::from_indices(n, &idx)?;
        if seen.insert(mask.clone()) {
            let p = rng.random_range(spec.p_min..=spec.p_max);
            events.push(DemEvent {
                mask,
                probability: p,
            });
        }
    }
    Dem::new(n, events)
}
