//! Detector histories: sampling from a DEM, exact distributions for small N,
//! reference DEM families, and shot file formats.

mod distribution;
mod generators;
mod shots_io;

pub use distribution::{
    exact_distribution, exact_distribution_capped, Distribution, DEFAULT_DENSE_CAP,
};
pub use generators::{make_random_sparse_dem, make_uniform_depolarizing_dem, RandomDemSpec};
pub use shots_io::{
    read_shots, read_shots_binary, read_shots_text, write_shots_binary, write_shots_text,
    SHOT_MAGIC, SHOT_VERSION,
};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dem::Dem;
use crate::error::{Error, Result};
use crate::mask::{n_words, EventMask};
use crate::rng;

/// `K` shots of `N` detector bits, stored row-major with each shot packed into
/// `ceil(N / 64)` words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DetectorHistories {
    n_detectors: usize,
    n_shots: usize,
    words: Vec<u64>,
}

impl DetectorHistories {
    pub fn zeros(n_detectors: usize, n_shots: usize) -> Self {
        Self {
            n_detectors,
            n_shots,
            words: vec![0; n_words(n_detectors) * n_shots],
        }
    }

    pub fn from_masks(n_detectors: usize, shots: &[EventMask]) -> Result<Self> {
        let mut out = Self::zeros(n_detectors, shots.len());
        let w = out.words_per_shot();
        for (i, s) in shots.iter().enumerate() {
            if s.n_detectors() != n_detectors {
                return Err(Error::Dimension {
                    expected: n_detectors,
                    found: s.n_detectors(),
                });
            }
            out.words[i * w..(i + 1) * w].copy_from_slice(s.words());
        }
        Ok(out)
    }

    /// Parses shots from strings such as `"0110"`.
    pub fn from_strings(shots: &[&str]) -> Result<Self> {
        let masks = shots
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<EventMask>>>()?;
        let n = masks.first().map(|m| m.n_detectors()).unwrap_or(0);
        Self::from_masks(n, &masks)
    }

    pub fn n_detectors(&self) -> usize {
        self.n_detectors
    }

    pub fn n_shots(&self) -> usize {
        self.n_shots
    }

    pub fn words_per_shot(&self) -> usize {
        n_words(self.n_detectors)
    }

    pub fn shot_words(&self, shot: usize) -> &[u64] {
        let w = self.words_per_shot();
        &self.words[shot * w..(shot + 1) * w]
    }

    pub fn shot(&self, shot: usize) -> EventMask {
        EventMask::from_words(self.n_detectors, self.shot_words(shot))
    }

    pub fn get(&self, shot: usize, detector: usize) -> bool {
        (self.shot_words(shot)[detector / 64] >> (detector % 64)) & 1 == 1
    }

    pub(crate) fn raw_words(&self) -> &[u64] {
        &self.words
    }

    /// Rows picked by `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let w = self.words_per_shot();
        let mut words = Vec::with_capacity(indices.len() * w);
        for &i in indices {
            words.extend_from_slice(self.shot_words(i));
        }
        Self {
            n_detectors: self.n_detectors,
            n_shots: indices.len(),
            words,
        }
    }
}

/// Per-event Bernoulli draws grouped for skip-ahead sampling. Events in a
/// bucket share a proposal probability `q >= p`; geometric gaps locate
/// proposals and each proposal is accepted with probability `p / q`.
struct SamplingPlan {
    buckets: Vec<Bucket>,
    n_events: usize,
}

struct Bucket {
    ln_miss: f64,
    proposal: f64,
    events: Vec<(usize, f64)>,
}

impl SamplingPlan {
    fn new(dem: &Dem) -> Self {
        use std::collections::BTreeMap;
        let mut by_octave: BTreeMap<i32, Vec<(usize, f64)>> = BTreeMap::new();
        for (i, ev) in dem.events().iter().enumerate() {
            let p = ev.probability;
            if p <= 0.0 {
                continue;
            }
            // Probabilities above 1/8 get a bucket of their own.
            let key = if p > 0.125 {
                i32::MAX - i as i32
            } else {
                p.log2().floor() as i32
            };
            by_octave.entry(key).or_default().push((i, p));
        }
        let buckets = by_octave
            .into_values()
            .map(|evs| {
                let proposal = evs.iter().map(|e| e.1).fold(0.0, f64::max);
                Bucket {
                    ln_miss: (-proposal).ln_1p(),
                    proposal,
                    events: evs.into_iter().map(|(i, p)| (i, p / proposal)).collect(),
                }
            })
            .collect();
        Self {
            buckets,
            n_events: dem.len(),
        }
    }

    /// Calls `hit` with the index of every event that occurs in this shot.
    fn for_each_occurrence(&self, rng: &mut ChaCha8Rng, mut hit: impl FnMut(usize)) {
        for b in &self.buckets {
            let gap = |rng: &mut ChaCha8Rng| -> usize {
                if b.proposal >= 1.0 {
                    return 0;
                }
                let u: f64 = 1.0 - rng.random::<f64>();
                let g = u.ln() / b.ln_miss;
                if g >= b.events.len() as f64 {
                    usize::MAX
                } else {
                    g as usize
                }
            };
            let mut pos = gap(rng);
            while pos < b.events.len() {
                let (idx, ratio) = b.events[pos];
                if ratio >= 1.0 || rng.random::<f64>() < ratio {
                    hit(idx);
                }
                pos = pos.saturating_add(1).saturating_add(gap(rng));
            }
        }
    }
}

/// Which events occur in shot `shot` of `sample_histories(dem, _, seed)`.
///
/// This is the event-occurrence vector `q`; the shot equals `E q (mod 2)`
/// where column `j` of `E` is event `j`'s mask.
pub fn event_occurrences(dem: &Dem, seed: u64, shot: u64) -> Vec<bool> {
    let plan = SamplingPlan::new(dem);
    let mut q = vec![false; plan.n_events];
    let mut rng = rng::stream(&rng::stream_key(seed), shot);
    plan.for_each_occurrence(&mut rng, |i| q[i] = true);
    q
}

const SHOTS_PER_TASK: usize = 4096;

/// Samples `n_shots` detector histories. Each shot starts all-zero and XORs in
/// every event that fires; output depends only on `(dem, n_shots, seed)`.
pub fn sample_histories(dem: &Dem, n_shots: usize, seed: u64) -> DetectorHistories {
    let mut out = DetectorHistories::zeros(dem.n_detectors(), n_shots);
    let w = out.words_per_shot();
    if w == 0 || n_shots == 0 {
        return out;
    }
    let plan = SamplingPlan::new(dem);
    let key = rng::stream_key(seed);
    let events = dem.events();
    out.words
        .par_chunks_mut(w * SHOTS_PER_TASK)
        .enumerate()
        .for_each(|(chunk, rows)| {
            for (r, row) in rows.chunks_mut(w).enumerate() {
                let shot = (chunk * SHOTS_PER_TASK + r) as u64;
                let mut rng = rng::stream(&key, shot);
                plan.for_each_occurrence(&mut rng, |i| {
                    for (x, m) in row.iter_mut().zip(events[i].mask.words()) {
                        *x ^= m;
                    }
                });
            }
        });
    out
}

/// The binary `N x L` matrix whose column `j` is event `j`'s mask.
#[derive(Clone, Debug)]
pub struct EventMatrix {
    n_events: usize,
    /// Row `i`: which events flip detector `i`, packed by event index.
    rows: Vec<Vec<u64>>,
}

impl EventMatrix {
    pub fn from_dem(dem: &Dem) -> Self {
        let n_events = dem.len();
        let mut rows = vec![vec![0u64; n_words(n_events)]; dem.n_detectors()];
        for (j, ev) in dem.events().iter().enumerate() {
            for i in ev.mask.ones() {
                rows[i][j / 64] |= 1 << (j % 64);
            }
        }
        Self { n_events, rows }
    }

    /// `E q (mod 2)`.
    pub fn multiply(&self, q: &[bool]) -> Result<EventMask> {
        if q.len() != self.n_events {
            return Err(Error::Dimension {
                expected: self.n_events,
                found: q.len(),
            });
        }
        let mut packed = vec![0u64; n_words(self.n_events)];
        for (j, &b) in q.iter().enumerate() {
            if b {
                packed[j / 64] |= 1 << (j % 64);
            }
        }
        let mut x = EventMask::zeros(self.rows.len());
        for (i, row) in self.rows.iter().enumerate() {
            let ones: u32 = row
                .iter()
                .zip(&packed)
                .map(|(a, b)| (a & b).count_ones())
                .sum();
            x.set(i, ones % 2 == 1);
        }
        Ok(x)
    }
}
