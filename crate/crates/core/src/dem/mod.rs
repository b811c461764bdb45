//! Detector error models and the probability / attenuation algebra.
//!
//! An event with probability `p` damps every polarization it anticommutes with
//! by the decay factor `d = 1 - 2p`. Its attenuation `a = -ln d` is additive:
//! merging indistinguishable events sums their attenuations.

mod class;
mod text;

pub use class::{class_attenuation_true, EventClass};
pub use text::{parse_dem, write_dem, write_dem_annotated};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mask::{EventMask, IndexSet, MAX_DETECTORS};

/// Attenuation `a = -ln(1 - 2p)` of an event or class.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct Attenuation(pub f64);

/// Decay factor `d = 1 - 2p`, equal to `exp(-a)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct DecayFactor(pub f64);

impl Attenuation {
    pub fn decay_factor(self) -> DecayFactor {
        DecayFactor((-self.0).exp())
    }

    pub fn probability(self) -> Result<f64> {
        attenuation_to_prob(self)
    }
}

impl DecayFactor {
    pub fn attenuation(self) -> Attenuation {
        Attenuation(-self.0.ln())
    }
}

/// `p -> -ln(1 - 2p)`, defined for `0 <= p < 1/2`.
pub fn prob_to_attenuation(p: f64) -> Result<Attenuation> {
    if !(0.0..0.5).contains(&p) {
        return Err(Error::Domain(format!(
            "attenuation needs 0 <= p < 1/2, got {p}"
        )));
    }
    Ok(Attenuation(-(-2.0 * p).ln_1p()))
}

/// `a -> (1 - exp(-a)) / 2`, defined for `a >= 0`.
pub fn attenuation_to_prob(a: Attenuation) -> Result<f64> {
    if !(a.0 >= 0.0) {
        return Err(Error::Domain(format!(
            "attenuation must be >= 0, got {}",
            a.0
        )));
    }
    Ok(-(-a.0).exp_m1() / 2.0)
}

/// Probability of exactly one of two independent events occurring.
pub fn xor_combine(p_a: f64, p_b: f64) -> f64 {
    p_a * (1.0 - p_b) + (1.0 - p_a) * p_b
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemEvent {
    pub mask: EventMask,
    pub probability: f64,
}

impl DemEvent {
    pub fn attenuation(&self) -> Result<Attenuation> {
        prob_to_attenuation(self.probability)
    }
}

/// A list of independent events over `n_detectors` detectors with distinct masks.
#[derive(Clone, Debug, PartialEq)]
pub struct Dem {
    n_detectors: usize,
    events: Vec<DemEvent>,
}

impl Dem {
    pub fn empty(n_detectors: usize) -> Self {
        Self {
            n_detectors,
            events: Vec::new(),
        }
    }

    /// Builds a DEM, merging events with identical masks by exclusive addition
    /// (attenuations add). First-occurrence order is kept.
    pub fn new(n_detectors: usize, events: impl IntoIterator<Item = DemEvent>) -> Result<Self> {
        if n_detectors > MAX_DETECTORS {
            return Err(Error::Argument(format!(
                "at most {MAX_DETECTORS} detectors"
            )));
        }
        let mut out: Vec<DemEvent> = Vec::new();
        let mut seen: HashMap<EventMask, usize> = HashMap::new();
        for ev in events {
            if ev.mask.n_detectors() != n_detectors {
                return Err(Error::Dimension {
                    expected: n_detectors,
                    found: ev.mask.n_detectors(),
                });
            }
            if ev.mask.is_zero() {
                return Err(Error::Argument("event mask must not be all-zero".into()));
            }
            if !(0.0..=1.0).contains(&ev.probability) {
                return Err(Error::Domain(format!(
                    "event probability {} outside [0, 1]",
                    ev.probability
                )));
            }
            match seen.get(&ev.mask) {
                Some(&idx) => {
                    let merged = &mut out[idx].probability;
                    *merged = xor_combine(*merged, ev.probability);
                }
                None => {
                    seen.insert(ev.mask.clone(), out.len());
                    out.push(ev);
                }
            }
        }
        Ok(Self {
            n_detectors,
            events: out,
        })
    }

    /// Convenience constructor from `(mask string, probability)` pairs.
    pub fn from_pairs(pairs: &[(&str, f64)]) -> Result<Self> {
        let n = pairs.first().map(|(s, _)| s.len()).unwrap_or(0);
        let events = pairs
            .iter()
            .map(|(s, p)| {
                Ok(DemEvent {
                    mask: s.parse()?,
                    probability: *p,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, events)
    }

    /// Builds a DEM from `(mask, attenuation)` pairs.
    pub fn from_attenuations(
        n_detectors: usize,
        events: impl IntoIterator<Item = (EventMask, f64)>,
    ) -> Result<Self> {
        let events = events
            .into_iter()
            .map(|(mask, a)| {
                Ok(DemEvent {
                    mask,
                    probability: attenuation_to_prob(Attenuation(a))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n_detectors, events)
    }

    pub fn n_detectors(&self) -> usize {
        self.n_detectors
    }

    pub fn events(&self) -> &[DemEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn probability_of(&self, mask: &EventMask) -> Option<f64> {
        self.events
            .iter()
            .find(|e| &e.mask == mask)
            .map(|e| e.probability)
    }

    /// Attenuations of all events; fails if any probability is `>= 1/2`.
    pub fn attenuations(&self) -> Result<Vec<(EventMask, f64)>> {
        self.events
            .iter()
            .map(|e| Ok((e.mask.clone(), e.attenuation()?.0)))
            .collect()
    }

    pub fn total_attenuation(&self) -> Result<Attenuation> {
        Ok(Attenuation(
            self.attenuations()?.iter().map(|(_, a)| a).sum(),
        ))
    }

    /// Events sorted by mask.
    pub fn sorted(&self) -> Self {
        let mut events = self.events.clone();
        events.sort_by(|a, b| a.mask.cmp(&b.mask));
        Self {
            n_detectors: self.n_detectors,
            events,
        }
    }

    /// Drops events with probability exactly zero.
    pub fn without_zero_events(mut self) -> Self {
        self.events.retain(|e| e.probability > 0.0);
        self
    }
}

/// The DEM induced on `keep_indices`: masks are restricted, events that vanish
/// are dropped, and colliding events are merged by summing attenuations.
pub fn reduce_dem(dem: &Dem, keep_indices: &[usize]) -> Result<Dem> {
    let keep = validate_indices(keep_indices, dem.n_detectors())?;
    let mut merged: Vec<(EventMask, f64)> = Vec::new();
    let mut slot: HashMap<EventMask, usize> = HashMap::new();
    for ev in dem.events() {
        let a = ev.attenuation()?.0;
        let reduced = ev.mask.restrict(&keep);
        if reduced.is_zero() {
            continue;
        }
        match slot.get(&reduced) {
            Some(&i) => merged[i].1 += a,
            None => {
                slot.insert(reduced.clone(), merged.len());
                merged.push((reduced, a));
            }
        }
    }
    Dem::from_attenuations(keep.len(), merged)
}

pub(crate) fn validate_indices(indices: &[usize], n_detectors: usize) -> Result<IndexSet> {
    if indices.is_empty() {
        return Err(Error::Argument("index list must not be empty".into()));
    }
    if indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument(format!(
            "indices must be strictly increasing: {indices:?}"
        )));
    }
    if let Some(&last) = indices.last() {
        if last >= n_detectors {
            return Err(Error::Argument(format!(
                "index {last} out of range for {n_detectors} detectors"
            )));
        }
    }
    Ok(indices.to_vec())
}
