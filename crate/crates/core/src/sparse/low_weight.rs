//! Closed-form recovery of all events of weight at most `w_max`, assuming no
//! heavier events exist.
//!
//! For `|E| = w_max` the class `E*` holds only the event `E`, so
//! `a_E = a_{E*}`. Lighter sets subtract the already-known attenuations of
//! their supersets: `a_E = a_{E*} - sum_{F strictly contains E} a_F`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::class_form;
use crate::aggregated::{estimate_from_marginal, MAX_CLASS_SIZE};
use crate::error::{Error, Result};
use crate::mask::{combinations, IndexSet};
use crate::parity::{LinearForm, ParityStatistics};
use crate::stats::{ErrorModel, EstimateWithError};

/// Largest number of index sets enumerated.
pub const MAX_LOW_WEIGHT_SETS: usize = 1 << 20;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LowWeightMode {
    /// Top-down over cached class estimates.
    #[default]
    Cached,
    /// Recomputes every superset attenuation on demand, storing nothing.
    Recursive,
}

/// Strict supersets of `set` within `0..n` of size at most `max_size`.
fn supersets(set: &[usize], n: usize, max_size: usize) -> Vec<IndexSet> {
    let rest: Vec<usize> = (0..n).filter(|i| set.binary_search(i).is_err()).collect();
    let mut out = Vec::new();
    for extra in 1..=max_size.saturating_sub(set.len()) {
        for pick in combinations(rest.len(), extra) {
            let mut f: IndexSet = set
                .iter()
                .copied()
                .chain(pick.iter().map(|&j| rest[j]))
                .collect();
            f.sort_unstable();
            out.push(f);
        }
    }
    out
}

fn n_sets(n: usize, w_max: usize) -> usize {
    let mut total = 0usize;
    let mut c = 1usize;
    for w in 1..=w_max {
        c = c.saturating_mul(n + 1 - w) / w;
        total = total.saturating_add(c);
    }
    total
}

/// Attenuation of every index set of size `1..=w_max`. Entries depending on
/// a divergent class estimate are flagged divergent individually.
pub fn low_weight_attenuations(
    source: &impl ParityStatistics,
    w_max: usize,
    mode: LowWeightMode,
) -> Result<BTreeMap<IndexSet, EstimateWithError>> {
    let n = source.n_detectors();
    if w_max == 0 || w_max > n.min(MAX_CLASS_SIZE) {
        return Err(Error::Argument(format!(
            "w_max must lie in 1..={}, got {w_max}",
            n.min(MAX_CLASS_SIZE)
        )));
    }
    let total = n_sets(n, w_max);
    if total > MAX_LOW_WEIGHT_SETS {
        return Err(Error::Argument(format!(
            "{total} index sets of weight <= {w_max} exceed the limit of {MAX_LOW_WEIGHT_SETS}; use the lattice method"
        )));
    }
    let sets: Vec<IndexSet> = (1..=w_max).flat_map(|w| combinations(n, w)).collect();
    let class_of = |set: &IndexSet| -> Result<EstimateWithError> {
        let m = source.marginal(set)?;
        estimate_from_marginal(
            &m,
            &vec![true; set.len()],
            source.divergence_floor(),
            source.std_error_floor(),
            ErrorModel::Delta,
        )
    };
    let classes: BTreeMap<IndexSet, EstimateWithError> = sets
        .par_iter()
        .map(|s| Ok((s.clone(), class_of(s)?)))
        .collect::<Result<_>>()?;

    let values: BTreeMap<IndexSet, f64> = match mode {
        LowWeightMode::Cached => {
            let mut values: BTreeMap<IndexSet, f64> = BTreeMap::new();
            for w in (1..=w_max).rev() {
                let level: Vec<(IndexSet, f64)> = sets
                    .par_iter()
                    .filter(|s| s.len() == w)
                    .map(|s| {
                        let sub: f64 = supersets(s, n, w_max).iter().map(|f| values[f]).sum();
                        (s.clone(), classes[s].value - sub)
                    })
                    .collect();
                values.extend(level);
            }
            values
        }
        LowWeightMode::Recursive => {
            fn rec(
                set: &IndexSet,
                n: usize,
                w_max: usize,
                class_of: &(dyn Fn(&IndexSet) -> Result<EstimateWithError> + Sync),
            ) -> Result<f64> {
                let mut v = class_of(set)?.value;
                for f in supersets(set, n, w_max) {
                    v -= rec(&f, n, w_max, class_of)?;
                }
                Ok(v)
            }
            sets.par_iter()
                .map(|s| Ok((s.clone(), rec(s, n, w_max, &class_of)?)))
                .collect::<Result<_>>()?
        }
    };

    // The subtraction is the Moebius inversion
    // a_E = sum_{F contains E, |F| <= w_max} (-1)^(|F| - |E|) a_{F*},
    // which gives each entry's depolarization form for its error bar.
    let out = sets
        .par_iter()
        .map(|s| {
            let mut involved = supersets(s, n, w_max);
            involved.push(s.clone());
            if involved.iter().any(|f| classes[f].divergent) {
                return (s.clone(), EstimateWithError::divergent(values[s]));
            }
            let mut form = LinearForm::new();
            for f in &involved {
                let sign = if (f.len() - s.len()) % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                form.add_scaled(&class_form(n, f), sign);
            }
            let se = if involved.len() == 1 {
                classes[s].std_error
            } else {
                form.evaluate(source).std_error
            };
            (s.clone(), EstimateWithError::new(values[s], se))
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dem::{prob_to_attenuation, Dem};
    use crate::mask::EventMask;
    use crate::parity::{ExactModel, ShotData};
    use crate::sampling::{make_random_sparse_dem, sample_histories, RandomDemSpec};

    #[test]
    fn superset_enumeration() {
        let s = supersets(&[1], 4, 3);
        assert_eq!(s.len(), 3 + 3);
        assert!(s.contains(&vec![0, 1, 3]));
    }

    #[test]
    fn three_detector_example() {
        let dem = Dem::from_attenuations(
            3,
            [("110".parse().unwrap(), 0.2), ("100".parse().unwrap(), 0.3)],
        )
        .unwrap();
        let model = ExactModel::new(dem);
        for mode in [LowWeightMode::Cached, LowWeightMode::Recursive] {
            let a = low_weight_attenuations(&model, 2, mode).unwrap();
            let get = |s: &[usize]| a[&s.to_vec()].value;
            assert!((get(&[0, 1]) - 0.2).abs() < 1e-12);
            assert!(get(&[0, 2]).abs() < 1e-12);
            assert!(get(&[1, 2]).abs() < 1e-12);
            assert!((get(&[0]) - 0.3).abs() < 1e-12);
            assert!(get(&[1]).abs() < 1e-12);
            assert!(get(&[2]).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_dem_gives_zeros() {
        let a = low_weight_attenuations(&ExactModel::new(Dem::empty(4)), 2, LowWeightMode::Cached)
            .unwrap();
        assert_eq!(a.len(), 10);
        assert!(a.values().all(|e| e.value == 0.0));
    }

    #[test]
    fn planted_weight_two_dem() {
        let dem = make_random_sparse_dem(&RandomDemSpec {
            n_detectors: 10,
            n_events: 15,
            max_weight: 2,
            p_min: 0.01,
            p_max: 0.1,
            seed: 4,
        })
        .unwrap();
        let a = low_weight_attenuations(&ExactModel::new(dem.clone()), 2, LowWeightMode::Cached)
            .unwrap();
        for (set, est) in &a {
            let mask = EventMask::from_indices(10, set).unwrap();
            let truth = dem
                .probability_of(&mask)
                .map(|p| prob_to_attenuation(p).unwrap().0)
                .unwrap_or(0.0);
            assert!((est.value - truth).abs() < 1e-10, "{set:?}");
        }
    }

    #[test]
    fn sampled_errors_are_sensible() {
        let dem = Dem::from_pairs(&[
            ("1100", 0.05),
            ("0010", 0.03),
            ("0111", 0.02),
            ("1000", 0.01),
            ("0001", 0.02),
        ])
        .unwrap();
        let data = ShotData::new(&sample_histories(&dem, 200_000, 6)).unwrap();
        let a = low_weight_attenuations(&data, 3, LowWeightMode::Cached).unwrap();
        for (set, est) in &a {
            let mask = EventMask::from_indices(4, set).unwrap();
            let truth = dem
                .probability_of(&mask)
                .map(|p| prob_to_attenuation(p).unwrap().0)
                .unwrap_or(0.0);
            assert!(est.std_error > 0.0, "{set:?} {est:?}");
            assert!(
                (est.value - truth).abs() < 6.0 * est.std_error,
                "{set:?} {est} vs {truth}"
            );
        }
    }

    #[test]
    fn too_many_sets_rejected() {
        let model = ExactModel::new(Dem::empty(200));
        assert!(low_weight_attenuations(&model, 4, LowWeightMode::Cached).is_err());
    }
}
