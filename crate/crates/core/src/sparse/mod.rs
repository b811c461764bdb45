//! Sparse DEM estimation at large `N`: least-squares inversion on a chosen
//! event set, the low-weight subtraction algorithm, and lattice search.

mod lattice;
mod low_weight;

pub use lattice::{extract_events, prune_lattice, ClassLattice, LatticeConfig, PruneReason};
pub use low_weight::{low_weight_attenuations, LowWeightMode};

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::mask::{EventMask, IndexSet};
use crate::parity::LinearForm;
use crate::stats::EstimateWithError;

/// `binom(N + w_max - 1, w_max)`, the count used to size the low-weight
/// problem. It counts multisets of size `w_max`, and bounds the number of
/// distinct masks of weight `1..=w_max` from above.
pub fn count_low_weight(n_detectors: usize, w_max: usize) -> Result<BigUint> {
    if w_max == 0 || w_max > n_detectors {
        return Err(Error::Argument(format!(
            "need 1 <= w_max <= N = {n_detectors}, got {w_max}"
        )));
    }
    let top = n_detectors + w_max - 1;
    let mut acc = BigUint::from(1u32);
    for i in 0..w_max {
        acc *= BigUint::from(top - i);
        acc /= BigUint::from(i + 1);
    }
    Ok(acc)
}

/// Solves `omega' = W' a'` in the least-squares sense, where `W'_(y,s) = y.s`
/// over the supplied parities (rows) and events (columns). Errors are
/// propagated from the depolarization errors, treated as independent.
pub fn solve_selected_events(
    omegas: &BTreeMap<EventMask, EstimateWithError>,
    events: &[EventMask],
) -> Result<BTreeMap<EventMask, EstimateWithError>> {
    if events.len() > omegas.len() {
        return Err(Error::Argument(format!(
            "{} events cannot be solved from {} parities",
            events.len(),
            omegas.len()
        )));
    }
    let divergent: Vec<String> = omegas
        .iter()
        .filter(|(_, w)| w.divergent)
        .map(|(y, _)| y.to_string())
        .collect();
    if !divergent.is_empty() {
        return Err(Error::EstimationImpossible {
            parities: divergent,
        });
    }
    let mut seen = BTreeMap::new();
    let mut bad = Vec::new();
    for e in events {
        if seen.insert(e.clone(), ()).is_some() {
            bad.push(e.to_string());
        }
    }
    let rows: Vec<(&EventMask, &EstimateWithError)> = omegas.iter().collect();
    let w: DMatrix<f64> = DMatrix::from_fn(rows.len(), events.len(), |r, c| {
        if rows[r].0.dot_unchecked(&events[c]) {
            1.0
        } else {
            0.0
        }
    });
    for (c, e) in events.iter().enumerate() {
        if w.column(c).iter().all(|&x| x == 0.0) {
            bad.push(e.to_string());
        }
    }
    if !bad.is_empty() {
        return Err(Error::Identifiability { events: bad });
    }
    let svd = w.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = 1e-10 * smax.max(1.0);
    let v_t = svd.v_t.as_ref().expect("requested");
    let null: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= tol)
        .collect();
    if !null.is_empty() {
        let involved: Vec<String> = (0..events.len())
            .filter(|&c| null.iter().any(|&i| v_t[(i, c)].abs() > 1e-8))
            .map(|c| events[c].to_string())
            .collect();
        return Err(Error::Identifiability { events: involved });
    }
    let pinv = w
        .pseudo_inverse(tol)
        .map_err(|e| Error::Argument(e.to_string()))?;
    let rhs = nalgebra::DVector::from_iterator(rows.len(), rows.iter().map(|(_, w)| w.value));
    let a = &pinv * rhs;
    let mut out = BTreeMap::new();
    for (c, e) in events.iter().enumerate() {
        let var: f64 = (0..rows.len())
            .map(|r| (pinv[(c, r)] * rows[r].1.std_error).powi(2))
            .sum();
        out.insert(e.clone(), EstimateWithError::new(a[c], var.sqrt()));
    }
    Ok(out)
}

/// The depolarization combination that estimates the all-ones class on `set`:
/// `-(2 / 2^w) sum_{u subset of set} (-1)^|u| omega_u`.
pub(crate) fn class_form(n: usize, set: &[usize]) -> LinearForm {
    let w = set.len();
    let scale = -2.0 / (1u64 << w) as f64;
    let mut form = LinearForm::new();
    for u in 1..1u64 << w {
        let idx: Vec<usize> = (0..w)
            .filter(|&j| u >> j & 1 == 1)
            .map(|j| set[j])
            .collect();
        let sign = if u.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        form.add(
            EventMask::from_indices(n, &idx).expect("indices in range"),
            scale * sign,
        );
    }
    form
}

pub(crate) fn is_strict_subset(small: &IndexSet, big: &IndexSet) -> bool {
    small.len() < big.len() && small.iter().all(|i| big.binary_search(i).is_ok())
}

pub(crate) fn label(set: &[usize]) -> String {
    let parts: Vec<String> = set.iter().map(|i| i.to_string()).collect();
    format!("{{{}}}", parts.join(","))
}
