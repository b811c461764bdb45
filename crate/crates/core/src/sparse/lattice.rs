//! Level-wise search over the lattice of classes `E*` (all events flipping
//! every detector in `E`), and extraction of events from the pruned lattice.
//!
//! The aggregated attenuation `a_{E*}` can only shrink as `E` grows, so a
//! class that is statistically empty empties all of its subclasses. Level `w`
//! therefore only evaluates sets whose `(w-1)`-subsets all survived: triangles
//! of the pair graph at level 3, hypercliques beyond.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;

use rayon::prelude::*;

use super::{class_form, is_strict_subset, label};
use crate::aggregated::{estimate_from_marginal, MAX_CLASS_SIZE};
use crate::error::{Error, Result};
use crate::estimated::{EstimatedDem, EventEstimate};
use crate::mask::{EventMask, IndexSet};
use crate::parity::{LinearForm, ParityStatistics};
use crate::stats::{is_significant, ErrorModel, EstimateWithError, DEFAULT_Z_THRESHOLD};

#[derive(Clone, Debug)]
pub struct LatticeConfig {
    pub w_max: usize,
    pub z_threshold: f64,
    /// Error model for class estimates.
    pub error: ErrorModel,
}

impl LatticeConfig {
    pub fn new(w_max: usize) -> Self {
        Self {
            w_max,
            z_threshold: DEFAULT_Z_THRESHOLD,
            error: ErrorModel::Delta,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PruneReason {
    Insignificant,
    Divergent,
}

#[derive(Clone, Debug)]
pub struct ClassLattice {
    n_detectors: usize,
    w_max: usize,
    z_threshold: f64,
    /// `levels[w - 1]` holds the stored sets of size `w`.
    levels: Vec<BTreeMap<IndexSet, EstimateWithError>>,
    pruned: BTreeMap<IndexSet, PruneReason>,
    n_evaluated: usize,
}

impl ClassLattice {
    pub fn n_detectors(&self) -> usize {
        self.n_detectors
    }

    pub fn w_max(&self) -> usize {
        self.w_max
    }

    pub fn z_threshold(&self) -> f64 {
        self.z_threshold
    }

    pub fn level(&self, w: usize) -> Option<&BTreeMap<IndexSet, EstimateWithError>> {
        self.levels.get(w.checked_sub(1)?)
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn get(&self, set: &[usize]) -> Option<&EstimateWithError> {
        self.level(set.len())?.get(set)
    }

    /// Every stored set with its estimate, by level then lexicographically.
    pub fn stored(&self) -> impl Iterator<Item = (&IndexSet, &EstimateWithError)> {
        self.levels.iter().flat_map(|l| l.iter())
    }

    pub fn len(&self) -> usize {
        self.levels.iter().map(|l| l.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sets that were evaluated and rejected.
    pub fn pruned(&self) -> &BTreeMap<IndexSet, PruneReason> {
        &self.pruned
    }

    /// Number of class estimates computed.
    pub fn n_evaluated(&self) -> usize {
        self.n_evaluated
    }

    /// One line per stored class: `{i,j,..} a=<value> stderr=<error>`.
    pub fn write_report(&self, mut w: impl Write) -> Result<()> {
        writeln!(
            w,
            "# lattice N={} w_max={} z={} evaluated={}",
            self.n_detectors, self.w_max, self.z_threshold, self.n_evaluated
        )?;
        for (set, est) in self.stored() {
            writeln!(w, "{} a={} stderr={}", label(set), est.value, est.std_error)?;
        }
        Ok(())
    }
}

/// Builds the pruned lattice up to `cfg.w_max`, stopping early at an empty
/// level.
pub fn prune_lattice(source: &impl ParityStatistics, cfg: &LatticeConfig) -> Result<ClassLattice> {
    let n = source.n_detectors();
    if cfg.w_max == 0 || cfg.w_max > n.min(MAX_CLASS_SIZE) {
        return Err(Error::Argument(format!(
            "w_max must lie in 1..={}, got {}",
            n.min(MAX_CLASS_SIZE),
            cfg.w_max
        )));
    }
    if !(cfg.z_threshold > 0.0) {
        return Err(Error::Argument(format!(
            "significance threshold must be positive, got {}",
            cfg.z_threshold
        )));
    }
    let mut lattice = ClassLattice {
        n_detectors: n,
        w_max: cfg.w_max,
        z_threshold: cfg.z_threshold,
        levels: Vec::new(),
        pruned: BTreeMap::new(),
        n_evaluated: 0,
    };
    let mut candidates: Vec<IndexSet> = (0..n).map(|i| vec![i]).collect();
    let mut adjacency: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for w in 1..=cfg.w_max {
        if w == 2 {
            let singles: Vec<usize> = lattice.levels[0].keys().map(|s| s[0]).collect();
            candidates = singles
                .iter()
                .enumerate()
                .flat_map(|(a, &i)| singles[a + 1..].iter().map(move |&j| vec![i, j]))
                .collect();
        } else if w > 2 {
            candidates = hyperclique_candidates(&lattice.levels[w - 2], &adjacency);
        }
        let evaluated: Vec<(IndexSet, Result<EstimateWithError>)> = candidates
            .par_iter()
            .map(|set| (set.clone(), evaluate_class(source, set, cfg.error)))
            .collect();
        lattice.n_evaluated += evaluated.len();
        let mut level = BTreeMap::new();
        for (set, est) in evaluated {
            let est = est?;
            if is_significant(&est, cfg.z_threshold) {
                if w == 2 {
                    adjacency[set[0]].insert(set[1]);
                    adjacency[set[1]].insert(set[0]);
                }
                level.insert(set, est);
            } else {
                let reason = if est.divergent {
                    PruneReason::Divergent
                } else {
                    PruneReason::Insignificant
                };
                lattice.pruned.insert(set, reason);
            }
        }
        let empty = level.is_empty();
        lattice.levels.push(level);
        if empty {
            break;
        }
    }
    Ok(lattice)
}

fn evaluate_class(
    source: &impl ParityStatistics,
    set: &[usize],
    error: ErrorModel,
) -> Result<EstimateWithError> {
    let m = source.marginal(set)?;
    let values = vec![true; set.len()];
    estimate_from_marginal(
        &m,
        &values,
        source.divergence_floor(),
        source.std_error_floor(),
        error,
    )
}

/// Sets `S + {k}` with `k > max(S)` adjacent to all of `S`, kept only if every
/// subset one smaller is stored.
fn hyperclique_candidates(
    previous: &BTreeMap<IndexSet, EstimateWithError>,
    adjacency: &[BTreeSet<usize>],
) -> Vec<IndexSet> {
    let stored: HashSet<&IndexSet> = previous.keys().collect();
    let mut out = Vec::new();
    for set in previous.keys() {
        let last = *set.last().expect("nonempty");
        let mut common: BTreeSet<usize> = adjacency[set[0]].range(last + 1..).copied().collect();
        for &i in &set[1..] {
            common.retain(|k| adjacency[i].contains(k));
        }
        for k in common {
            let mut cand = set.clone();
            cand.push(k);
            let all_faces = (0..cand.len() - 1).all(|drop| {
                let face: IndexSet = cand
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != drop)
                    .map(|(_, &v)| v)
                    .collect();
                stored.contains(&face)
            });
            if all_faces {
                out.push(cand);
            }
        }
    }
    out
}

/// Reads events off a pruned lattice.
///
/// Repeatedly takes the lexicographically first stored class with no stored
/// superset, and estimates its residual: the class estimate minus everything
/// already emitted from its superclasses. A significant residual becomes an
/// event. A negative residual within 3 standard errors of zero is floored
/// (dropped, with a note); a more negative one is emitted with a misfit
/// warning. Anything else is dropped as empty.
///
/// Residual errors are evaluated against `source`, which must be the source
/// the lattice was built from.
pub fn extract_events(
    lattice: &ClassLattice,
    source: &impl ParityStatistics,
) -> Result<EstimatedDem> {
    let n = lattice.n_detectors;
    if source.n_detectors() != n {
        return Err(Error::Dimension {
            expected: n,
            found: source.n_detectors(),
        });
    }
    let mut remaining: BTreeMap<IndexSet, EstimateWithError> =
        lattice.stored().map(|(s, e)| (s.clone(), *e)).collect();
    let mut emitted: Vec<(IndexSet, LinearForm)> = Vec::new();
    let mut out = EstimatedDem::new(n);
    while !remaining.is_empty() {
        let set = remaining
            .keys()
            .find(|s| !remaining.keys().any(|t| is_strict_subset(s, t)))
            .expect("a finite poset has maximal elements")
            .clone();
        let stored = remaining.remove(&set).expect("present");
        let supersets: Vec<&LinearForm> = emitted
            .iter()
            .filter(|(s, _)| is_strict_subset(&set, s))
            .map(|(_, f)| f)
            .collect();
        let mut form = class_form(n, &set);
        let est = if supersets.is_empty() {
            stored
        } else {
            for f in &supersets {
                form.add_scaled(f, -1.0);
            }
            form.evaluate(source)
        };
        let mask = EventMask::from_indices(n, &set)?;
        if est.divergent {
            out.push_note(format!(
                "class {} residual is divergent; dropped",
                label(&set)
            ));
        } else if is_significant(&est, lattice.z_threshold) {
            out.push(EventEstimate::new(mask, est));
            emitted.push((set, form));
        } else if est.value < 0.0 && -est.value > 3.0 * est.std_error {
            out.push(EventEstimate::new(mask, est).with_warning(format!(
                "misfit: residual {:.3e} is {:.1} std errors below zero",
                est.value,
                -est.value / est.std_error
            )));
            emitted.push((set, form));
        } else if est.value < 0.0 {
            out.push_note(format!(
                "class {} residual {:.3e} floored at zero",
                label(&set),
                est.value
            ));
        }
    }
    out.sort();
    Ok(out)
}
