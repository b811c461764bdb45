use crate::dem::Dem;
use crate::error::{Error, Result};
use crate::mask::EventMask;

/// Default cap on `N` for dense `2^N` vectors (128 MiB of `f64`).
pub const DEFAULT_DENSE_CAP: usize = 24;

/// Probability vector over all `2^N` detector histories, indexed by the
/// history's integer encoding (bit `i` = detector `i`).
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    n_detectors: usize,
    weights: Vec<f64>,
}

impl Distribution {
    pub fn new(n_detectors: usize, weights: Vec<f64>) -> Result<Self> {
        if n_detectors >= usize::BITS as usize || weights.len() != 1usize << n_detectors {
            return Err(Error::Argument(format!(
                "distribution over {n_detectors} detectors needs 2^{n_detectors} weights"
            )));
        }
        Ok(Self {
            n_detectors,
            weights,
        })
    }

    /// Point mass on the all-zero history.
    pub fn delta(n_detectors: usize) -> Self {
        let mut weights = vec![0.0; 1 << n_detectors];
        weights[0] = 1.0;
        Self {
            n_detectors,
            weights,
        }
    }

    pub fn uniform(n_detectors: usize) -> Self {
        let len = 1usize << n_detectors;
        Self {
            n_detectors,
            weights: vec![1.0 / len as f64; len],
        }
    }

    pub fn n_detectors(&self) -> usize {
        self.n_detectors
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn probability(&self, history: &EventMask) -> f64 {
        self.weights[history.to_index().expect("dense distributions have N < 64")]
    }

    /// Applies `(1 - p) I + p X_s`: with probability `p`, XOR `s` into the history.
    pub fn apply_event(&mut self, s: usize, p: f64) {
        if s == 0 {
            return;
        }
        let top = 1usize << (usize::BITS - 1 - s.leading_zeros());
        for x in 0..self.weights.len() {
            if x & top == 0 {
                let y = x ^ s;
                let (wx, wy) = (self.weights[x], self.weights[y]);
                self.weights[x] = (1.0 - p) * wx + p * wy;
                self.weights[y] = (1.0 - p) * wy + p * wx;
            }
        }
    }

    /// Marginal on `indices`: bit `j` of the result is detector `indices[j]`.
    pub fn marginal(&self, indices: &[usize]) -> Result<Self> {
        crate::dem::validate_indices(indices, self.n_detectors)?;
        let mut out = vec![0.0; 1 << indices.len()];
        for (x, &w) in self.weights.iter().enumerate() {
            let mut y = 0usize;
            for (j, &i) in indices.iter().enumerate() {
                y |= ((x >> i) & 1) << j;
            }
            out[y] += w;
        }
        Self::new(indices.len(), out)
    }

    /// Total-variation distance `1/2 sum |P - Q|`.
    pub fn tv_distance(&self, other: &Self) -> Result<f64> {
        if self.n_detectors != other.n_detectors {
            return Err(Error::Dimension {
                expected: self.n_detectors,
                found: other.n_detectors,
            });
        }
        Ok(0.5
            * self
                .weights
                .iter()
                .zip(&other.weights)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }
}

/// Exact distribution of detector histories under `dem`, for `N <= 24`.
pub fn exact_distribution(dem: &Dem) -> Result<Distribution> {
    exact_distribution_capped(dem, DEFAULT_DENSE_CAP)
}

/// [`exact_distribution`] with an explicit cap on `N`.
pub fn exact_distribution_capped(dem: &Dem, cap: usize) -> Result<Distribution> {
    let n = dem.n_detectors();
    if n > cap || n >= 48 {
        return Err(Error::Capacity {
            what: "exact distribution",
            n,
            cap: cap.min(47),
        });
    }
    let mut dist = Distribution::delta(n);
    for ev in dem.events() {
        let s = ev.mask.to_index().expect("N < 64");
        dist.apply_event(s, ev.probability);
    }
    Ok(dist)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute force over all subsets of events.
    fn enumerate_subsets(dem: &Dem) -> Vec<f64> {
        let n = dem.n_detectors();
        let l = dem.len();
        let mut out = vec![0.0; 1 << n];
        for subset in 0..(1usize << l) {
            let mut w = 1.0;
            let mut x = 0usize;
            for (j, ev) in dem.events().iter().enumerate() {
                if subset >> j & 1 == 1 {
                    w *= ev.probability;
                    x ^= ev.mask.to_index().unwrap();
                } else {
                    w *= 1.0 - ev.probability;
                }
            }
            out[x] += w;
        }
        out
    }

    #[test]
    fn r2_distribution() {
        let dem = Dem::from_pairs(&[("10", 0.1), ("01", 0.2), ("11", 0.05)]).unwrap();
        let brute = enumerate_subsets(&dem);
        // index = integer encoding: "10" is detector 0 set -> index 1
        let expect = [0.685, 0.085, 0.175, 0.055];
        for (b, e) in brute.iter().zip(expect) {
            assert!((b - e).abs() < 1e-15);
        }
        let d = exact_distribution(&dem).unwrap();
        for (w, e) in d.weights().iter().zip(expect) {
            assert!((w - e).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_dem_is_delta() {
        let d = exact_distribution(&Dem::empty(3)).unwrap();
        assert_eq!(d, Distribution::delta(3));
    }

    #[test]
    fn single_event() {
        let d = exact_distribution(&Dem::from_pairs(&[("11", 0.3)]).unwrap()).unwrap();
        assert_eq!(d.weights(), &[0.7, 0.0, 0.0, 0.3]);
    }

    #[test]
    fn capacity_error() {
        let dem = Dem::empty(25);
        assert!(matches!(
            exact_distribution(&dem),
            Err(Error::Capacity { .. })
        ));
        assert!(exact_distribution_capped(&Dem::empty(5), 4).is_err());
    }

    #[test]
    fn marginal_and_tv() {
        let dem = Dem::from_pairs(&[("110", 0.1), ("011", 0.2)]).unwrap();
        let d = exact_distribution(&dem).unwrap();
        let m = d.marginal(&[0]).unwrap();
        assert!((m.weights()[1] - 0.1).abs() < 1e-15);
        assert_eq!(d.tv_distance(&d).unwrap(), 0.0);
        assert!(
            (Distribution::delta(1)
                .tv_distance(&Distribution::uniform(1))
                .unwrap()
                - 0.5)
                .abs()
                < 1e-15
        );
    }
}
