//! Bit-packed detector masks.
//!
//! A mask is an N-bit string. It names a DEM event (the detectors the event
//! flips) or a parity (the detectors whose XOR is taken). Detector `i` lives in
//! bit `i % 64` of word `i / 64`; the printed form puts detector 0 leftmost.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Largest supported detector count.
pub const MAX_DETECTORS: usize = 1024;

type Words = SmallVec<[u64; 2]>;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct EventMask {
    n: usize,
    words: Words,
}

pub(crate) fn n_words(n: usize) -> usize {
    n.div_ceil(64)
}

impl EventMask {
    pub fn zeros(n_detectors: usize) -> Self {
        assert!(
            n_detectors <= MAX_DETECTORS,
            "at most {MAX_DETECTORS} detectors"
        );
        Self {
            n: n_detectors,
            words: smallvec::smallvec![0; n_words(n_detectors)],
        }
    }

    pub fn from_indices(n_detectors: usize, indices: &[usize]) -> Result<Self> {
        if n_detectors > MAX_DETECTORS {
            return Err(Error::Argument(format!(
                "at most {MAX_DETECTORS} detectors"
            )));
        }
        let mut mask = Self::zeros(n_detectors);
        for &i in indices {
            if i >= n_detectors {
                return Err(Error::Argument(format!(
                    "detector index {i} out of range for {n_detectors} detectors"
                )));
            }
            mask.set(i, true);
        }
        Ok(mask)
    }

    /// Mask from an integer where bit `i` is detector `i`. Needs `n_detectors <= 64`.
    pub fn from_bits(n_detectors: usize, bits: u64) -> Self {
        assert!(n_detectors <= 64);
        let bits = if n_detectors == 64 {
            bits
        } else {
            bits & ((1u64 << n_detectors) - 1)
        };
        let mut mask = Self::zeros(n_detectors);
        if n_detectors > 0 {
            mask.words[0] = bits;
        }
        mask
    }

    pub(crate) fn from_words(n_detectors: usize, words: &[u64]) -> Self {
        debug_assert_eq!(words.len(), n_words(n_detectors));
        Self {
            n: n_detectors,
            words: Words::from_slice(words),
        }
    }

    /// Integer encoding, available when the mask fits in a `usize` index.
    pub fn to_index(&self) -> Option<usize> {
        if self.n > 63 {
            return None;
        }
        Some(self.words.first().copied().unwrap_or(0) as usize)
    }

    pub fn n_detectors(&self) -> usize {
        self.n
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.n);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.n);
        let bit = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= bit;
        } else {
            self.words[i / 64] &= !bit;
        }
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Indices of the set bits, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * 64 + b)
            })
        })
    }

    fn check_len(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(())
    }

    /// Parity of the overlap: `sum_i x_i y_i mod 2`.
    pub fn dot(&self, other: &Self) -> Result<bool> {
        self.check_len(other)?;
        Ok(self.dot_unchecked(other))
    }

    pub(crate) fn dot_unchecked(&self, other: &Self) -> bool {
        let ones: u32 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        ones & 1 == 1
    }

    pub fn xor(&self, other: &Self) -> Result<Self> {
        self.check_len(other)?;
        let mut out = self.clone();
        out.xor_assign(other);
        Ok(out)
    }

    pub(crate) fn xor_assign(&mut self, other: &Self) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    /// True when every set bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.n == other.n
            && self
                .words
                .iter()
                .zip(&other.words)
                .all(|(a, b)| a & !b == 0)
    }

    /// Substring on `indices`: bit `j` of the result is bit `indices[j]` of `self`.
    pub fn restrict(&self, indices: &[usize]) -> Self {
        let mut out = Self::zeros(indices.len());
        for (j, &i) in indices.iter().enumerate() {
            if self.get(i) {
                out.set(j, true);
            }
        }
        out
    }

    /// Inverse of [`restrict`](Self::restrict): places bit `j` at `indices[j]` of an
    /// `n_detectors`-bit mask.
    pub fn lift(&self, n_detectors: usize, indices: &[usize]) -> Self {
        debug_assert_eq!(self.n, indices.len());
        let mut out = Self::zeros(n_detectors);
        for j in self.ones() {
            out.set(indices[j], true);
        }
        out
    }
}

impl Ord for EventMask {
    /// Lexicographic on the printed bit string, detector 0 first.
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.words.iter().zip(&other.words) {
            match a.reverse_bits().cmp(&b.reverse_bits()) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.n.cmp(&other.n)
    }
}

impl PartialOrd for EventMask {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for EventMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for EventMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{self}]")
    }
}

impl FromStr for EventMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_start_matches('[').trim_end_matches(']');
        if s.len() > MAX_DETECTORS {
            return Err(Error::Argument(format!(
                "at most {MAX_DETECTORS} detectors"
            )));
        }
        let mut mask = Self::zeros(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => mask.set(i, true),
                other => return Err(Error::Argument(format!("invalid mask character {other:?}"))),
            }
        }
        Ok(mask)
    }
}

/// Sorted, distinct detector indices.
pub type IndexSet = Vec<usize>;

/// All `k`-subsets of `0..n` in lexicographic order.
pub(crate) fn combinations(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut current: Option<Vec<usize>> = if k <= n { Some((0..k).collect()) } else { None };
    std::iter::from_fn(move || {
        let out = current.clone()?;
        let next = {
            let c = current.as_mut().unwrap();
            let mut i = k;
            loop {
                if i == 0 {
                    break false;
                }
                i -= 1;
                if c[i] < n - k + i {
                    c[i] += 1;
                    for j in i + 1..k {
                        c[j] = c[j - 1] + 1;
                    }
                    break true;
                }
            }
        };
        if !next {
            current = None;
        }
        Some(out)
    })
}
