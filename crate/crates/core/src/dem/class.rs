use std::fmt;

use super::{validate_indices, Attenuation, Dem};
use crate::error::{Error, Result};
use crate::mask::{EventMask, IndexSet};

/// The set of events whose masks take `fixed_values` on `fixed_indices`,
/// written `{i,j}=[10]`. Bits outside the fixed indices are aggregated over.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EventClass {
    fixed_indices: IndexSet,
    fixed_values: Vec<bool>,
}

impl EventClass {
    pub fn new(fixed_indices: Vec<usize>, fixed_values: Vec<bool>) -> Result<Self> {
        if fixed_indices.is_empty() {
            return Err(Error::Argument("a class fixes at least one index".into()));
        }
        if fixed_indices.len() != fixed_values.len() {
            return Err(Error::Argument(format!(
                "{} indices but {} values",
                fixed_indices.len(),
                fixed_values.len()
            )));
        }
        if fixed_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument(format!(
                "class indices must be strictly increasing: {fixed_indices:?}"
            )));
        }
        Ok(Self {
            fixed_indices,
            fixed_values,
        })
    }

    /// The class `E*` of events that flip every detector in `indices`.
    pub fn all_ones(indices: Vec<usize>) -> Result<Self> {
        let values = vec![true; indices.len()];
        Self::new(indices, values)
    }

    /// Parses `"0,2=10"` style labels (0-based indices).
    pub fn parse(label: &str) -> Result<Self> {
        let (idx, vals) = label
            .split_once('=')
            .ok_or_else(|| Error::Argument(format!("class label {label:?} lacks '='")))?;
        let indices = idx
            .trim()
            .trim_start_matches('{')
            .trim_end_matches('}')
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Argument(format!("bad index {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mask: EventMask = vals.parse()?;
        let values = (0..mask.n_detectors()).map(|i| mask.get(i)).collect();
        Self::new(indices, values)
    }

    pub fn fixed_indices(&self) -> &[usize] {
        &self.fixed_indices
    }

    pub fn fixed_values(&self) -> &[bool] {
        &self.fixed_values
    }

    pub fn k(&self) -> usize {
        self.fixed_indices.len()
    }

    /// A class is estimable from polarizations only if some fixed value is 1.
    pub fn is_estimable(&self) -> bool {
        self.fixed_values.iter().any(|&v| v)
    }

    /// Fixed values as a `k`-bit mask.
    pub fn value_mask(&self) -> EventMask {
        let mut m = EventMask::zeros(self.k());
        for (j, &v) in self.fixed_values.iter().enumerate() {
            m.set(j, v);
        }
        m
    }

    pub fn contains(&self, mask: &EventMask) -> bool {
        self.fixed_indices
            .iter()
            .zip(&self.fixed_values)
            .all(|(&i, &v)| mask.get(i) == v)
    }

    pub(crate) fn check_range(&self, n_detectors: usize) -> Result<()> {
        validate_indices(&self.fixed_indices, n_detectors).map(|_| ())
    }
}

impl fmt::Display for EventClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx: Vec<String> = self.fixed_indices.iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}=[{}]", idx.join(","), self.value_mask())
    }
}

/// Ground-truth aggregated attenuation: the sum of attenuations of all events
/// in `class`.
pub fn class_attenuation_true(dem: &Dem, class: &EventClass) -> Result<Attenuation> {
    class.check_range(dem.n_detectors())?;
    let mut total = 0.0;
    for ev in dem.events() {
        if class.contains(&ev.mask) {
            total += ev.attenuation()?.0;
        }
    }
    Ok(Attenuation(total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dem::prob_to_attenuation;

    fn dem_from_attenuations(pairs: &[(&str, f64)]) -> Dem {
        let n = pairs[0].0.len();
        Dem::from_attenuations(n, pairs.iter().map(|(s, a)| (s.parse().unwrap(), *a))).unwrap()
    }

    #[test]
    fn aggregates_superset_events() {
        // {1,2}=[11] in 1-based labels is {0,1} here.
        let dem = dem_from_attenuations(&[("1100", 0.1), ("1111", 0.05)]);
        let class = EventClass::all_ones(vec![0, 1]).unwrap();
        assert!((class_attenuation_true(&dem, &class).unwrap().0 - 0.15).abs() < 1e-14);
    }

    #[test]
    fn empty_dem_gives_zero() {
        let class = EventClass::parse("0,2=10").unwrap();
        assert_eq!(
            class_attenuation_true(&Dem::empty(3), &class).unwrap().0,
            0.0
        );
    }

    #[test]
    fn membership_by_hand() {
        let dem = dem_from_attenuations(&[("110", 0.2), ("100", 0.3)]);
        let c1 = EventClass::parse("0=1").unwrap();
        let c2 = EventClass::parse("0,1=10").unwrap();
        assert!((class_attenuation_true(&dem, &c1).unwrap().0 - 0.5).abs() < 1e-14);
        assert!((class_attenuation_true(&dem, &c2).unwrap().0 - 0.3).abs() < 1e-14);
    }

    #[test]
    fn whole_mask_class_is_single_event() {
        let dem = Dem::from_pairs(&[("101", 0.1), ("111", 0.2)]).unwrap();
        let class = EventClass::new(vec![0, 1, 2], vec![true, false, true]).unwrap();
        let got = class_attenuation_true(&dem, &class).unwrap().0;
        assert!((got - prob_to_attenuation(0.1).unwrap().0).abs() < 1e-15);
    }

    #[test]
    fn estimability_and_labels() {
        let c = EventClass::parse("{5,7}=[00]").unwrap();
        assert!(!c.is_estimable());
        assert_eq!(c.to_string(), "{5,7}=[00]");
        assert!(EventClass::new(vec![2, 1], vec![true, true]).is_err());
        assert!(
            class_attenuation_true(&Dem::empty(3), &EventClass::parse("3=1").unwrap()).is_err()
        );
    }
}
