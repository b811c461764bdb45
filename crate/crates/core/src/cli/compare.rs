//! Truth-versus-estimate comparison, written as line-oriented `key=value` text.

use std::io::Write;

use crate::dem::Dem;
use crate::error::{Error, Result};
use crate::estimated::{EstimatedDem, EventEstimate};
use crate::mask::EventMask;
use crate::stats::is_significant;

#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub mask: EventMask,
    pub p_true: f64,
    pub p_est: f64,
    pub abs_error: f64,
    pub std_error: f64,
    /// Whether the estimated attenuation passes the significance test.
    pub significant: bool,
}

impl CompareRow {
    /// `|p_est - p_true|` in units of the reported standard error.
    pub fn error_in_std_errors(&self) -> f64 {
        self.abs_error / self.std_error
    }
}

/// Truth events are matched against estimated events with positive
/// attenuation. Entries with nonpositive attenuation (misfit residuals) are
/// listed separately and do not count as events.
#[derive(Clone, Debug, PartialEq)]
pub struct CompareReport {
    pub n_detectors: usize,
    pub rows: Vec<CompareRow>,
    pub missing_events: Vec<EventMask>,
    pub spurious_events: Vec<EventEstimate>,
    pub nonpositive: Vec<EventEstimate>,
    pub total_attenuation_true: f64,
    pub total_attenuation_estimated: f64,
}

pub fn compare(truth: &Dem, est: &EstimatedDem, z_threshold: f64) -> Result<CompareReport> {
    let n = truth.n_detectors();
    if est.n_detectors() != n {
        return Err(Error::Dimension {
            expected: n,
            found: est.n_detectors(),
        });
    }
    let (positive, nonpositive): (Vec<&EventEstimate>, Vec<&EventEstimate>) =
        est.events().iter().partition(|e| e.attenuation.value > 0.0);
    let mut rows = Vec::new();
    let mut missing_events = Vec::new();
    for ev in truth.sorted().events() {
        match positive.iter().find(|e| e.mask == ev.mask) {
            Some(e) => rows.push(CompareRow {
                mask: ev.mask.clone(),
                p_true: ev.probability,
                p_est: e.probability,
                abs_error: (e.probability - ev.probability).abs(),
                std_error: e.probability_std_error,
                significant: is_significant(&e.attenuation, z_threshold),
            }),
            None => missing_events.push(ev.mask.clone()),
        }
    }
    let spurious_events: Vec<EventEstimate> = positive
        .iter()
        .filter(|e| truth.probability_of(&e.mask).is_none())
        .map(|e| (*e).clone())
        .collect();
    Ok(CompareReport {
        n_detectors: n,
        rows,
        missing_events,
        spurious_events,
        nonpositive: nonpositive.into_iter().cloned().collect(),
        total_attenuation_true: truth.total_attenuation()?.0,
        total_attenuation_estimated: positive
            .iter()
            .fold(0.0, |acc, e| acc + e.attenuation.value),
    })
}

impl CompareReport {
    /// No missing and no spurious events.
    pub fn is_match(&self) -> bool {
        self.missing_events.is_empty() && self.spurious_events.is_empty()
    }

    pub fn max_abs_error(&self) -> f64 {
        self.rows.iter().map(|r| r.abs_error).fold(0.0, f64::max)
    }

    pub fn max_error_in_std_errors(&self) -> f64 {
        self.rows
            .iter()
            .map(CompareRow::error_in_std_errors)
            .fold(0.0, f64::max)
    }

    pub fn write(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "detectors={}", self.n_detectors)?;
        for r in &self.rows {
            writeln!(
                w,
                "row mask={} p_true={} p_est={} abs_error={} stderr_p={} significant={}",
                r.mask, r.p_true, r.p_est, r.abs_error, r.std_error, r.significant
            )?;
        }
        for m in &self.missing_events {
            writeln!(w, "missing mask={m}")?;
        }
        for e in &self.spurious_events {
            writeln!(
                w,
                "spurious mask={} p_est={} stderr_p={}",
                e.mask, e.probability, e.probability_std_error
            )?;
        }
        for e in &self.nonpositive {
            write!(
                w,
                "nonpositive mask={} a={} stderr_a={}",
                e.mask, e.attenuation.value, e.attenuation.std_error
            )?;
            if let Some(warning) = &e.warning {
                write!(w, " warning={}", warning.replace(' ', "_"))?;
            }
            writeln!(w)?;
        }
        writeln!(w, "n_rows={}", self.rows.len())?;
        writeln!(w, "n_missing={}", self.missing_events.len())?;
        writeln!(w, "n_spurious={}", self.spurious_events.len())?;
        writeln!(w, "n_nonpositive={}", self.nonpositive.len())?;
        writeln!(w, "max_abs_error={}", self.max_abs_error())?;
        writeln!(w, "max_error_in_stderr={}", self.max_error_in_std_errors())?;
        writeln!(w, "total_attenuation_true={}", self.total_attenuation_true)?;
        writeln!(
            w,
            "total_attenuation_estimated={}",
            self.total_attenuation_estimated
        )?;
        writeln!(w, "match={}", self.is_match())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::EstimateWithError;

    fn estimate(n: usize, events: &[(&str, f64, f64)]) -> EstimatedDem {
        let mut est = EstimatedDem::new(n);
        for &(m, a, se) in events {
            est.push(EventEstimate::new(
                m.parse().unwrap(),
                EstimateWithError::new(a, se),
            ));
        }
        est
    }

    #[test]
    fn identical_inputs_match() {
        let truth = Dem::from_pairs(&[("10", 0.1), ("11", 0.05)]).unwrap();
        let est = EstimatedDem::read("detectors 2\nerror(0.1) D0\nerror(0.05) D0 D1\n".as_bytes())
            .unwrap();
        let r = compare(&truth, &est, 5.0).unwrap();
        assert!(r.is_match());
        assert_eq!(r.rows.len(), 2);
        assert!(r.max_abs_error() < 1e-15);
    }

    #[test]
    fn every_event_lands_in_one_bucket() {
        let truth = Dem::from_pairs(&[("100", 0.1), ("011", 0.05)]).unwrap();
        let est = estimate(
            3,
            &[
                ("100", 0.2, 0.01),
                ("001", 0.01, 0.001),
                ("010", -0.01, 0.002),
            ],
        );
        let r = compare(&truth, &est, 5.0).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.missing_events, vec!["011".parse::<EventMask>().unwrap()]);
        assert_eq!(r.spurious_events.len(), 1);
        assert_eq!(r.nonpositive.len(), 1);
        assert!(!r.is_match());
    }

    #[test]
    fn empty_estimate_misses_everything() {
        let truth = Dem::from_pairs(&[("1", 0.1)]).unwrap();
        let r = compare(&truth, &EstimatedDem::new(1), 5.0).unwrap();
        assert_eq!(r.missing_events.len(), 1);
        let mut out = Vec::new();
        r.write(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("n_missing=1\n") && text.ends_with("match=false\n"));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let truth = Dem::empty(3);
        assert!(matches!(
            compare(&truth, &EstimatedDem::new(2), 5.0),
            Err(Error::Dimension { .. })
        ));
    }
}
