//! Estimated DEMs: events with attenuation error bars, written as DEM text
//! with a trailing annotation per event.

use std::io::{BufRead, Write};

use crate::dem::{attenuation_to_prob, parse_dem, write_dem_annotated, Attenuation, Dem, DemEvent};
use crate::error::{Error, Result};
use crate::mask::EventMask;
use crate::stats::EstimateWithError;

#[derive(Clone, Debug, PartialEq)]
pub struct EventEstimate {
    pub mask: EventMask,
    pub attenuation: EstimateWithError,
    pub probability: f64,
    pub probability_std_error: f64,
    /// Set when the estimate looks inconsistent with the model.
    pub warning: Option<String>,
}

impl EventEstimate {
    /// Builds from an attenuation estimate. Negative attenuations map to
    /// negative probabilities through the same formula `(1 - e^-a) / 2`.
    pub fn new(mask: EventMask, attenuation: EstimateWithError) -> Self {
        let a = attenuation.value;
        let probability = -(-a).exp_m1() / 2.0;
        let probability_std_error = attenuation.std_error * (-a).exp() / 2.0;
        Self {
            mask,
            attenuation,
            probability,
            probability_std_error,
            warning: None,
        }
    }

    pub fn with_warning(mut self, warning: impl Into<String>) -> Self {
        self.warning = Some(warning.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatedDem {
    n_detectors: usize,
    events: Vec<EventEstimate>,
    notes: Vec<String>,
}

impl EstimatedDem {
    pub fn new(n_detectors: usize) -> Self {
        Self {
            n_detectors,
            events: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, event: EventEstimate) {
        self.events.push(event);
    }

    /// Records a diagnostic that is not tied to an emitted event.
    pub fn push_note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn n_detectors(&self) -> usize {
        self.n_detectors
    }

    pub fn events(&self) -> &[EventEstimate] {
        &self.events
    }

    pub fn get(&self, mask: &EventMask) -> Option<&EventEstimate> {
        self.events.iter().find(|e| &e.mask == mask)
    }

    pub fn sort(&mut self) {
        self.events.sort_by(|a, b| a.mask.cmp(&b.mask));
    }

    /// The point-estimate DEM. Events with negative estimated attenuation are
    /// left out, since they have no probabilistic meaning.
    pub fn to_dem(&self) -> Result<Dem> {
        let mut events = Vec::new();
        for e in &self.events {
            if e.attenuation.value > 0.0 {
                events.push(DemEvent {
                    mask: e.mask.clone(),
                    probability: attenuation_to_prob(Attenuation(e.attenuation.value))?,
                });
            }
        }
        Dem::new(self.n_detectors, events)
    }

    /// Writes DEM text with `header` as leading comments and a
    /// `stderr_p=.. a=.. stderr_a=..` note on every event line.
    pub fn write(&self, header: &[String], w: impl Write) -> Result<()> {
        let dem = Dem::new(
            self.n_detectors,
            self.events.iter().map(|e| DemEvent {
                mask: e.mask.clone(),
                probability: e.probability.clamp(0.0, 1.0),
            }),
        )?;
        write_dem_annotated(
            &dem,
            header,
            |ev| {
                let e = self.get(&ev.mask)?;
                let mut note = format!(
                    "stderr_p={:.6e} a={} stderr_a={:.6e}",
                    e.probability_std_error, e.attenuation.value, e.attenuation.std_error
                );
                if let Some(w) = &e.warning {
                    note.push_str(&format!(" warning={}", w.replace(' ', "_")));
                }
                Some(note)
            },
            w,
        )
    }

    /// Reads a file written by [`EstimatedDem::write`]. Plain DEM files are
    /// accepted too; their events get zero standard errors.
    pub fn read(r: impl BufRead) -> Result<Self> {
        let text = std::io::read_to_string(r)?;
        let dem = parse_dem(text.as_bytes())?;
        let mut out = Self::new(dem.n_detectors());
        let mut notes = std::collections::HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let Some((body, comment)) = line.split_once('#') else {
                continue;
            };
            if !body.trim_start().starts_with("error(") {
                continue;
            }
            let mask = parse_dem(format!("detectors {}\n{body}\n", dem.n_detectors()).as_bytes())?
                .events()[0]
                .mask
                .clone();
            let mut a = None;
            let mut se_a = None;
            let mut warning = None;
            for kv in comment.split_whitespace() {
                let Some((k, v)) = kv.split_once('=') else {
                    continue;
                };
                let num = || {
                    v.parse::<f64>().map_err(|_| Error::Parse {
                        line: lineno + 1,
                        msg: format!("bad value in {kv:?}"),
                    })
                };
                match k {
                    "a" => a = Some(num()?),
                    "stderr_a" => se_a = Some(num()?),
                    "warning" => warning = Some(v.replace('_', " ")),
                    _ => {}
                }
            }
            notes.insert(mask, (a, se_a, warning));
        }
        for ev in dem.events() {
            let note = notes.remove(&ev.mask);
            let (a, se, warning) = match note {
                Some((Some(a), se, w)) => (a, se.unwrap_or(0.0), w),
                other => {
                    let a = if ev.probability < 0.5 {
                        ev.attenuation()?.0
                    } else {
                        f64::INFINITY
                    };
                    (a, other.and_then(|o| o.1).unwrap_or(0.0), None)
                }
            };
            let mut e = EventEstimate::new(ev.mask.clone(), EstimateWithError::new(a, se));
            e.warning = warning;
            out.push(e);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_read_roundtrip() {
        let mut est = EstimatedDem::new(3);
        est.push(EventEstimate::new(
            "110".parse().unwrap(),
            EstimateWithError::new(0.2, 0.01),
        ));
        est.push(
            EventEstimate::new("001".parse().unwrap(), EstimateWithError::new(0.05, 0.002))
                .with_warning("floored at zero"),
        );
        let mut out = Vec::new();
        est.write(&["method=test".into()], &mut out).unwrap();
        let text = String::from_utf8(out.clone()).unwrap();
        assert!(text.starts_with("# method=test\ndetectors 3\n"));
        let back = EstimatedDem::read(&out[..]).unwrap();
        for e in est.events() {
            let b = back.get(&e.mask).unwrap();
            assert_eq!(b.attenuation.value, e.attenuation.value);
            assert!((b.attenuation.std_error - e.attenuation.std_error).abs() < 1e-5);
            assert_eq!(b.warning, e.warning);
        }
        assert_eq!(back.to_dem().unwrap().len(), 2);
    }

    #[test]
    fn plain_dem_reads_with_zero_error() {
        let est = EstimatedDem::read("detectors 2\nerror(0.1) D0\n".as_bytes()).unwrap();
        let e = &est.events()[0];
        assert!((e.probability - 0.1).abs() < 1e-15);
        assert_eq!(e.attenuation.std_error, 0.0);
    }

    #[test]
    fn probability_error_propagation() {
        let e = EventEstimate::new("1".parse().unwrap(), EstimateWithError::new(0.2, 0.01));
        assert!((e.probability_std_error - 0.01 * (-0.2f64).exp() / 2.0).abs() < 1e-15);
    }
}
