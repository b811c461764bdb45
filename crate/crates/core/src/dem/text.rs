//! Line-oriented DEM text format.
//!
//! ```text
//! # comment
//! detectors 4
//! error(0.01) D0 D1
//! error(0.002) D2 D3   # trailing comments are allowed
//! ```

use std::io::{BufRead, Write};

use super::{Dem, DemEvent};
use crate::error::{Error, Result};
use crate::mask::EventMask;

pub fn parse_dem(reader: impl BufRead) -> Result<Dem> {
    let mut n_detectors: Option<usize> = None;
    let mut events = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { line: lineno, msg };
        let Some(n) = n_detectors else {
            let rest = body
                .strip_prefix("detectors")
                .ok_or_else(|| parse_err("expected `detectors <N>` first".into()))?;
            let n = rest
                .trim()
                .parse::<usize>()
                .map_err(|_| parse_err(format!("bad detector count {:?}", rest.trim())))?;
            n_detectors = Some(n);
            continue;
        };
        let rest = body
            .strip_prefix("error(")
            .ok_or_else(|| parse_err(format!("expected `error(<p>) ...`, got {body:?}")))?;
        let (p_str, targets) = rest
            .split_once(')')
            .ok_or_else(|| parse_err("unclosed `error(`".into()))?;
        let p: f64 = p_str
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("bad probability {p_str:?}")))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(parse_err(format!("probability {p} outside [0, 1]")));
        }
        let mut mask = EventMask::zeros(n);
        let mut last: Option<usize> = None;
        for tok in targets.split_whitespace() {
            let idx = tok
                .strip_prefix('D')
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| parse_err(format!("bad detector token {tok:?}")))?;
            if idx >= n {
                return Err(parse_err(format!("detector D{idx} out of range (N = {n})")));
            }
            if last.is_some_and(|l| idx <= l) {
                return Err(parse_err("detector indices must be increasing".into()));
            }
            last = Some(idx);
            mask.set(idx, true);
        }
        if mask.is_zero() {
            return Err(parse_err("event flips no detectors".into()));
        }
        events.push(DemEvent {
            mask,
            probability: p,
        });
    }
    let n = n_detectors.ok_or(Error::Parse {
        line: 0,
        msg: "missing `detectors` line".into(),
    })?;
    Dem::new(n, events)
}

/// Writes the DEM with events sorted by mask.
pub fn write_dem(dem: &Dem, writer: impl Write) -> Result<()> {
    write_dem_annotated(dem, &[], |_| None, writer)
}

/// Like [`write_dem`], with leading comment lines and an optional trailing
/// comment per event.
pub fn write_dem_annotated(
    dem: &Dem,
    header: &[String],
    annotate: impl Fn(&DemEvent) -> Option<String>,
    mut writer: impl Write,
) -> Result<()> {
    for line in header {
        writeln!(writer, "# {line}")?;
    }
    writeln!(writer, "detectors {}", dem.n_detectors())?;
    for ev in dem.sorted().events() {
        write!(writer, "error({})", ev.probability)?;
        for i in ev.mask.ones() {
            write!(writer, " D{i}")?;
        }
        if let Some(note) = annotate(ev) {
            write!(writer, "  # {note}")?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_write() {
        let text = "# a DEM\n\ndetectors 4\nerror(0.1) D0 D1  # pair\nerror(0.02) D3\n";
        let dem = parse_dem(text.as_bytes()).unwrap();
        assert_eq!(dem.n_detectors(), 4);
        assert_eq!(dem.len(), 2);
        let mut out = Vec::new();
        write_dem(&dem, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "detectors 4\nerror(0.02) D3\nerror(0.1) D0 D1\n"
        );
    }

    #[test]
    fn header_only() {
        let dem = parse_dem("detectors 60\n".as_bytes()).unwrap();
        assert!(dem.is_empty());
        assert_eq!(dem.n_detectors(), 60);
    }

    #[test]
    fn parse_errors() {
        for bad in [
            "error(0.1) D0\n",
            "detectors 2\nerror(0.1) D2\n",
            "detectors 2\nerror(0.1) D1 D0\n",
            "detectors 2\nerror(x) D0\n",
            "detectors 2\nerror(0.1)\n",
            "detectors 2\nerror(1.5) D0\n",
            "",
        ] {
            assert!(parse_dem(bad.as_bytes()).is_err(), "{bad:?}");
        }
    }
}
