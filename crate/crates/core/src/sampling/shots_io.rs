//! Shot file formats.
//!
//! Text: one line per shot, `N` characters of `0`/`1`, detector 0 leftmost.
//!
//! Binary: `"DEMH"`, version byte `0x01`, `N` as `u32` LE, `K` as `u64` LE,
//! then `K` records of `ceil(N/8)` bytes. Bit `j` of byte `b` is detector
//! `8b + j`; padding bits are zero.

use std::io::{BufRead, Read, Write};

use super::DetectorHistories;
use crate::error::{Error, Result};
use crate::mask::MAX_DETECTORS;

pub const SHOT_MAGIC: &[u8; 4] = b"DEMH";
pub const SHOT_VERSION: u8 = 0x01;

pub fn write_shots_text(shots: &DetectorHistories, mut w: impl Write) -> Result<()> {
    let mut line = Vec::with_capacity(shots.n_detectors() + 1);
    for k in 0..shots.n_shots() {
        line.clear();
        for d in 0..shots.n_detectors() {
            line.push(if shots.get(k, d) { b'1' } else { b'0' });
        }
        line.push(b'\n');
        w.write_all(&line)?;
    }
    Ok(())
}

/// Reads text shots. `n_detectors` is required when the file may be empty;
/// otherwise it is taken from the first line.
pub fn read_shots_text(r: impl BufRead, n_detectors: Option<usize>) -> Result<DetectorHistories> {
    let mut n = n_detectors;
    let mut words: Vec<u64> = Vec::new();
    let mut k = 0usize;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let width = *n.get_or_insert(line.len());
        if line.len() != width {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("expected {width} characters, got {}", line.len()),
            });
        }
        if width > MAX_DETECTORS {
            return Err(Error::Argument(format!(
                "at most {MAX_DETECTORS} detectors"
            )));
        }
        let base = words.len();
        words.resize(base + width.div_ceil(64), 0);
        for (d, c) in line.bytes().enumerate() {
            match c {
                b'0' => {}
                b'1' => words[base + d / 64] |= 1 << (d % 64),
                _ => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: format!("invalid character {:?}", c as char),
                    })
                }
            }
        }
        k += 1;
    }
    let n = n.unwrap_or(0);
    Ok(DetectorHistories {
        n_detectors: n,
        n_shots: k,
        words,
    })
}

pub fn write_shots_binary(shots: &DetectorHistories, mut w: impl Write) -> Result<()> {
    let n = shots.n_detectors();
    w.write_all(SHOT_MAGIC)?;
    w.write_all(&[SHOT_VERSION])?;
    w.write_all(&(n as u32).to_le_bytes())?;
    w.write_all(&(shots.n_shots() as u64).to_le_bytes())?;
    let record = n.div_ceil(8);
    let mut buf = Vec::with_capacity(record);
    for k in 0..shots.n_shots() {
        buf.clear();
        for word in shots.shot_words(k) {
            buf.extend_from_slice(&word.to_le_bytes());
        }
        buf.truncate(record);
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_shots_binary(mut r: impl Read) -> Result<DetectorHistories> {
    let bad = |msg: &str| Error::Parse {
        line: 0,
        msg: msg.to_string(),
    };
    let mut header = [0u8; 17];
    r.read_exact(&mut header)
        .map_err(|_| bad("truncated shot header"))?;
    if &header[..4] != SHOT_MAGIC {
        return Err(bad("missing DEMH magic"));
    }
    if header[4] != SHOT_VERSION {
        return Err(bad(&format!("unsupported shot file version {}", header[4])));
    }
    let n = u32::from_le_bytes(header[5..9].try_into().unwrap()) as usize;
    let k = u64::from_le_bytes(header[9..17].try_into().unwrap()) as usize;
    if n > MAX_DETECTORS {
        return Err(Error::Argument(format!(
            "at most {MAX_DETECTORS} detectors"
        )));
    }
    let record = n.div_ceil(8);
    let wps = n.div_ceil(64);
    let mut out = DetectorHistories::zeros(n, k);
    let mut buf = vec![0u8; record];
    let mut padded = vec![0u8; wps * 8];
    for shot in 0..k {
        r.read_exact(&mut buf)
            .map_err(|_| bad("truncated shot records"))?;
        padded[..record].copy_from_slice(&buf);
        for (i, chunk) in padded.chunks(8).enumerate() {
            out.words[shot * wps + i] = u64::from_le_bytes(chunk.try_into().unwrap());
        }
        if n % 64 != 0 && wps > 0 && out.words[shot * wps + wps - 1] >> (n % 64) != 0 {
            return Err(bad("nonzero padding bits"));
        }
    }
    Ok(out)
}

/// Reads either format, detecting binary files by their magic bytes.
pub fn read_shots(mut r: impl BufRead) -> Result<DetectorHistories> {
    let head = r.fill_buf()?;
    if head.starts_with(SHOT_MAGIC) {
        read_shots_binary(r)
    } else {
        read_shots_text(r, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_layout() {
        let h = DetectorHistories::from_strings(&["1000000001", "0000000000"]).unwrap();
        let mut out = Vec::new();
        write_shots_binary(&h, &mut out).unwrap();
        let mut expect = b"DEMH\x01".to_vec();
        expect.extend_from_slice(&10u32.to_le_bytes());
        expect.extend_from_slice(&2u64.to_le_bytes());
        expect.extend_from_slice(&[0b0000_0001, 0b0000_0010, 0, 0]);
        assert_eq!(out, expect);
        assert_eq!(read_shots(&out[..]).unwrap(), h);
    }

    #[test]
    fn text_roundtrip_and_detection() {
        let h = DetectorHistories::from_strings(&["011", "100", "000"]).unwrap();
        let mut out = Vec::new();
        write_shots_text(&h, &mut out).unwrap();
        assert_eq!(out, b"011\n100\n000\n");
        assert_eq!(read_shots(&out[..]).unwrap(), h);
    }

    #[test]
    fn malformed_inputs() {
        assert!(read_shots_text(&b"01\n011\n"[..], None).is_err());
        assert!(read_shots_text(&b"0a\n"[..], None).is_err());
        assert!(read_shots_binary(&b"DEMX\x01"[..]).is_err());
        let mut bytes = b"DEMH\x01".to_vec();
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&1u64.to_le_bytes());
        bytes.push(0b1000_0000);
        assert!(read_shots_binary(&bytes[..]).is_err());
    }

    #[test]
    fn empty_text_with_hint() {
        let h = read_shots_text(&b""[..], Some(4)).unwrap();
        assert_eq!((h.n_detectors(), h.n_shots()), (4, 0));
    }
}
