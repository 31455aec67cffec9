//! PBM (P1 plain / P4 raw) codec with a `# pitch_nm=<int>` comment.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::PatternGrid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PbmFormat {
    P1,
    P4,
}

fn parse_err(offset: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        msg: msg.into(),
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    pitch: Option<u32>,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    /// Skips whitespace and comments, recording any pitch comment.
    fn skip_filler(&mut self) -> Result<()> {
        while let Some(b) = self.peek() {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                let start = self.pos;
                while let Some(c) = self.peek() {
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                    self.pos += 1;
                }
                self.comment(start, &self.bytes[start + 1..self.pos])?;
            } else {
                break;
            }
        }
        Ok(())
    }

    fn comment(&mut self, offset: usize, body: &[u8]) -> Result<()> {
        let text = String::from_utf8_lossy(body);
        let text = text.trim();
        if let Some(v) = text.strip_prefix("pitch_nm=") {
            let pitch: u32 = v
                .trim()
                .parse()
                .map_err(|_| parse_err(offset, format!("bad pitch comment `{text}`")))?;
            if pitch == 0 {
                return Err(parse_err(offset, "pitch_nm must be positive"));
            }
            self.pitch = Some(pitch);
        }
        Ok(())
    }

    fn read_uint(&mut self, what: &str) -> Result<usize> {
        self.skip_filler()?;
        let start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(parse_err(start, format!("expected {what}")));
        }
        let s = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        let v: usize = s
            .parse()
            .map_err(|_| parse_err(start, format!("{what} out of range")))?;
        if v == 0 {
            return Err(parse_err(start, format!("{what} must be positive")));
        }
        Ok(v)
    }
}

/// Parses a P1 or P4 PBM. A missing pitch comment means 1 nm.
pub fn load_pattern(bytes: &[u8]) -> Result<PatternGrid> {
    let format = match bytes.get(0..2) {
        Some(b"P1") => PbmFormat::P1,
        Some(b"P4") => PbmFormat::P4,
        _ => return Err(parse_err(0, "expected magic number P1 or P4")),
    };
    let mut cur = Cursor {
        bytes,
        pos: 2,
        pitch: None,
    };
    if !matches!(cur.peek(), Some(b) if b.is_ascii_whitespace() || b == b'#') {
        return Err(parse_err(2, "expected whitespace after magic number"));
    }
    let width = cur.read_uint("width")?;
    let height = cur.read_uint("height")?;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| parse_err(cur.pos, "dimensions overflow"))?;

    let pixels = match format {
        PbmFormat::P4 => {
            match cur.peek() {
                Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
                _ => return Err(parse_err(cur.pos, "expected single whitespace before raster")),
            }
            let stride = width.div_ceil(8);
            let expected = stride * height;
            let raster = &bytes[cur.pos..];
            if raster.len() != expected {
                return Err(parse_err(
                    cur.pos,
                    format!(
                        "dimension mismatch: {width}x{height} needs {expected} raster bytes, found {}",
                        raster.len()
                    ),
                ));
            }
            let mut pixels = Vec::with_capacity(n);
            for row in raster.chunks_exact(stride) {
                for x in 0..width {
                    pixels.push((row[x / 8] >> (7 - (x % 8))) & 1);
                }
            }
            pixels
        }
        PbmFormat::P1 => {
            let mut pixels = Vec::with_capacity(n);
            loop {
                cur.skip_filler()?;
                match cur.peek() {
                    None => break,
                    Some(b @ (b'0' | b'1')) => {
                        if pixels.len() == n {
                            return Err(parse_err(
                                cur.pos,
                                format!("dimension mismatch: more than {n} pixels"),
                            ));
                        }
                        pixels.push(b - b'0');
                        cur.pos += 1;
                    }
                    Some(b) => {
                        return Err(parse_err(
                            cur.pos,
                            format!("non-binary token `{}`", b as char),
                        ))
                    }
                }
            }
            if pixels.len() != n {
                return Err(parse_err(
                    cur.pos,
                    format!("dimension mismatch: expected {n} pixels, found {}", pixels.len()),
                ));
            }
            pixels
        }
    };
    PatternGrid::from_pixels(width, height, pixels, cur.pitch.unwrap_or(1))
}

/// Canonical PBM encoding: magic, pitch comment, `W H`, raster.
pub fn save_pattern(grid: &PatternGrid, format: PbmFormat) -> Vec<u8> {
    let (w, h) = (grid.width(), grid.height());
    match format {
        PbmFormat::P1 => {
            let mut s = String::with_capacity(32 + 2 * w * h);
            let _ = write!(s, "P1\n# pitch_nm={}\n{w} {h}\n", grid.pitch_nm());
            for y in 0..h {
                for (x, &p) in grid.row(y).iter().enumerate() {
                    if x > 0 {
                        s.push(' ');
                    }
                    s.push(if p == 1 { '1' } else { '0' });
                }
                s.push('\n');
            }
            s.into_bytes()
        }
        PbmFormat::P4 => {
            let mut out = format!("P4\n# pitch_nm={}\n{w} {h}\n", grid.pitch_nm()).into_bytes();
            let stride = w.div_ceil(8);
            out.reserve(stride * h);
            for y in 0..h {
                let mut row = vec![0u8; stride];
                for (x, &p) in grid.row(y).iter().enumerate() {
                    if p == 1 {
                        row[x / 8] |= 0x80 >> (x % 8);
                    }
                }
                out.extend_from_slice(&row);
            }
            out
        }
    }
}
