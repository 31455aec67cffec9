//! Binary pixel-grid layout model.
//!
//! A [`PatternGrid`] is a single metal layer rasterized at a fixed physical
//! pitch. Pixel value `1` is metal, `0` is empty. Grids are plain values:
//! every operation here returns a new grid and never mutates its input.

mod pbm;

pub use pbm::{load_pattern, save_pattern, PbmFormat};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PatternGrid {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    pitch_nm: u32,
}

impl std::fmt::Debug for PatternGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "PatternGrid {}x{} pitch={}nm",
            self.width, self.height, self.pitch_nm
        )?;
        if self.width * self.height <= 64 * 64 {
            for y in 0..self.height {
                let row: String = self
                    .row(y)
                    .iter()
                    .map(|&p| if p == 1 { '#' } else { '.' })
                    .collect();
                writeln!(f, "  {row}")?;
            }
        }
        Ok(())
    }
}

impl PatternGrid {
    /// All-empty grid.
    pub fn new(width: usize, height: usize, pitch_nm: u32) -> Result<Self> {
        Self::from_pixels(width, height, vec![0; width * height], pitch_nm)
    }

    pub fn from_pixels(
        width: usize,
        height: usize,
        pixels: Vec<u8>,
        pitch_nm: u32,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "grid dimensions must be positive, got {width}x{height}"
            )));
        }
        if pitch_nm == 0 {
            return Err(Error::InvalidInput("pitch_nm must be positive".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} pixels for a {width}x{height} grid",
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|&p| p > 1) {
            return Err(Error::InvalidInput(format!(
                "pixel {i} has non-binary value {}",
                pixels[i]
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
            pitch_nm,
        })
    }

    /// Builds a grid from row slices, pitch 1 nm. Panics on ragged or
    /// non-binary input; intended for literals in tests and examples.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Self {
        let height = rows.len();
        let width = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut pixels = Vec::with_capacity(width * height);
        for r in rows {
            assert_eq!(r.as_ref().len(), width, "ragged rows");
            pixels.extend_from_slice(r.as_ref());
        }
        Self::from_pixels(width, height, pixels, 1).expect("valid literal grid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pitch_nm(&self) -> u32 {
        self.pitch_nm
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.pixels[y * self.width + x] = value as u8;
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    pub fn column(&self, x: usize) -> Vec<u8> {
        (0..self.height).map(|y| self.get(x, y)).collect()
    }

    pub fn with_pitch(mut self, pitch_nm: u32) -> Result<Self> {
        if pitch_nm == 0 {
            return Err(Error::InvalidInput("pitch_nm must be positive".into()));
        }
        self.pitch_nm = pitch_nm;
        Ok(self)
    }

    pub fn count_ones(&self) -> usize {
        self.pixels.iter().filter(|&&p| p == 1).count()
    }

    /// Rect covering the whole grid.
    pub fn bounds(&self) -> Rect {
        Rect {
            x0: 0,
            y0: 0,
            x1: self.width,
            y1: self.height,
        }
    }

    /// Pixels as `f64`, row-major. Used for PCA embeddings.
    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| p as f64).collect()
    }

    /// Replaces each pixel with an `s`×`s` block. The pitch must be divisible
    /// by `s` so the physical extent is unchanged.
    pub fn upsample(&self, s: usize) -> Result<Self> {
        if s == 0 || !(self.pitch_nm as usize).is_multiple_of(s) {
            return Err(Error::Quantization(format!(
                "pitch {} not divisible by upsampling factor {s}",
                self.pitch_nm
            )));
        }
        let (w, h) = (self.width * s, self.height * s);
        let mut pixels = vec![0u8; w * h];
        for y in 0..h {
            for x in 0..w {
                pixels[y * w + x] = self.get(x / s, y / s);
            }
        }
        Self::from_pixels(w, h, pixels, self.pitch_nm / s as u32)
    }
}

/// Axis-aligned pixel rectangle, `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Result<Self> {
        if x0 >= x1 || y0 >= y1 {
            return Err(Error::InvalidInput(format!(
                "empty rect ({x0},{y0})-({x1},{y1})"
            )));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn is_within(&self, width: usize, height: usize) -> bool {
        self.x0 < self.x1 && self.y0 < self.y1 && self.x1 <= width && self.y1 <= height
    }

    pub fn check_within(&self, width: usize, height: usize) -> Result<()> {
        if self.is_within(width, height) {
            Ok(())
        } else {
            Err(Error::Bounds {
                x0: self.x0,
                y0: self.y0,
                x1: self.x1,
                y1: self.y1,
                width,
                height,
            })
        }
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }

    /// Smallest rect containing both.
    pub fn bbox_union(&self, other: &Rect) -> Rect {
        Rect {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }
}

/// Which predefined mask family a mask comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskSetId {
    Default,
    Horizontal,
    Custom,
}

/// Inpainting region: a union of rects plus its schedule identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MaskSpec {
    pub rects: Vec<Rect>,
    pub set_id: MaskSetId,
    pub index: usize,
}

impl MaskSpec {
    /// Builds a mask and normalizes its rects into a non-overlapping cover.
    pub fn new(rects: Vec<Rect>, set_id: MaskSetId, index: usize) -> Result<Self> {
        if rects.is_empty() {
            return Err(Error::InvalidInput("mask has no rects".into()));
        }
        for r in &rects {
            if r.x0 >= r.x1 || r.y0 >= r.y1 {
                return Err(Error::InvalidInput(format!("empty mask rect {r:?}")));
            }
        }
        Ok(Self {
            rects: normalize_rects(&rects),
            set_id,
            index,
        })
    }

    pub fn single(rect: Rect, set_id: MaskSetId, index: usize) -> Self {
        Self {
            rects: vec![rect],
            set_id,
            index,
        }
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.rects.iter().any(|r| r.contains(x, y))
    }

    /// Union area in pixels.
    pub fn area(&self) -> usize {
        normalize_rects(&self.rects).iter().map(Rect::area).sum()
    }

    pub fn bbox(&self) -> Rect {
        self.rects
            .iter()
            .skip(1)
            .fold(self.rects[0], |acc, r| acc.bbox_union(r))
    }

    pub fn check_within(&self, width: usize, height: usize) -> Result<()> {
        for r in &self.rects {
            r.check_within(width, height)?;
        }
        Ok(())
    }

    /// Boolean raster of the mask, row-major.
    pub fn raster(&self, width: usize, height: usize) -> Vec<bool> {
        let mut out = vec![false; width * height];
        for r in &self.rects {
            for y in r.y0..r.y1.min(height) {
                for x in r.x0..r.x1.min(width) {
                    out[y * width + x] = true;
                }
            }
        }
        out
    }
}

/// Rewrites a union of possibly overlapping rects as disjoint rects.
///
/// Coordinates are compressed onto the rect edges; covered cells are merged
/// into horizontal runs per band, then identical runs on touching bands are
/// merged vertically. Output order is deterministic (top-to-bottom, then
/// left-to-right).
pub fn normalize_rects(rects: &[Rect]) -> Vec<Rect> {
    let mut xs: Vec<usize> = rects.iter().flat_map(|r| [r.x0, r.x1]).collect();
    let mut ys: Vec<usize> = rects.iter().flat_map(|r| [r.y0, r.y1]).collect();
    xs.sort_unstable();
    xs.dedup();
    ys.sort_unstable();
    ys.dedup();
    if xs.len() < 2 || ys.len() < 2 {
        return Vec::new();
    }

    let mut open: Vec<Rect> = Vec::new();
    let mut done: Vec<Rect> = Vec::new();
    for band in 0..ys.len() - 1 {
        let (y0, y1) = (ys[band], ys[band + 1]);
        let mut runs: Vec<(usize, usize)> = Vec::new();
        for col in 0..xs.len() - 1 {
            let (x0, x1) = (xs[col], xs[col + 1]);
            let covered = rects
                .iter()
                .any(|r| r.x0 <= x0 && x1 <= r.x1 && r.y0 <= y0 && y1 <= r.y1);
            if covered {
                match runs.last_mut() {
                    Some(last) if last.1 == x0 => last.1 = x1,
                    _ => runs.push((x0, x1)),
                }
            }
        }
        let mut next_open = Vec::new();
        for (x0, x1) in runs {
            if let Some(pos) = open
                .iter()
                .position(|r| r.x0 == x0 && r.x1 == x1 && r.y1 == y0)
            {
                let mut r = open.swap_remove(pos);
                r.y1 = y1;
                next_open.push(r);
            } else {
                next_open.push(Rect { x0, y0, x1, y1 });
            }
        }
        done.append(&mut open);
        open = next_open;
    }
    done.append(&mut open);
    done.sort_by_key(|r| (r.y0, r.x0));
    done
}

/// Copies the pixels under `r` into a new grid with the same pitch.
pub fn crop(grid: &PatternGrid, r: Rect) -> Result<PatternGrid> {
    r.check_within(grid.width, grid.height)?;
    let mut pixels = Vec::with_capacity(r.area());
    for y in r.y0..r.y1 {
        pixels.extend_from_slice(&grid.row(y)[r.x0..r.x1]);
    }
    PatternGrid::from_pixels(r.width(), r.height(), pixels, grid.pitch_nm)
}

/// Cuts `rows × per_row` clips of `clip_w × clip_h` from a large layout.
///
/// Clip origins are spread evenly so the first and last clip of each axis
/// touch the layout edges; clips may overlap when the layout is smaller than
/// the tiling. A 2048×2048 layout with 512×512 clips, 4 rows and 5 per row
/// yields twenty starters.
pub fn split_starters(
    grid: &PatternGrid,
    clip_w: usize,
    clip_h: usize,
    rows: usize,
    per_row: usize,
) -> Result<Vec<(Rect, PatternGrid)>> {
    if clip_w == 0 || clip_h == 0 || clip_w > grid.width || clip_h > grid.height {
        return Err(Error::InvalidInput(format!(
            "clip {clip_w}x{clip_h} does not fit in {}x{} layout",
            grid.width, grid.height
        )));
    }
    if rows == 0 || per_row == 0 {
        return Err(Error::InvalidInput("rows and per_row must be >= 1".into()));
    }
    let spread = |i: usize, n: usize, slack: usize| -> usize {
        if n <= 1 {
            0
        } else {
            ((i * slack) as f64 / (n - 1) as f64).round() as usize
        }
    };
    let mut out = Vec::with_capacity(rows * per_row);
    for r in 0..rows {
        let y0 = spread(r, rows, grid.height - clip_h);
        for c in 0..per_row {
            let x0 = spread(c, per_row, grid.width - clip_w);
            let rect = Rect::new(x0, y0, x0 + clip_w, y0 + clip_h)?;
            out.push((rect, crop(grid, rect)?));
        }
    }
    Ok(out)
}

/// True iff every pixel outside the mask is identical in both grids.
pub fn assert_mask_preserving(
    original: &PatternGrid,
    variation: &PatternGrid,
    mask: &MaskSpec,
) -> Result<bool> {
    if original.width != variation.width
        || original.height != variation.height
        || original.pitch_nm != variation.pitch_nm
    {
        return Err(Error::DimensionMismatch(format!(
            "{}x{}@{}nm vs {}x{}@{}nm",
            original.width,
            original.height,
            original.pitch_nm,
            variation.width,
            variation.height,
            variation.pitch_nm
        )));
    }
    let inside = mask.raster(original.width, original.height);
    Ok(original
        .pixels
        .iter()
        .zip(&variation.pixels)
        .zip(&inside)
        .all(|((a, b), &m)| m || a == b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag4() -> PatternGrid {
        PatternGrid::from_rows(&[[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]])
    }

    #[test]
    fn crop_identity_diagonal() {
        let g = diag4();
        let c = crop(&g, Rect::new(0, 0, 2, 2).unwrap()).unwrap();
        assert_eq!(c, PatternGrid::from_rows(&[[1, 0], [0, 1]]));
        assert_eq!(crop(&g, g.bounds()).unwrap(), g);
    }

    #[test]
    fn crop_out_of_bounds() {
        let g = diag4();
        let err = crop(&g, Rect::new(2, 2, 5, 4).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Bounds { .. }));
    }

    #[test]
    fn crop_composes() {
        let mut g = PatternGrid::new(10, 9, 3).unwrap();
        for i in 0..90 {
            if (i * 7) % 5 < 2 {
                g.set(i % 10, i / 10, true);
            }
        }
        let outer = Rect::new(2, 1, 9, 8).unwrap();
        let inner = Rect::new(1, 2, 5, 6).unwrap();
        let twice = crop(&crop(&g, outer).unwrap(), inner).unwrap();
        let once = crop(&g, Rect::new(3, 3, 7, 7).unwrap()).unwrap();
        assert_eq!(twice, once);
        assert_eq!(twice.pitch_nm(), 3);
    }

    #[test]
    fn split_twenty_starters() {
        let mut big = PatternGrid::new(2048, 2048, 1).unwrap();
        big.set(1000, 1000, true);
        let clips = split_starters(&big, 512, 512, 4, 5).unwrap();
        assert_eq!(clips.len(), 20);
        for (r, c) in &clips {
            assert!(r.is_within(2048, 2048));
            assert_eq!((c.width(), c.height()), (512, 512));
        }
        assert_eq!(clips[4].0.x1, 2048);
        assert_eq!(clips[19].0.y1, 2048);
    }

    #[test]
    fn mask_preservation() {
        let g = diag4();
        let mask = MaskSpec::single(Rect::new(0, 0, 2, 2).unwrap(), MaskSetId::Custom, 0);
        assert!(assert_mask_preserving(&g, &g, &mask).unwrap());

        let mut inside = g.clone();
        inside.set(1, 0, true);
        assert!(assert_mask_preserving(&g, &inside, &mask).unwrap());

        let mut outside = g.clone();
        outside.set(3, 0, true);
        assert!(!assert_mask_preserving(&g, &outside, &mask).unwrap());
        assert!(!assert_mask_preserving(&outside, &g, &mask).unwrap());

        let small = PatternGrid::new(2, 2, 1).unwrap();
        assert!(assert_mask_preserving(&g, &small, &mask).is_err());
    }

    #[test]
    fn normalize_overlapping_rects() {
        let a = Rect::new(0, 0, 4, 4).unwrap();
        let b = Rect::new(2, 2, 6, 6).unwrap();
        let m = MaskSpec::new(vec![a, b], MaskSetId::Custom, 0).unwrap();
        assert_eq!(m.area(), 16 + 16 - 4);
        for (i, r) in m.rects.iter().enumerate() {
            for s in &m.rects[i + 1..] {
                assert!(!r.intersects(s), "{r:?} overlaps {s:?}");
            }
        }
        for y in 0..7 {
            for x in 0..7 {
                assert_eq!(m.contains(x, y), a.contains(x, y) || b.contains(x, y));
            }
        }
    }

    #[test]
    fn mask_requires_rects() {
        assert!(MaskSpec::new(vec![], MaskSetId::Custom, 0).is_err());
    }

    #[test]
    fn upsample_keeps_extent() {
        let g = PatternGrid::from_rows(&[[1, 0], [0, 1]]).with_pitch(4).unwrap();
        let u = g.upsample(2).unwrap();
        assert_eq!((u.width(), u.height(), u.pitch_nm()), (4, 4, 2));
        assert_eq!(u.get(1, 1), 1);
        assert_eq!(u.get(2, 1), 0);
        assert!(g.upsample(3).is_err());
    }
}
