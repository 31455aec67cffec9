//! Squish representation: topology matrix plus Δx/Δy scan-line spacings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PatternGrid;

/// Scan-line positions in pixels, both borders included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanLineSet {
    pub xs: Vec<usize>,
    pub ys: Vec<usize>,
}

/// Binary cell matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Topology {
    rows: usize,
    cols: usize,
    cells: Vec<u8>,
}

impl Topology {
    pub fn new(rows: usize, cols: usize, cells: Vec<u8>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput("topology must be non-empty".into()));
        }
        if cells.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} cells for a {rows}x{cols} topology",
                cells.len()
            )));
        }
        if cells.iter().any(|&c| c > 1) {
            return Err(Error::InvalidInput("topology cells must be 0 or 1".into()));
        }
        Ok(Self { rows, cols, cells })
    }

    pub fn from_nested(rows: &[Vec<u8>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged topology rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.cells[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<u8> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    pub fn transpose(&self) -> Topology {
        let mut cells = Vec::with_capacity(self.cells.len());
        for c in 0..self.cols {
            cells.extend(self.column(c));
        }
        Topology {
            rows: self.cols,
            cols: self.rows,
            cells,
        }
    }

    pub fn to_nested(&self) -> Vec<Vec<u8>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    /// No two adjacent rows and no two adjacent columns are identical.
    pub fn is_minimal(&self) -> bool {
        let rows_ok = (1..self.rows).all(|r| self.row(r) != self.row(r - 1));
        let cols_ok = (1..self.cols).all(|c| (0..self.rows).any(|r| self.get(r, c) != self.get(r, c - 1)));
        rows_ok && cols_ok
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SquishJson", into = "SquishJson")]
pub struct SquishPattern {
    pub topology: Topology,
    pub delta_x: Vec<u64>,
    pub delta_y: Vec<u64>,
}

/// On-disk layout: `{"topology": [[..]], "delta_x_nm": [..], "delta_y_nm": [..]}`.
#[derive(Serialize, Deserialize)]
struct SquishJson {
    topology: Vec<Vec<u8>>,
    delta_x_nm: Vec<u64>,
    delta_y_nm: Vec<u64>,
}

impl TryFrom<SquishJson> for SquishPattern {
    type Error = Error;

    fn try_from(j: SquishJson) -> Result<Self> {
        SquishPattern::new(Topology::from_nested(&j.topology)?, j.delta_x_nm, j.delta_y_nm)
    }
}

impl From<SquishPattern> for SquishJson {
    fn from(s: SquishPattern) -> Self {
        SquishJson {
            topology: s.topology.to_nested(),
            delta_x_nm: s.delta_x,
            delta_y_nm: s.delta_y,
        }
    }
}

impl SquishPattern {
    pub fn new(topology: Topology, delta_x: Vec<u64>, delta_y: Vec<u64>) -> Result<Self> {
        if delta_x.len() != topology.cols() || delta_y.len() != topology.rows() {
            return Err(Error::DimensionMismatch(format!(
                "topology {}x{} with {} dx / {} dy",
                topology.rows(),
                topology.cols(),
                delta_x.len(),
                delta_y.len()
            )));
        }
        if delta_x.iter().chain(&delta_y).any(|&d| d == 0) {
            return Err(Error::InvalidInput("deltas must be positive".into()));
        }
        Ok(Self {
            topology,
            delta_x,
            delta_y,
        })
    }

    pub fn physical_width(&self) -> u64 {
        self.delta_x.iter().sum()
    }

    pub fn physical_height(&self) -> u64 {
        self.delta_y.iter().sum()
    }
}

/// `(Cx, Cy)`: scan-line counts per axis minus one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ComplexityTuple {
    pub cx: usize,
    pub cy: usize,
}

/// x positions where the column differs from its left neighbour, plus borders.
pub fn column_lines(grid: &PatternGrid) -> Vec<usize> {
    let (w, h) = (grid.width(), grid.height());
    let mut xs = vec![0];
    for x in 1..w {
        if (0..h).any(|y| grid.get(x, y) != grid.get(x - 1, y)) {
            xs.push(x);
        }
    }
    xs.push(w);
    xs
}

/// y positions where the row differs from the row above, plus borders.
pub fn row_lines(grid: &PatternGrid) -> Vec<usize> {
    let h = grid.height();
    let mut ys = vec![0];
    for y in 1..h {
        if grid.row(y) != grid.row(y - 1) {
            ys.push(y);
        }
    }
    ys.push(h);
    ys
}

pub fn extract_scan_lines(grid: &PatternGrid) -> ScanLineSet {
    ScanLineSet {
        xs: column_lines(grid),
        ys: row_lines(grid),
    }
}

pub fn encode(grid: &PatternGrid) -> SquishPattern {
    let ScanLineSet { xs, ys } = extract_scan_lines(grid);
    let pitch = grid.pitch_nm() as u64;
    let (cols, rows) = (xs.len() - 1, ys.len() - 1);
    let mut cells = Vec::with_capacity(rows * cols);
    for &y in &ys[..rows] {
        for &x in &xs[..cols] {
            cells.push(grid.get(x, y));
        }
    }
    SquishPattern {
        topology: Topology { rows, cols, cells },
        delta_x: xs.windows(2).map(|w| (w[1] - w[0]) as u64 * pitch).collect(),
        delta_y: ys.windows(2).map(|w| (w[1] - w[0]) as u64 * pitch).collect(),
    }
}

/// Expands every topology cell into a pixel block of its value.
pub fn decode(sq: &SquishPattern, pitch_nm: u32) -> Result<PatternGrid> {
    if pitch_nm == 0 {
        return Err(Error::InvalidInput("pitch_nm must be positive".into()));
    }
    let pitch = pitch_nm as u64;
    let to_px = |d: u64, axis: &str, i: usize| -> Result<usize> {
        if !d.is_multiple_of(pitch) {
            return Err(Error::Quantization(format!(
                "delta_{axis}[{i}] = {d} nm is not a multiple of pitch {pitch} nm"
            )));
        }
        Ok((d / pitch) as usize)
    };
    let wx = sq
        .delta_x
        .iter()
        .enumerate()
        .map(|(i, &d)| to_px(d, "x", i))
        .collect::<Result<Vec<_>>>()?;
    let wy = sq
        .delta_y
        .iter()
        .enumerate()
        .map(|(i, &d)| to_px(d, "y", i))
        .collect::<Result<Vec<_>>>()?;
    let width: usize = wx.iter().sum();
    let height: usize = wy.iter().sum();
    let mut pixels = Vec::with_capacity(width * height);
    for (r, &hy) in wy.iter().enumerate() {
        let mut line = Vec::with_capacity(width);
        for (c, &wc) in wx.iter().enumerate() {
            line.extend(std::iter::repeat_n(sq.topology.get(r, c), wc));
        }
        for _ in 0..hy {
            pixels.extend_from_slice(&line);
        }
    }
    PatternGrid::from_pixels(width, height, pixels, pitch_nm)
}

pub fn complexity(sq: &SquishPattern) -> ComplexityTuple {
    ComplexityTuple {
        cx: sq.topology.cols(),
        cy: sq.topology.rows(),
    }
}
