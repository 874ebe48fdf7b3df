use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Position of a processor in the logical grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ProcCoord {
    pub r: usize,
    pub c: usize,
}

impl ProcCoord {
    pub const fn new(r: usize, c: usize) -> Self {
        Self { r, c }
    }
}

impl fmt::Display for ProcCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p({},{})", self.r, self.c)
    }
}

/// A `rows × cols` arrangement of processors, ranked row by row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ProcGrid {
    rows: usize,
    cols: usize,
}

impl ProcGrid {
    /// The `√p × √p` grid used by the 2D algorithms.
    pub fn square(p: usize) -> Result<Self> {
        let side = exact_sqrt(p)
            .ok_or_else(|| Error::Config(format!("{p} processors do not form a square grid")))?;
        Ok(Self {
            rows: side,
            cols: side,
        })
    }

    /// A single row of `p` processors.
    pub fn ring(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::Config("processor count must be positive".into()));
        }
        Ok(Self { rows: 1, cols: p })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn p(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Side length of a square grid.
    pub fn side(&self) -> usize {
        debug_assert!(self.is_square());
        self.rows
    }

    pub fn rank(&self, at: ProcCoord) -> usize {
        debug_assert!(self.contains(at));
        at.r * self.cols + at.c
    }

    pub fn coord(&self, rank: usize) -> ProcCoord {
        ProcCoord::new(rank / self.cols, rank % self.cols)
    }

    pub fn contains(&self, at: ProcCoord) -> bool {
        at.r < self.rows && at.c < self.cols
    }

    pub fn coords(&self) -> impl Iterator<Item = ProcCoord> + '_ {
        (0..self.p()).map(|k| self.coord(k))
    }

    /// Members of row `r`, ordered by column.
    pub fn row_group(&self, r: usize) -> Vec<ProcCoord> {
        (0..self.cols).map(|c| ProcCoord::new(r, c)).collect()
    }

    /// Members of column `c`, ordered by row.
    pub fn col_group(&self, c: usize) -> Vec<ProcCoord> {
        (0..self.rows).map(|r| ProcCoord::new(r, c)).collect()
    }
}

/// Integer square root when `p` is a perfect square.
pub fn exact_sqrt(p: usize) -> Option<usize> {
    if p == 0 {
        return None;
    }
    let mut s = (p as f64).sqrt() as usize;
    while s * s > p {
        s -= 1;
    }
    while (s + 1) * (s + 1) <= p {
        s += 1;
    }
    (s * s == p).then_some(s)
}
