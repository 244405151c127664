//! Dense planes: the FOP itself and the per-plane threshold array.

use thiserror::Error;

use crate::params::HsParams;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlaneError {
    #[error("data length {got} does not match {rows}x{cols}")]
    Length { rows: u32, cols: u32, got: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: u32, col: u32 },
}

/// A filter-output plane: row-major 32-bit amplitudes, element `(i, j)` is
/// template row `i`, frequency channel `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FopPlane {
    n_rows: u32,
    n_chan: u32,
    data: Vec<f32>,
}

impl FopPlane {
    /// Wraps row-major data, rejecting length mismatches and non-finite
    /// amplitudes (the position of the first offender is reported).
    pub fn new(n_rows: u32, n_chan: u32, data: Vec<f32>) -> Result<Self, PlaneError> {
        if data.len() != n_rows as usize * n_chan as usize {
            return Err(PlaneError::Length {
                rows: n_rows,
                cols: n_chan,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(PlaneError::NonFinite {
                row: (pos / n_chan as usize) as u32,
                col: (pos % n_chan as usize) as u32,
            });
        }
        Ok(Self {
            n_rows,
            n_chan,
            data,
        })
    }

    pub fn zeros(n_rows: u32, n_chan: u32) -> Self {
        Self {
            n_rows,
            n_chan,
            data: vec![0.0; n_rows as usize * n_chan as usize],
        }
    }

    pub fn n_rows(&self) -> u32 {
        self.n_rows
    }

    pub fn n_chan(&self) -> u32 {
        self.n_chan
    }

    pub fn matches(&self, params: &HsParams) -> bool {
        self.n_rows == params.n_rows && self.n_chan == params.n_chan
    }

    #[inline]
    pub fn get(&self, i: u32, j: u32) -> f32 {
        debug_assert!(i < self.n_rows && j < self.n_chan);
        self.data[i as usize * self.n_chan as usize + j as usize]
    }

    #[inline]
    pub fn set(&mut self, i: u32, j: u32, v: f32) {
        debug_assert!(i < self.n_rows && j < self.n_chan);
        self.data[i as usize * self.n_chan as usize + j as usize] = v;
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }
}

/// Per-plane, per-row detection thresholds: element `(k, i)` is the threshold
/// applied to row `i` of harmonic plane `k` (`k` is 1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdArray {
    n_hp: u8,
    n_rows: u32,
    data: Vec<f32>,
}

impl ThresholdArray {
    pub fn new(n_hp: u8, n_rows: u32, data: Vec<f32>) -> Result<Self, PlaneError> {
        if data.len() != n_hp as usize * n_rows as usize {
            return Err(PlaneError::Length {
                rows: n_hp as u32,
                cols: n_rows,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(PlaneError::NonFinite {
                row: (pos / n_rows as usize) as u32,
                col: (pos % n_rows as usize) as u32,
            });
        }
        Ok(Self { n_hp, n_rows, data })
    }

    /// One constant threshold for every plane and row.
    pub fn uniform(n_hp: u8, n_rows: u32, value: f32) -> Self {
        Self {
            n_hp,
            n_rows,
            data: vec![value; n_hp as usize * n_rows as usize],
        }
    }

    /// Builds from a closure over (plane k, row i), k 1-based.
    pub fn from_fn(n_hp: u8, n_rows: u32, mut f: impl FnMut(u8, u32) -> f32) -> Self {
        let mut data = Vec::with_capacity(n_hp as usize * n_rows as usize);
        for k in 1..=n_hp {
            for i in 0..n_rows {
                data.push(f(k, i));
            }
        }
        Self { n_hp, n_rows, data }
    }

    pub fn n_hp(&self) -> u8 {
        self.n_hp
    }

    pub fn n_rows(&self) -> u32 {
        self.n_rows
    }

    /// Threshold for row `i` of harmonic plane `k` (1-based `k`).
    #[inline]
    pub fn get(&self, k: u8, i: u32) -> f32 {
        debug_assert!(k >= 1 && k <= self.n_hp && i < self.n_rows);
        self.data[(k as usize - 1) * self.n_rows as usize + i as usize]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}
