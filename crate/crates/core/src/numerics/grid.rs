//! Grid and stencil containers. Grids reject non-finite values at
//! construction so every downstream invariant can assume finite fields.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Bf16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GridError {
    #[error("grid dimensions must be at least 1x1, got {rows}x{cols}")]
    EmptyGrid { rows: usize, cols: usize },
    #[error("data length {len} does not match {rows}x{cols}")]
    LengthMismatch {
        rows: usize,
        cols: usize,
        len: usize,
    },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
}

/// 2D scalar field in bfloat16, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bf16Grid {
    rows: usize,
    cols: usize,
    data: Vec<Bf16>,
}

impl Bf16Grid {
    pub fn new(rows: usize, cols: usize, data: Vec<Bf16>) -> Result<Self, GridError> {
        if rows == 0 || cols == 0 {
            return Err(GridError::EmptyGrid { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(GridError::LengthMismatch {
                rows,
                cols,
                len: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite { index });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self, GridError> {
        Self::new(rows, cols, vec![Bf16::ZERO; rows * cols])
    }

    /// Internal constructor for arithmetic results. Skips the finiteness
    /// check: IEEE closure may saturate to infinity for inputs near the
    /// format maximum, and clamping here would falsify the emulation.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<Bf16>) -> Self {
        debug_assert!(rows >= 1 && cols >= 1);
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    /// Build from f32 values, rounding each to the nearest bf16.
    pub fn from_f32s(rows: usize, cols: usize, values: &[f32]) -> Result<Self, GridError> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite { index });
        }
        Self::new(
            rows,
            cols,
            values.iter().map(|&v| Bf16::from_f32(v)).collect(),
        )
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Bf16 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Bf16) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn data(&self) -> &[Bf16] {
        &self.data
    }

    /// Bit-pattern equality, the validation unit for the Axpy pipeline.
    pub fn bits_eq(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.data == other.data
    }

    /// Largest element-wise |self - other|, computed in f64.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.to_f64() - b.to_f64()).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .map(|v| v.to_f64().abs())
            .fold(0.0, f64::max)
    }
}

/// 3x3 stencil weights, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StencilKernel {
    weights: [u16; 9],
}

impl StencilKernel {
    /// The 5-point Laplace kernel: four edge-adjacent weights of 0.25,
    /// zero corners and center.
    pub fn laplace() -> Self {
        let q = Bf16::QUARTER.to_bits();
        Self {
            weights: [0, q, 0, q, 0, q, 0, q, 0],
        }
    }

    pub fn new(weights: [f32; 9]) -> Result<Self, GridError> {
        if let Some(index) = weights.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite { index });
        }
        Ok(Self {
            weights: weights.map(|w| Bf16::from_f32(w).to_bits()),
        })
    }

    #[inline]
    pub fn weight(&self, r: usize, c: usize) -> Bf16 {
        Bf16::from_bits(self.weights[r * 3 + c])
    }

    /// Row-major flattening, the column layout of the device stencil tile.
    pub fn flatten(&self) -> [Bf16; 9] {
        self.weights.map(Bf16::from_bits)
    }

    /// The shared edge weight used by the reference update (0.25 for Laplace).
    #[inline]
    pub fn edge_weight(&self) -> Bf16 {
        self.weight(0, 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_mismatched() {
        assert_eq!(
            Bf16Grid::new(0, 4, vec![]),
            Err(GridError::EmptyGrid { rows: 0, cols: 4 })
        );
        assert_eq!(
            Bf16Grid::new(2, 2, vec![Bf16::ZERO; 3]),
            Err(GridError::LengthMismatch {
                rows: 2,
                cols: 2,
                len: 3
            })
        );
    }

    #[test]
    fn rejects_non_finite() {
        assert_eq!(
            Bf16Grid::from_f32s(1, 2, &[1.0, f32::INFINITY]),
            Err(GridError::NonFinite { index: 1 })
        );
        assert_eq!(
            Bf16Grid::new(1, 1, vec![Bf16::from_bits(0x7FC0)]),
            Err(GridError::NonFinite { index: 0 })
        );
    }

    #[test]
    fn laplace_kernel_shape() {
        let k = StencilKernel::laplace();
        for r in 0..3 {
            for c in 0..3 {
                let expect = if (r + c) % 2 == 1 { 0.25 } else { 0.0 };
                assert_eq!(k.weight(r, c).to_f32(), expect);
            }
        }
        assert_eq!(k.edge_weight(), Bf16::QUARTER);
    }

    #[test]
    fn one_by_one_is_legal() {
        let g = Bf16Grid::from_f32s(1, 1, &[0.5]).unwrap();
        assert_eq!(g.get(0, 0).to_f32(), 0.5);
    }
}
