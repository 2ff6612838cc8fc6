//! Reference Jacobi solver for the 5-point stencil with zero Dirichlet
//! boundaries.
//!
//! The accumulation schedule is pinned: `((up + down) + left) + right`, each
//! binary add rounded to bf16, then one multiply by the edge weight. The Axpy
//! device kernel uses the identical schedule, which is what makes bit-exact
//! equivalence between the pipeline and this reference assertable.

use super::{Bf16, Bf16Grid, StencilKernel};

/// Surround the grid with a one-cell halo of zeros.
pub fn pad_with_halo(g: &Bf16Grid) -> Bf16Grid {
    let (rows, cols) = (g.rows(), g.cols());
    let mut out = vec![Bf16::ZERO; (rows + 2) * (cols + 2)];
    for r in 0..rows {
        let src = &g.data()[r * cols..(r + 1) * cols];
        let dst_off = (r + 1) * (cols + 2) + 1;
        out[dst_off..dst_off + cols].copy_from_slice(src);
    }
    Bf16Grid::from_raw(rows + 2, cols + 2, out)
}

/// One Jacobi update. Out-of-range neighbors read as zero.
pub fn jacobi_step_reference(g: &Bf16Grid, kernel: &StencilKernel) -> Bf16Grid {
    let (rows, cols) = (g.rows(), g.cols());
    let w = kernel.edge_weight();
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let up = if i > 0 { g.get(i - 1, j) } else { Bf16::ZERO };
            let down = if i + 1 < rows {
                g.get(i + 1, j)
            } else {
                Bf16::ZERO
            };
            let left = if j > 0 { g.get(i, j - 1) } else { Bf16::ZERO };
            let right = if j + 1 < cols {
                g.get(i, j + 1)
            } else {
                Bf16::ZERO
            };
            out.push(((up + down) + left + right) * w);
        }
    }
    Bf16Grid::from_raw(rows, cols, out)
}

/// Fixed-count Jacobi iteration; `iters == 0` returns the input unchanged.
pub fn jacobi_run_reference(g: &Bf16Grid, kernel: &StencilKernel, iters: usize) -> Bf16Grid {
    let mut grid = g.clone();
    for _ in 0..iters {
        grid = jacobi_step_reference(&grid, kernel);
    }
    grid
}
