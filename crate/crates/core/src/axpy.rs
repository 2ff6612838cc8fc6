//! The Axpy pipeline: the host extracts four shifted neighbor buffers, the
//! device sums them element-wise and scales by a constant 0.25 tile.
//!
//! Data stays row-major end to end — element-wise math is layout-agnostic,
//! so this path never touches tilize/untilize. The only device requirement
//! is that buffer lengths are whole-tile multiples.
//!
//! The device kernel rounds after every binary operation, the same schedule
//! the reference solver pins, so each iteration's grid is bit-identical to
//! `jacobi_step_reference`.

use thiserror::Error;

use crate::accel::{distribute_tiles, functional_execute, MachineSpec};
use crate::cost::{
    energy, iteration_phases, EnergyReport, IterationPhases, Method, PhaseBreakdown, Scenario,
};
use crate::numerics::{Bf16, Bf16Grid, StencilKernel};
use crate::tiling::TILE_ELEMS;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AxpyError {
    #[error("padded input {rows}x{cols} has no interior cells")]
    EmptyInterior { rows: usize, cols: usize },
}

/// The four shifted neighbor buffers of one iteration, each padded with
/// zeros to a whole number of tiles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftedSet {
    pub up: Vec<Bf16>,
    pub down: Vec<Bf16>,
    pub left: Vec<Bf16>,
    pub right: Vec<Bf16>,
    logical_elems: usize,
}

impl ShiftedSet {
    #[inline]
    pub fn logical_elems(&self) -> usize {
        self.logical_elems
    }

    /// Buffer length, identical across the four buffers.
    #[inline]
    pub fn padded_elems(&self) -> usize {
        self.up.len()
    }

    pub fn tile_count(&self) -> usize {
        self.padded_elems() / TILE_ELEMS
    }
}

/// The constant 0.25 operand, materialized as a full tile because the math
/// engine has no scalar broadcast.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuarterTile {
    data: Vec<Bf16>,
}

impl QuarterTile {
    pub fn new() -> Self {
        Self {
            data: vec![Bf16::QUARTER; TILE_ELEMS],
        }
    }

    #[inline]
    pub fn data(&self) -> &[Bf16] {
        &self.data
    }
}

impl Default for QuarterTile {
    fn default() -> Self {
        Self::new()
    }
}

fn padded_len(logical: usize) -> usize {
    logical.div_ceil(TILE_ELEMS) * TILE_ELEMS
}

/// Extract the four neighbor buffers from a halo-padded `(N+2) x (M+2)` grid.
///
/// For interior cell `(i, j)`: `up` holds the value one row above, `down` one
/// row below, `left` one column left, `right` one column right, flattened to
/// index `i*M + j` and zero-padded to tile length.
pub fn extract_shifted(padded: &Bf16Grid) -> Result<ShiftedSet, AxpyError> {
    let (pr, pc) = (padded.rows(), padded.cols());
    if pr < 3 || pc < 3 {
        return Err(AxpyError::EmptyInterior { rows: pr, cols: pc });
    }
    let (n, m) = (pr - 2, pc - 2);
    let len = padded_len(n * m);
    let mut set = ShiftedSet {
        up: vec![Bf16::ZERO; len],
        down: vec![Bf16::ZERO; len],
        left: vec![Bf16::ZERO; len],
        right: vec![Bf16::ZERO; len],
        logical_elems: n * m,
    };
    for i in 0..n {
        for j in 0..m {
            let k = i * m + j;
            set.up[k] = padded.get(i, j + 1);
            set.down[k] = padded.get(i + 2, j + 1);
            set.left[k] = padded.get(i + 1, j);
            set.right[k] = padded.get(i + 1, j + 2);
        }
    }
    Ok(set)
}

/// Padding and extraction fused into one pass over the interior grid;
/// bit-identical to `extract_shifted(pad_with_halo(g))` with no materialized
/// halo.
pub fn fused_pad_extract(g: &Bf16Grid) -> ShiftedSet {
    let (n, m) = (g.rows(), g.cols());
    let len = padded_len(n * m);
    let mut set = ShiftedSet {
        up: vec![Bf16::ZERO; len],
        down: vec![Bf16::ZERO; len],
        left: vec![Bf16::ZERO; len],
        right: vec![Bf16::ZERO; len],
        logical_elems: n * m,
    };
    for i in 0..n {
        for j in 0..m {
            let k = i * m + j;
            if i > 0 {
                set.up[k] = g.get(i - 1, j);
            }
            if i + 1 < n {
                set.down[k] = g.get(i + 1, j);
            }
            if j > 0 {
                set.left[k] = g.get(i, j - 1);
            }
            if j + 1 < m {
                set.right[k] = g.get(i, j + 1);
            }
        }
    }
    set
}

/// The device tile kernel: `out = (((u + d) + l) + r) * q` element-wise,
/// every binary operation rounded to bf16.
pub fn axpy_tile_kernel(
    u: &[Bf16],
    d: &[Bf16],
    l: &[Bf16],
    r: &[Bf16],
    q: &QuarterTile,
) -> Vec<Bf16> {
    debug_assert_eq!(u.len(), TILE_ELEMS);
    debug_assert_eq!(d.len(), TILE_ELEMS);
    debug_assert_eq!(l.len(), TILE_ELEMS);
    debug_assert_eq!(r.len(), TILE_ELEMS);
    (0..TILE_ELEMS)
        .map(|e| (((u[e] + d[e]) + l[e]) + r[e]) * q.data[e])
        .collect()
}

/// One pipeline iteration: extract, transfer, run the tile kernel on every
/// core, transfer back. Returns the advanced grid and the modeled phases.
pub fn axpy_iteration(
    g: &Bf16Grid,
    machine: &MachineSpec,
    scenario: &Scenario,
) -> (Bf16Grid, IterationPhases) {
    let (n, m) = (g.rows(), g.cols());
    let shifted = fused_pad_extract(g);
    let tiles = shifted.tile_count();
    let assignment = distribute_tiles(tiles, machine);
    let quarter = QuarterTile::new();

    let out_tiles = functional_execute(&assignment, tiles, |t| {
        let lo = t * TILE_ELEMS;
        let hi = lo + TILE_ELEMS;
        axpy_tile_kernel(
            &shifted.up[lo..hi],
            &shifted.down[lo..hi],
            &shifted.left[lo..hi],
            &shifted.right[lo..hi],
            &quarter,
        )
    });

    let mut result = Vec::with_capacity(shifted.padded_elems());
    for tile in out_tiles {
        result.extend_from_slice(&tile);
    }
    debug_assert!(result[n * m..].iter().all(|v| v.to_bits() == 0));
    result.truncate(n * m);
    let grid = Bf16Grid::from_raw(n, m, result);

    let phases = iteration_phases(Method::Axpy, n, m, machine, scenario, true);
    (grid, phases)
}

/// Iterated pipeline run with one device-init charge and an energy estimate.
/// The returned grid is bit-identical to the reference solver's.
///
/// The kernel argument documents the stencil being advanced; the device
/// kernel itself is the fixed 0.25-scaled neighbor sum.
pub fn axpy_run(
    g: &Bf16Grid,
    _kernel: &StencilKernel,
    iterations: usize,
    machine: &MachineSpec,
    scenario: &Scenario,
) -> (Bf16Grid, PhaseBreakdown, EnergyReport) {
    let mut grid = g.clone();
    let mut breakdown = PhaseBreakdown::new(machine.init_time_s);
    for _ in 0..iterations {
        let (next, phases) = axpy_iteration(&grid, machine, scenario);
        grid = next;
        breakdown.push(phases);
    }
    let report = energy(&breakdown, machine);
    (grid, breakdown, report)
}
