//! The MatMul pipeline: each grid point's 3x3 neighborhood is unrolled into
//! a matrix row, the rows are padded to 32 columns and tilized, and the
//! device multiplies every input tile by a replicated stencil-weight tile.
//!
//! Unlike the Axpy path this one pays for layout conversion in both
//! directions each iteration, plus a 32x expansion of the working set.
//! The math engine accumulates each 32-term dot product in single precision
//! and rounds once, so results may differ from the per-op-rounded reference
//! by up to 2^-8 per element — one bf16 last-place unit at the data's unit
//! scale.

use thiserror::Error;

use crate::accel::{distribute_tiles, functional_execute, MachineSpec};
use crate::cost::{
    energy, iteration_phases, EnergyReport, IterationPhases, Method, PhaseBreakdown, Scenario,
};
use crate::numerics::{pad_with_halo, Bf16, Bf16Grid, StencilKernel};
use crate::tiling::{tile_offset, tilize, untilize, TileBuffer, TilingError, TILE_DIM, TILE_ELEMS};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatmulError {
    #[error("padded input {rows}x{cols} has no interior cells")]
    EmptyInterior { rows: usize, cols: usize },
    #[error("input buffer must be one tile wide, got {tile_cols} tile columns")]
    NotTileColumn { tile_cols: usize },
    #[error("result has {rows} rows but the grid needs {needed}")]
    ResultTooSmall { rows: usize, needed: usize },
    #[error(transparent)]
    Tiling(#[from] TilingError),
}

/// Stencil-to-row lowering of a grid: one row per grid point holding its
/// 3x3 neighborhood, padded from 9 to 32 columns, rows padded to a tile
/// multiple. A 32x expansion of the input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StencilRowMatrix {
    n_points: usize,
    padded_rows: usize,
    data: Vec<Bf16>,
}

impl StencilRowMatrix {
    /// Logical row count: grid points.
    #[inline]
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Row count after padding to a multiple of 32.
    #[inline]
    pub fn padded_rows(&self) -> usize {
        self.padded_rows
    }

    /// Row-major `padded_rows x 32` data.
    #[inline]
    pub fn data(&self) -> &[Bf16] {
        &self.data
    }

    pub fn bytes(&self) -> u64 {
        (self.data.len() * 2) as u64
    }
}

/// Unroll each interior point's 3x3 neighborhood into a row.
///
/// Row `i*M + j` reads the window anchored at padded coordinate `(i, j)` in
/// row-major order, so the grid value itself sits at column 4 and the four
/// edge neighbors at columns 1, 3, 5, 7.
pub fn stencil_to_row(padded: &Bf16Grid) -> Result<StencilRowMatrix, MatmulError> {
    let (pr, pc) = (padded.rows(), padded.cols());
    if pr < 3 || pc < 3 {
        return Err(MatmulError::EmptyInterior { rows: pr, cols: pc });
    }
    let (n, m) = (pr - 2, pc - 2);
    let n_points = n * m;
    let padded_rows = n_points.div_ceil(TILE_DIM) * TILE_DIM;
    let mut data = vec![Bf16::ZERO; padded_rows * TILE_DIM];
    for i in 0..n {
        for j in 0..m {
            let row = (i * m + j) * TILE_DIM;
            for wr in 0..3 {
                for wc in 0..3 {
                    data[row + wr * 3 + wc] = padded.get(i + wr, j + wc);
                }
            }
        }
    }
    Ok(StencilRowMatrix {
        n_points,
        padded_rows,
        data,
    })
}

/// The iteration-invariant weight operand: the flattened 3x3 kernel padded
/// to a 32-element column and replicated across all 32 columns, stored in
/// device tile layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StencilTile {
    data: Vec<Bf16>,
}

impl StencilTile {
    /// Device-layout tile data (1024 elements).
    #[inline]
    pub fn data(&self) -> &[Bf16] {
        &self.data
    }

    /// Element at logical tile coordinate (r, c).
    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Bf16 {
        self.data[tile_offset(r, c)]
    }

    pub fn bytes(&self) -> u64 {
        (TILE_ELEMS * 2) as u64
    }
}

/// Build the stencil tile for a kernel. Constructed directly in device
/// layout; it never passes through tilize.
pub fn build_stencil_tile(kernel: &StencilKernel) -> StencilTile {
    let flat = kernel.flatten();
    let mut data = vec![Bf16::ZERO; TILE_ELEMS];
    for (r, &w) in flat.iter().enumerate() {
        for c in 0..TILE_DIM {
            data[tile_offset(r, c)] = w;
        }
    }
    StencilTile { data }
}

/// Multiply every input tile by the stencil tile: `out_k = in_k * st`.
///
/// Each output element is a 32-term dot product accumulated in f32 and
/// rounded once to bf16.
pub fn batched_tile_matmul(
    in_tiles: &TileBuffer,
    st: &StencilTile,
) -> Result<TileBuffer, MatmulError> {
    batched_tile_matmul_on(in_tiles, st, &MachineSpec::default())
}

/// [`batched_tile_matmul`] with an explicit machine, so the tile-to-core
/// distribution under test matches the timing model's.
pub fn batched_tile_matmul_on(
    in_tiles: &TileBuffer,
    st: &StencilTile,
    machine: &MachineSpec,
) -> Result<TileBuffer, MatmulError> {
    if in_tiles.tile_cols() != 1 {
        return Err(MatmulError::NotTileColumn {
            tile_cols: in_tiles.tile_cols(),
        });
    }
    let tiles = in_tiles.tile_count();
    let assignment = distribute_tiles(tiles, machine);

    // Hoist the operand into logical-layout f32 once per launch.
    let mut st_logical = [0.0f32; TILE_ELEMS];
    for r in 0..TILE_DIM {
        for c in 0..TILE_DIM {
            st_logical[r * TILE_DIM + c] = st.get(r, c).to_f32();
        }
    }

    let out_tiles = functional_execute(&assignment, tiles, |t| {
        let input = in_tiles.tile(t);
        let mut logical = [0.0f32; TILE_ELEMS];
        for r in 0..TILE_DIM {
            for c in 0..TILE_DIM {
                logical[r * TILE_DIM + c] = input[tile_offset(r, c)].to_f32();
            }
        }
        let mut out = vec![Bf16::ZERO; TILE_ELEMS];
        for r in 0..TILE_DIM {
            let row = &logical[r * TILE_DIM..(r + 1) * TILE_DIM];
            for c in 0..TILE_DIM {
                let mut acc = 0.0f32;
                for (k, &a) in row.iter().enumerate() {
                    acc += a * st_logical[k * TILE_DIM + c];
                }
                out[tile_offset(r, c)] = Bf16::from_f32(acc);
            }
        }
        out
    });

    let mut result = TileBuffer::zeros(tiles, 1);
    for (t, tile) in out_tiles.iter().enumerate() {
        result.tile_mut(t).copy_from_slice(tile);
    }
    Ok(result)
}

/// Read the grid back out of the untilized result matrix: row `i*M + j`,
/// column 0 (all 32 columns are identical because the stencil tile's
/// columns are).
pub fn extract_result(
    out_row_major: &[Bf16],
    rows: usize,
    cols: usize,
) -> Result<Bf16Grid, MatmulError> {
    let available_rows = out_row_major.len() / TILE_DIM;
    if rows * cols > available_rows {
        return Err(MatmulError::ResultTooSmall {
            rows: available_rows,
            needed: rows * cols,
        });
    }
    let data = (0..rows * cols)
        .map(|p| out_row_major[p * TILE_DIM])
        .collect();
    Ok(Bf16Grid::from_raw(rows, cols, data))
}

fn iteration_inner(
    g: &Bf16Grid,
    kernel: &StencilKernel,
    machine: &MachineSpec,
    scenario: &Scenario,
    first_iteration: bool,
) -> Result<(Bf16Grid, IterationPhases), MatmulError> {
    let (n, m) = (g.rows(), g.cols());
    let padded = pad_with_halo(g);
    let srm = stencil_to_row(&padded)?;
    let in_tiles = tilize(srm.padded_rows(), TILE_DIM, srm.data())?;
    let st = build_stencil_tile(kernel);
    let out_tiles = batched_tile_matmul_on(&in_tiles, &st, machine)?;
    let out_rm = untilize(&out_tiles, srm.padded_rows(), TILE_DIM)?;
    let grid = extract_result(&out_rm, n, m)?;

    let phases = iteration_phases(Method::Matmul, n, m, machine, scenario, first_iteration);
    Ok((grid, phases))
}

/// One pipeline iteration: lower, tilize, multiply, untilize, extract.
/// Charged as a first iteration (the stencil tile transfer is included).
pub fn matmul_iteration(
    g: &Bf16Grid,
    kernel: &StencilKernel,
    machine: &MachineSpec,
    scenario: &Scenario,
) -> Result<(Bf16Grid, IterationPhases), MatmulError> {
    iteration_inner(g, kernel, machine, scenario, true)
}

/// Iterated pipeline run. The stencil tile is built and transferred once,
/// charged to the first iteration.
pub fn matmul_run(
    g: &Bf16Grid,
    kernel: &StencilKernel,
    iterations: usize,
    machine: &MachineSpec,
    scenario: &Scenario,
) -> Result<(Bf16Grid, PhaseBreakdown, EnergyReport), MatmulError> {
    let mut grid = g.clone();
    let mut breakdown = PhaseBreakdown::new(machine.init_time_s);
    for iter in 0..iterations {
        let (next, phases) = iteration_inner(&grid, kernel, machine, scenario, iter == 0)?;
        grid = next;
        breakdown.push(phases);
    }
    let report = energy(&breakdown, machine);
    Ok((grid, breakdown, report))
}
