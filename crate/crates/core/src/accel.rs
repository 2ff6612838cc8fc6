//! Functional and timing model of the tile accelerator: machine parameters,
//! tile distribution across cores, and the per-kernel time estimate.
//!
//! Each core's five RISC-V helpers are abstracted as a three-stage
//! Unpack -> Math -> Pack pipeline whose throughput is set by the slowest
//! stage; on-chip NoC contention is not modeled and device DRAM bandwidth is
//! the only shared resource bound.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Accelerator and host description. All rates are per second, powers in
/// watts, sizes in bytes.
///
/// Defaults describe the modeled 64-core, 1 GHz tile accelerator with 12 GB
/// of device DRAM at 288 GB/s behind a PCIe Gen4 x16 host link, plus
/// calibrated host-side throughput constants. Every field can be overridden
/// from a JSON machine file; unknown keys are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MachineSpec {
    /// Usable compute cores (the physical grid has 72, 64 usable).
    pub num_cores: u64,
    pub clock_hz: f64,
    pub dram_bw_bytes_per_s: f64,
    pub pcie_bw_per_dir_bytes_per_s: f64,
    /// Near-constant device bring-up charge per run.
    pub init_time_s: f64,
    pub sram_per_core_bytes: u64,
    pub dram_bytes: u64,
    pub power_idle_w: f64,
    /// Board power while the kernel runs (midpoint of the observed 20-24 W).
    pub power_active_w: f64,
    pub cpu_tdp_w: f64,
    /// Host-side tilize/untilize layout conversion rate, elements/s.
    pub tilize_throughput_elems_per_s: f64,
    /// Host-side buffer extraction/expansion rate, elements/s.
    pub cpu_extract_throughput_elems_per_s: f64,
    /// Modeled host baseline stencil rate, cell-updates/s.
    pub cpu_stencil_throughput_updates_per_s: f64,
    /// Pipeline stage costs, cycles per tile per operation.
    pub tile_cycles_unpack: u64,
    pub tile_cycles_math: u64,
    pub tile_cycles_pack: u64,
}

impl Default for MachineSpec {
    fn default() -> Self {
        Self {
            num_cores: 64,
            clock_hz: 1.0e9,
            dram_bw_bytes_per_s: 288.0e9,
            pcie_bw_per_dir_bytes_per_s: 31.5e9,
            init_time_s: 1.0,
            sram_per_core_bytes: 1_572_864,
            dram_bytes: 12_000_000_000,
            power_idle_w: 11.0,
            power_active_w: 22.0,
            cpu_tdp_w: 170.0,
            tilize_throughput_elems_per_s: 6.5e8,
            cpu_extract_throughput_elems_per_s: 50.0e9,
            cpu_stencil_throughput_updates_per_s: 2.07e9,
            tile_cycles_unpack: 1600,
            tile_cycles_math: 800,
            tile_cycles_pack: 800,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MachineError {
    #[error("machine field {field} must be strictly positive")]
    NonPositive { field: &'static str },
    #[error("power_active_w ({active}) must be at least power_idle_w ({idle})")]
    PowerOrdering { active: f64, idle: f64 },
}

impl MachineSpec {
    pub fn validate(&self) -> Result<(), MachineError> {
        let positives: [(&'static str, f64); 13] = [
            ("num_cores", self.num_cores as f64),
            ("clock_hz", self.clock_hz),
            ("dram_bw_bytes_per_s", self.dram_bw_bytes_per_s),
            (
                "pcie_bw_per_dir_bytes_per_s",
                self.pcie_bw_per_dir_bytes_per_s,
            ),
            ("sram_per_core_bytes", self.sram_per_core_bytes as f64),
            ("dram_bytes", self.dram_bytes as f64),
            ("power_idle_w", self.power_idle_w),
            ("cpu_tdp_w", self.cpu_tdp_w),
            (
                "tilize_throughput_elems_per_s",
                self.tilize_throughput_elems_per_s,
            ),
            (
                "cpu_extract_throughput_elems_per_s",
                self.cpu_extract_throughput_elems_per_s,
            ),
            (
                "cpu_stencil_throughput_updates_per_s",
                self.cpu_stencil_throughput_updates_per_s,
            ),
            ("tile_cycles_unpack", self.tile_cycles_unpack as f64),
            ("tile_cycles_math", self.tile_cycles_math as f64),
        ];
        for (field, v) in positives {
            if v.is_nan() || v <= 0.0 {
                return Err(MachineError::NonPositive { field });
            }
        }
        if self.tile_cycles_pack == 0 {
            return Err(MachineError::NonPositive {
                field: "tile_cycles_pack",
            });
        }
        if self.init_time_s < 0.0 {
            return Err(MachineError::NonPositive {
                field: "init_time_s",
            });
        }
        if self.power_active_w < self.power_idle_w {
            return Err(MachineError::PowerOrdering {
                active: self.power_active_w,
                idle: self.power_idle_w,
            });
        }
        Ok(())
    }
}

/// Static tile-to-core mapping for one kernel launch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoreAssignment {
    per_core: Vec<Vec<usize>>,
}

impl CoreAssignment {
    #[inline]
    pub fn cores(&self) -> &[Vec<usize>] {
        &self.per_core
    }

    pub fn assigned_tiles(&self) -> usize {
        self.per_core.iter().map(Vec::len).sum()
    }

    pub fn max_per_core(&self) -> usize {
        self.per_core.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Round-robin distribution of `tiles` across the machine's cores; no core
/// receives more than ceil(tiles / num_cores).
pub fn distribute_tiles(tiles: usize, spec: &MachineSpec) -> CoreAssignment {
    let cores = spec.num_cores as usize;
    let mut per_core = vec![Vec::new(); cores];
    for t in 0..tiles {
        per_core[t % cores].push(t);
    }
    CoreAssignment { per_core }
}

/// Per-tile stage operation counts for one kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileOpCounts {
    /// Operand tiles pulled through the unpacker per output tile.
    pub unpack_ops: u64,
    /// Math-engine tile operations per output tile.
    pub math_ops: u64,
    /// Result tiles pushed through the packer per output tile.
    pub pack_ops: u64,
}

impl TileOpCounts {
    /// Cycles one core needs per assigned tile: the pipeline is limited by
    /// its slowest stage.
    pub fn bottleneck_cycles(&self, spec: &MachineSpec) -> u64 {
        (self.unpack_ops * spec.tile_cycles_unpack)
            .max(self.math_ops * spec.tile_cycles_math)
            .max(self.pack_ops * spec.tile_cycles_pack)
    }
}

/// Kernel time for `tiles` output tiles moving `bytes_moved` through device
/// DRAM: the compute estimate and the bandwidth bound, whichever is larger.
pub fn simulate_kernel(
    tiles: usize,
    ops: &TileOpCounts,
    bytes_moved: u64,
    spec: &MachineSpec,
) -> f64 {
    let rounds = (tiles as u64).div_ceil(spec.num_cores);
    let compute_time = (rounds * ops.bottleneck_cycles(spec)) as f64 / spec.clock_hz;
    let dram_time = bytes_moved as f64 / spec.dram_bw_bytes_per_s;
    compute_time.max(dram_time)
}

/// Apply a per-tile kernel under a core assignment. Output slots are indexed
/// by tile, so the result cannot depend on assignment shape or visit order.
pub fn functional_execute<T, F>(assignment: &CoreAssignment, tiles: usize, kernel: F) -> Vec<T>
where
    T: Default + Clone,
    F: Fn(usize) -> T + Sync,
{
    let mut out = vec![T::default(); tiles];
    for core_tiles in &assignment.per_core {
        for &t in core_tiles {
            out[t] = kernel(t);
        }
    }
    out
}

/// Same contract as [`functional_execute`] but with one worker thread per
/// core. Exists so tests can demonstrate schedule independence.
pub fn functional_execute_parallel<T, F>(
    assignment: &CoreAssignment,
    tiles: usize,
    kernel: F,
) -> Vec<T>
where
    T: Default + Clone + Send,
    F: Fn(usize) -> T + Sync,
{
    let mut out = vec![T::default(); tiles];
    let mut slots: Vec<Option<&mut T>> = out.iter_mut().map(Some).collect();
    std::thread::scope(|scope| {
        let kernel = &kernel;
        for core_tiles in &assignment.per_core {
            if core_tiles.is_empty() {
                continue;
            }
            let mine: Vec<(usize, &mut T)> = core_tiles
                .iter()
                .map(|&t| (t, slots[t].take().expect("tile assigned once")))
                .collect();
            scope.spawn(move || {
                for (t, slot) in mine {
                    *slot = kernel(t);
                }
            });
        }
    });
    out
}
