//! Phase-level time and energy model across PCIe, UVM, and UPM interconnect
//! scenarios.
//!
//! Per-iteration phase durations are pure arithmetic over buffer sizes, so
//! the same function feeds both the analytic [`end_to_end`] estimate and the
//! breakdowns the functional pipelines attach to their results — the byte
//! accounting cannot drift between the two paths.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::accel::{simulate_kernel, MachineSpec, TileOpCounts};
use crate::tiling::{BF16_BYTES, TILE_ELEMS};

/// Per-direction bandwidth of the modeled coherent-interconnect (UVM)
/// scenario, bytes/s.
pub const UVM_BW_PER_DIR: f64 = 450.0e9;

/// Which pipeline advances the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Host-measured multithreaded stencil baseline.
    Cpu,
    /// Shifted-submatrix extraction + element-wise device kernel.
    Axpy,
    /// Stencil-to-row lowering + batched tile matrix multiply.
    Matmul,
}

impl Method {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cpu" => Some(Self::Cpu),
            "axpy" => Some(Self::Axpy),
            "matmul" => Some(Self::Matmul),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Cpu => "cpu",
            Self::Axpy => "axpy",
            Self::Matmul => "matmul",
        }
    }

    /// Per-output-tile stage work of this method's device kernel.
    pub fn tile_ops(self) -> TileOpCounts {
        match self {
            // Four operand tiles in, three adds plus one scale, one tile out.
            Self::Axpy => TileOpCounts {
                unpack_ops: 4,
                math_ops: 4,
                pack_ops: 1,
            },
            // One operand tile in (the stencil tile stays resident) and one
            // tile out; the full 32x32x32 multiply costs three math-stage
            // units under the default calibration.
            Self::Matmul => TileOpCounts {
                unpack_ops: 1,
                math_ops: 3,
                pack_ops: 1,
            },
            Self::Cpu => TileOpCounts {
                unpack_ops: 0,
                math_ops: 0,
                pack_ops: 0,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Pcie,
    Uvm,
    Upm,
}

impl ScenarioKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pcie" => Some(Self::Pcie),
            "uvm" => Some(Self::Uvm),
            "upm" => Some(Self::Upm),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Pcie => "pcie",
            Self::Uvm => "uvm",
            Self::Upm => "upm",
        }
    }
}

/// Interconnect model: link bandwidth plus what a unified memory elides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Per-direction bandwidth, bytes/s. Unused when transfers are elided.
    pub bw_per_dir: f64,
    /// Unified physical memory: host and device share pages, no copies.
    pub elide_transfers: bool,
    /// Unified physical memory also removes layout conversions.
    pub elide_conversions: bool,
}

impl Scenario {
    pub fn from_kind(kind: ScenarioKind, machine: &MachineSpec) -> Self {
        match kind {
            ScenarioKind::Pcie => Self {
                kind,
                bw_per_dir: machine.pcie_bw_per_dir_bytes_per_s,
                elide_transfers: false,
                elide_conversions: false,
            },
            ScenarioKind::Uvm => Self {
                kind,
                bw_per_dir: UVM_BW_PER_DIR,
                elide_transfers: false,
                elide_conversions: false,
            },
            ScenarioKind::Upm => Self {
                kind,
                bw_per_dir: f64::INFINITY,
                elide_transfers: true,
                elide_conversions: true,
            },
        }
    }

    pub fn pcie(machine: &MachineSpec) -> Self {
        Self::from_kind(ScenarioKind::Pcie, machine)
    }

    pub fn uvm(machine: &MachineSpec) -> Self {
        Self::from_kind(ScenarioKind::Uvm, machine)
    }

    pub fn upm(machine: &MachineSpec) -> Self {
        Self::from_kind(ScenarioKind::Upm, machine)
    }
}

/// Seconds to move `bytes` one way across the host-device link.
pub fn transfer_time(bytes: u64, scenario: &Scenario) -> f64 {
    if scenario.elide_transfers {
        0.0
    } else {
        bytes as f64 / scenario.bw_per_dir
    }
}

/// One experiment point: a method applied to a square grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Workload {
    pub method: Method,
    pub size: usize,
    pub iterations: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error(
        "{method} at {size}x{size} needs {required} B of device {resource} but only {available} B \
         are installed"
    )]
    Capacity {
        method: &'static str,
        size: usize,
        resource: &'static str,
        required: u64,
        available: u64,
    },
}

/// Modeled durations and traffic of a single pipeline iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationPhases {
    pub cpu_preprocess_s: f64,
    /// Portion of `cpu_preprocess_s` spent in tilize/untilize conversions.
    pub cpu_conversion_s: f64,
    pub h2d_s: f64,
    pub kernel_s: f64,
    pub d2h_s: f64,
    pub h2d_bytes: u64,
    pub d2h_bytes: u64,
    pub tiles: u64,
    pub tilize_calls: u32,
    pub untilize_calls: u32,
}

impl IterationPhases {
    pub fn non_init_s(&self) -> f64 {
        self.cpu_preprocess_s + self.h2d_s + self.kernel_s + self.d2h_s
    }
}

/// End-to-end decomposition: one init charge plus per-iteration phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseBreakdown {
    pub init_s: f64,
    pub iterations: Vec<IterationPhases>,
}

/// Phase sums over a whole run, the unit reports are built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseTotals {
    pub init_s: f64,
    pub cpu_preprocess_s: f64,
    pub cpu_conversion_s: f64,
    pub h2d_s: f64,
    pub kernel_s: f64,
    pub d2h_s: f64,
    pub total_s: f64,
}

impl PhaseBreakdown {
    pub fn new(init_s: f64) -> Self {
        Self {
            init_s,
            iterations: Vec::new(),
        }
    }

    pub fn push(&mut self, phases: IterationPhases) {
        self.iterations.push(phases);
    }

    pub fn totals(&self) -> PhaseTotals {
        let mut t = PhaseTotals {
            init_s: self.init_s,
            cpu_preprocess_s: 0.0,
            cpu_conversion_s: 0.0,
            h2d_s: 0.0,
            kernel_s: 0.0,
            d2h_s: 0.0,
            total_s: 0.0,
        };
        for it in &self.iterations {
            t.cpu_preprocess_s += it.cpu_preprocess_s;
            t.cpu_conversion_s += it.cpu_conversion_s;
            t.h2d_s += it.h2d_s;
            t.kernel_s += it.kernel_s;
            t.d2h_s += it.d2h_s;
        }
        t.total_s = t.init_s + t.cpu_preprocess_s + t.h2d_s + t.kernel_s + t.d2h_s;
        t
    }

    pub fn total_s(&self) -> f64 {
        self.totals().total_s
    }

    pub fn kernel_total_s(&self) -> f64 {
        self.totals().kernel_s
    }

    pub fn h2d_bytes_total(&self) -> u64 {
        self.iterations.iter().map(|i| i.h2d_bytes).sum()
    }

    pub fn d2h_bytes_total(&self) -> u64 {
        self.iterations.iter().map(|i| i.d2h_bytes).sum()
    }

    pub fn tilize_calls_total(&self) -> u64 {
        self.iterations.iter().map(|i| i.tilize_calls as u64).sum()
    }

    pub fn untilize_calls_total(&self) -> u64 {
        self.iterations
            .iter()
            .map(|i| i.untilize_calls as u64)
            .sum()
    }
}

/// Buffer element count of one Axpy shifted submatrix for an `rows x cols`
/// grid: the logical size padded up to whole tiles.
pub fn axpy_padded_elems(rows: usize, cols: usize) -> u64 {
    ((rows * cols) as u64).div_ceil(TILE_ELEMS as u64) * TILE_ELEMS as u64
}

/// Row count of the stencil-row matrix, padded to a tile multiple.
pub fn matmul_padded_rows(rows: usize, cols: usize) -> u64 {
    ((rows * cols) as u64).div_ceil(32) * 32
}

/// Element count of the expanded stencil-row matrix (32 columns per point).
pub fn matmul_expanded_elems(rows: usize, cols: usize) -> u64 {
    matmul_padded_rows(rows, cols) * 32
}

/// Device-resident bytes a method needs for an `rows x cols` grid.
pub fn device_footprint_bytes(method: Method, rows: usize, cols: usize) -> u64 {
    let b = BF16_BYTES as u64;
    match method {
        // Four input buffers plus the output buffer.
        Method::Axpy => 5 * axpy_padded_elems(rows, cols) * b,
        // Input tiles, output tiles, and the resident stencil tile.
        Method::Matmul => (2 * matmul_expanded_elems(rows, cols) + TILE_ELEMS as u64) * b,
        Method::Cpu => 0,
    }
}

fn check_feasible(
    method: Method,
    size: usize,
    rows: usize,
    cols: usize,
    machine: &MachineSpec,
) -> Result<(), ModelError> {
    let required = device_footprint_bytes(method, rows, cols);
    if required > machine.dram_bytes {
        return Err(ModelError::Capacity {
            method: method.name(),
            size,
            resource: "DRAM",
            required,
            available: machine.dram_bytes,
        });
    }
    Ok(())
}

/// Modeled phases of one iteration on an `rows x cols` grid.
///
/// `first_iteration` matters only for MatMul, whose iteration-invariant
/// stencil tile is transferred once and charged to the first iteration.
pub fn iteration_phases(
    method: Method,
    rows: usize,
    cols: usize,
    machine: &MachineSpec,
    scenario: &Scenario,
    first_iteration: bool,
) -> IterationPhases {
    let b = BF16_BYTES as u64;
    match method {
        Method::Cpu => IterationPhases {
            cpu_preprocess_s: (rows * cols) as f64 / machine.cpu_stencil_throughput_updates_per_s,
            cpu_conversion_s: 0.0,
            h2d_s: 0.0,
            kernel_s: 0.0,
            d2h_s: 0.0,
            h2d_bytes: 0,
            d2h_bytes: 0,
            tiles: 0,
            tilize_calls: 0,
            untilize_calls: 0,
        },
        Method::Axpy => {
            let padded = axpy_padded_elems(rows, cols);
            let tiles = padded / TILE_ELEMS as u64;
            let h2d_bytes = 4 * padded * b;
            let d2h_bytes = padded * b;
            let dram_bytes = 5 * padded * b;
            IterationPhases {
                cpu_preprocess_s: (4 * padded) as f64 / machine.cpu_extract_throughput_elems_per_s,
                cpu_conversion_s: 0.0,
                h2d_s: transfer_time(h2d_bytes, scenario),
                kernel_s: simulate_kernel(
                    tiles as usize,
                    &Method::Axpy.tile_ops(),
                    dram_bytes,
                    machine,
                ),
                d2h_s: transfer_time(d2h_bytes, scenario),
                h2d_bytes,
                d2h_bytes,
                tiles,
                tilize_calls: 0,
                untilize_calls: 0,
            }
        }
        Method::Matmul => {
            let points = (rows * cols) as u64;
            let expanded = matmul_expanded_elems(rows, cols);
            let tiles = expanded / TILE_ELEMS as u64;
            let stencil_tile_bytes = if first_iteration {
                TILE_ELEMS as u64 * b
            } else {
                0
            };
            let h2d_bytes = expanded * b + stencil_tile_bytes;
            let d2h_bytes = expanded * b;
            let dram_bytes = (2 * expanded + TILE_ELEMS as u64) * b;

            let conversion_s = if scenario.elide_conversions {
                0.0
            } else {
                // One tilize of the expanded matrix plus one untilize of the
                // equally sized result.
                (2 * expanded) as f64 / machine.tilize_throughput_elems_per_s
            };
            let expand_s = expanded as f64 / machine.cpu_extract_throughput_elems_per_s;
            let extract_s = points as f64 / machine.cpu_extract_throughput_elems_per_s;

            IterationPhases {
                cpu_preprocess_s: expand_s + conversion_s + extract_s,
                cpu_conversion_s: conversion_s,
                h2d_s: transfer_time(h2d_bytes, scenario),
                kernel_s: simulate_kernel(
                    tiles as usize,
                    &Method::Matmul.tile_ops(),
                    dram_bytes,
                    machine,
                ),
                d2h_s: transfer_time(d2h_bytes, scenario),
                h2d_bytes,
                d2h_bytes,
                tiles,
                tilize_calls: 1,
                untilize_calls: 1,
            }
        }
    }
}

/// Analytic end-to-end breakdown for a workload: one init charge plus the
/// per-iteration phases. Refuses configurations that exceed device DRAM.
pub fn end_to_end(
    workload: &Workload,
    machine: &MachineSpec,
    scenario: &Scenario,
) -> Result<PhaseBreakdown, ModelError> {
    check_feasible(
        workload.method,
        workload.size,
        workload.size,
        workload.size,
        machine,
    )?;
    let init_s = if workload.method == Method::Cpu {
        0.0
    } else {
        machine.init_time_s
    };
    let mut breakdown = PhaseBreakdown::new(init_s);
    for iter in 0..workload.iterations {
        breakdown.push(iteration_phases(
            workload.method,
            workload.size,
            workload.size,
            machine,
            scenario,
            iter == 0,
        ));
    }
    Ok(breakdown)
}

/// Modeled wall time of the host baseline stencil.
pub fn cpu_baseline_time(size: usize, iterations: usize, machine: &MachineSpec) -> f64 {
    (size * size * iterations) as f64 / machine.cpu_stencil_throughput_updates_per_s
}

/// Runtime x power energy estimate, split by who was burning the watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub device_j: f64,
    pub host_j: f64,
    pub total_j: f64,
    /// Device energy while the kernel was actually running.
    pub device_kernel_j: f64,
    /// Device idle draw over init, preprocessing, and transfers.
    pub device_idle_j: f64,
    pub host_preprocess_j: f64,
    pub host_transfer_j: f64,
}

/// Energy for an accelerator run.
///
/// The device draws active power during kernels and idle power for all other
/// wall time; the host is charged TDP for the phases it actively drives
/// (preprocessing and both transfer directions).
pub fn energy(breakdown: &PhaseBreakdown, machine: &MachineSpec) -> EnergyReport {
    let t = breakdown.totals();
    let device_kernel_j = t.kernel_s * machine.power_active_w;
    let device_idle_j = (t.init_s + t.cpu_preprocess_s + t.h2d_s + t.d2h_s) * machine.power_idle_w;
    let host_preprocess_j = t.cpu_preprocess_s * machine.cpu_tdp_w;
    let host_transfer_j = (t.h2d_s + t.d2h_s) * machine.cpu_tdp_w;
    let device_j = device_kernel_j + device_idle_j;
    let host_j = host_preprocess_j + host_transfer_j;
    EnergyReport {
        device_j,
        host_j,
        total_j: device_j + host_j,
        device_kernel_j,
        device_idle_j,
        host_preprocess_j,
        host_transfer_j,
    }
}

impl EnergyReport {
    /// Energy of a host-only baseline run: no device attached.
    pub fn cpu_only(wall_s: f64, machine: &MachineSpec) -> Self {
        let host = wall_s * machine.cpu_tdp_w;
        Self {
            device_j: 0.0,
            host_j: host,
            total_j: host,
            device_kernel_j: 0.0,
            device_idle_j: 0.0,
            host_preprocess_j: host,
            host_transfer_j: 0.0,
        }
    }
}
