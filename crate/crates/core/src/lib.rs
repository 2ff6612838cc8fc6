//! Functional and timing simulation of two heterogeneous CPU-accelerator
//! stencil pipelines on a 32x32-tile dataflow device.
//!
//! The device model is a 64-core tile accelerator: each core consumes 32x32
//! bfloat16 tiles through a pipelined Unpack -> Math -> Pack datapath, and the
//! host talks to it over a per-direction PCIe-class link. Two pipelines advance
//! the same 5-point Jacobi stencil:
//!
//! * [`axpy`] — the CPU extracts four shifted neighbor buffers, the device
//!   sums them element-wise and scales by a constant 0.25 tile. Data stays
//!   row-major end to end.
//! * [`matmul`] — the CPU unrolls each 3x3 neighborhood into a matrix row,
//!   converts to the device tile layout, and the device multiplies each tile
//!   by a replicated stencil-weight tile.
//!
//! Every run computes real grids in emulated bfloat16 and attaches analytic
//! phase timings ([`cost`]) and energy estimates, so model outputs can always
//! be validated against the bit-level reference solver in [`numerics`].

pub mod accel;
pub mod axpy;
pub mod cost;
pub mod harness;
pub mod matmul;
pub mod numerics;
pub mod tiling;

pub use accel::{distribute_tiles, simulate_kernel, CoreAssignment, MachineSpec, TileOpCounts};
pub use axpy::{axpy_iteration, axpy_run, ShiftedSet};
pub use cost::{
    cpu_baseline_time, end_to_end, energy, transfer_time, EnergyReport, Method, PhaseBreakdown,
    Scenario, ScenarioKind, Workload,
};
pub use harness::{
    cpu_native_run, emit_report, run, seeded_grid, sweep, ExperimentConfig, HarnessError, Report,
    ReportFormat,
};
pub use matmul::{matmul_iteration, matmul_run, StencilRowMatrix, StencilTile};
pub use numerics::{
    jacobi_run_reference, jacobi_step_reference, pad_with_halo, Bf16, Bf16Grid, StencilKernel,
};
pub use tiling::{pad_to_tiles, tilize, untilize, PaddedMatrix, TileBuffer};
