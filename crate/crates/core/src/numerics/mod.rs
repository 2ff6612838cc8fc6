//! Emulated bfloat16 arithmetic, the grid container, and the reference
//! Jacobi solver that both device pipelines are validated against.

mod bf16;
mod grid;
mod jacobi;

pub use bf16::Bf16;
pub use grid::{Bf16Grid, GridError, StencilKernel};
pub use jacobi::{jacobi_run_reference, jacobi_step_reference, pad_with_halo};
