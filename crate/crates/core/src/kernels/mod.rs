//! Benchmark kernel generators at desk scale, each shipping mini-assembly
//! source, seeded input data, and an independent scalar golden reference.
//!
//! Input data comes from a splitmix64 chain (documented in the README) so
//! golden data is reproducible across implementations from the seed alone.

mod conv2d;
mod dropout;
mod gemv;
mod jacobi;
mod matmul;
mod phaserot;

pub use conv2d::{build_conv2d, build_conv2d_with};
pub use dropout::{build_dropout, build_dropout_with};
pub use gemv::{build_gemv, build_gemv_with};
pub use jacobi::{build_jacobi2d, build_jacobi2d_with};
pub use matmul::{build_matmul_tiled, build_matmul_tiled_with};
pub use phaserot::build_phase_rotation;

use std::fmt;
use std::ops::RangeInclusive;

use crate::asm::{parse, DataSegment, Program};
use crate::config::ValidatedConfig;

/// Default seed for kernel input generation.
pub const DEFAULT_SEED: u64 = 42;

/// Kernel registry, in report order.
pub const KERNEL_NAMES: &[&str] = &[
    "gemv",
    "dropout",
    "jacobi2d",
    "matmul_tiled",
    "conv2d",
    "phase_rotation",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KernelError {
    BadDims(String),
    UnknownKernel(String),
}

impl fmt::Display for KernelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelError::BadDims(m) => write!(f, "bad kernel dimensions: {m}"),
            KernelError::UnknownKernel(m) => write!(f, "unknown kernel {m:?}"),
        }
    }
}

impl std::error::Error for KernelError {}

/// A ready-to-run benchmark kernel.
pub struct KernelCase {
    pub name: String,
    /// Self-contained mini-assembly source (code plus `.data` directives).
    pub source: String,
    pub program: Program,
    /// Expected output-region bytes, computed by the scalar reference.
    pub golden: Vec<u8>,
    pub output_addr: usize,
    pub problem_size: String,
    /// Static active-register target, from the workload's register budget.
    pub expected_active_registers: RangeInclusive<usize>,
}

impl KernelCase {
    pub fn inputs(&self) -> &[DataSegment] {
        &self.program.data_segments
    }

    pub fn output_len(&self) -> usize {
        self.golden.len()
    }

    /// Extracts the kernel's output region from a final memory image.
    pub fn output_of<'a>(&self, memory: &'a [u8]) -> &'a [u8] {
        &memory[self.output_addr..self.output_addr + self.golden.len()]
    }
}

/// Builds a kernel by registry name at its default desk-scale size.
pub fn build_kernel(
    name: &str,
    cfg: &ValidatedConfig,
    seed: u64,
) -> Result<KernelCase, KernelError> {
    match name {
        "gemv" => build_gemv(cfg, 64, 64, seed),
        "dropout" => build_dropout(cfg, 4096, 3, seed),
        "jacobi2d" => build_jacobi2d(cfg, 32, 4, seed),
        "matmul_tiled" => build_matmul_tiled(cfg, 16, 64, 32, seed),
        "conv2d" => build_conv2d(cfg, 32, 32, 7, seed),
        "phase_rotation" => build_phase_rotation(cfg, seed),
        other => Err(KernelError::UnknownKernel(other.to_string())),
    }
}

/// All registry kernels at desk scale.
pub fn all_kernels(cfg: &ValidatedConfig, seed: u64) -> Result<Vec<KernelCase>, KernelError> {
    KERNEL_NAMES
        .iter()
        .map(|n| build_kernel(n, cfg, seed))
        .collect()
}

/// splitmix64 step: the documented input-data generator.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Small signed integers in [-100, 100], keeping golden values readable.
pub fn rand_i32_small(state: &mut u64) -> i32 {
    (splitmix64(state) % 201) as i32 - 100
}

/// Uniform f32 in [0, 1) with 24 mantissa bits.
pub fn rand_f32_unit(state: &mut u64) -> f32 {
    (splitmix64(state) >> 40) as f32 / (1u64 << 24) as f32
}

pub(crate) fn i32_bytes(vals: &[i32]) -> Vec<u8> {
    vals.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub(crate) fn f32_bytes(vals: &[f32]) -> Vec<u8> {
    vals.iter().flat_map(|v| v.to_bits().to_le_bytes()).collect()
}

/// Renders a byte blob as `.data` directives, 32 bytes per line.
pub(crate) fn data_directives(addr: usize, bytes: &[u8]) -> String {
    let mut out = String::new();
    for (i, chunk) in bytes.chunks(32).enumerate() {
        let list: Vec<String> = chunk.iter().map(|b| b.to_string()).collect();
        out.push_str(&format!(".data {} {}\n", addr + i * 32, list.join(",")));
    }
    out
}

/// Parses generated kernel source; generator bugs fail loudly.
pub(crate) fn parse_kernel(name: &str, source: &str) -> Program {
    match parse(source) {
        Ok(p) => p,
        Err(e) => panic!("generated {name} kernel does not assemble: {e}"),
    }
}

/// Rounds an address up to the next multiple of `align`.
pub(crate) fn align_up(addr: usize, align: usize) -> usize {
    addr.div_ceil(align) * align
}
