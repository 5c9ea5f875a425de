//! Cycle-approximate simulator of a low-cost scalar RISC-V style core with
//! an integrated vector unit, built to study register dispersion: a compact
//! vector register file that caches only the recently accessed architectural
//! vector registers and spills the rest to a reserved memory region.
//!
//! Modules:
//! - [`config`]: machine parameters, validation, config-file format
//! - [`vector`]: VLEN-bit register values with per-SEW element views
//! - [`stats`]: execution counters
//! - [`asm`]: mini vector-assembly parser, disassembler, register analysis
//! - [`mem`]: flat main memory behind a write-back L1 timing model
//! - [`vrf`]: full and compact vector register file models
//! - [`pipeline`]: single-issue execution and timing engine
//! - [`kernels`]: benchmark kernel generators with scalar golden references

pub mod asm;
pub mod config;
pub mod kernels;
pub mod mem;
pub mod pipeline;
pub mod stats;
pub mod vector;
pub mod vrf;

pub use config::{MachineConfig, ValidatedConfig, VrfModel};
pub use stats::ExecStats;
pub use vector::{Sew, VectorValue};
