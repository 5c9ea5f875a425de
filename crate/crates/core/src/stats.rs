//! Execution counters collected by the pipeline.

use std::fmt;

/// Counters for one simulation. `spills` counts evictee stores, `fills`
/// counts operand loads issued by the dispersion control unit.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct ExecStats {
    pub cycles: u64,
    pub instructions_retired: u64,
    pub vrf_lookups: u64,
    pub vrf_hits: u64,
    pub vrf_misses: u64,
    pub spills: u64,
    pub fills: u64,
    pub stall_cycles: u64,
    /// Memory-access cycles of program-level loads/stores beyond the one
    /// base cycle already charged per instruction.
    pub mem_extra_cycles: u64,
    pub l1_hits: u64,
    pub l1_misses: u64,
}

impl ExecStats {
    /// Register-file hit rate. Defined as 1.0 when there were no lookups.
    pub fn hit_rate(&self) -> f64 {
        if self.vrf_lookups == 0 {
            1.0
        } else {
            self.vrf_hits as f64 / self.vrf_lookups as f64
        }
    }

    /// L1 hit rate over all accesses (program plus micro-ops).
    pub fn l1_hit_rate(&self) -> f64 {
        let total = self.l1_hits + self.l1_misses;
        if total == 0 {
            1.0
        } else {
            self.l1_hits as f64 / total as f64
        }
    }

    /// Counter-wise difference `self - earlier`, for steady-state windows.
    pub fn since(&self, earlier: &ExecStats) -> ExecStats {
        ExecStats {
            cycles: self.cycles - earlier.cycles,
            instructions_retired: self.instructions_retired - earlier.instructions_retired,
            vrf_lookups: self.vrf_lookups - earlier.vrf_lookups,
            vrf_hits: self.vrf_hits - earlier.vrf_hits,
            vrf_misses: self.vrf_misses - earlier.vrf_misses,
            spills: self.spills - earlier.spills,
            fills: self.fills - earlier.fills,
            stall_cycles: self.stall_cycles - earlier.stall_cycles,
            mem_extra_cycles: self.mem_extra_cycles - earlier.mem_extra_cycles,
            l1_hits: self.l1_hits - earlier.l1_hits,
            l1_misses: self.l1_misses - earlier.l1_misses,
        }
    }
}

impl fmt::Display for ExecStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cycles:        {}", self.cycles)?;
        writeln!(f, "instructions:  {}", self.instructions_retired)?;
        writeln!(
            f,
            "vrf lookups:   {} ({} hits, {} misses, hit rate {:.4})",
            self.vrf_lookups,
            self.vrf_hits,
            self.vrf_misses,
            self.hit_rate()
        )?;
        writeln!(f, "spills/fills:  {}/{}", self.spills, self.fills)?;
        writeln!(f, "stall cycles:  {}", self.stall_cycles)?;
        write!(
            f,
            "l1:            {} hits, {} misses (hit rate {:.4})",
            self.l1_hits,
            self.l1_misses,
            self.l1_hit_rate()
        )
    }
}
