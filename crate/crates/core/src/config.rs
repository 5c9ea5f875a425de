//! Machine configuration: every tunable parameter of the simulated core,
//! plus validation and the flat `key=value` config-file format.

use std::fmt;
use std::ops::Deref;

/// Number of architectural vector registers mandated by the vector ISA.
pub const NUM_ARCH_VREGS: usize = 32;

/// Flat main memory size in bytes (2 MB).
pub const MAIN_MEMORY_BYTES: usize = 2 * 1024 * 1024;

/// Default base address of the reserved register spill region.
///
/// Registers v1..v31 live at `spill_base_addr + (k - 1) * vlen_bytes`.
/// The default sits near the top of main memory, well above any kernel data.
pub const DEFAULT_SPILL_BASE: usize = 0x1F0000;

/// Which vector register file model the core uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VrfModel {
    /// All 32 architectural registers are physically present.
    Full,
    /// Compact VRF holding `size` physical registers, managed like a cache.
    Compact(usize),
}

/// Replacement policy for the compact VRF.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Replacement {
    /// Evict the longest-resident register (circular queue order). Default.
    Fifo,
    /// Evict the least-recently-used register (per-entry age stamps).
    Lru,
}

/// When a vector instruction's destination register misses in the compact
/// VRF, should its old value be fetched from memory?
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DestFetch {
    /// Always fetch the destination on a miss. Default: the control unit
    /// treats all three operands of an instruction uniformly.
    Always,
    /// Fetch the destination only when its old value is actually needed
    /// (multiply-accumulate, masked writes, partial writes, active tail).
    /// Opt-in ablation mode.
    WhenRead,
}

/// Whether an evicted compact-VRF register is written back to memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WritebackPolicy {
    /// Store the evictee unconditionally. Default.
    Always,
    /// Store the evictee only if it was written since it was filled.
    /// Opt-in optimization, excluded from reference experiments.
    DirtyOnly,
}

/// All tunable parameters of the simulated machine.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineConfig {
    /// Vector register width in bits.
    pub vlen_bits: usize,
    /// Number of 32-bit execution lanes; must equal `vlen_bits / 32`.
    pub lanes: usize,
    /// Architectural vector register count; fixed at 32 by the ISA.
    pub num_arch_vregs: usize,
    /// VRF model: full 32-entry file or compact cache-like file.
    pub vrf_model: VrfModel,
    /// Compact-VRF replacement policy.
    pub replacement: Replacement,
    /// L1 data cache capacity in bytes.
    pub l1_size_bytes: usize,
    /// L1 associativity.
    pub l1_ways: usize,
    /// Cacheline size in bytes; also bounds the vector width.
    pub line_bytes: usize,
    /// L1 hit latency in cycles.
    pub l1_hit_cycles: u64,
    /// Main-memory latency in cycles, on top of the L1 hit latency.
    pub mem_latency_cycles: u64,
    /// Base byte address of the reserved spill region for v1..v31.
    pub spill_base_addr: usize,
    /// Destination-fetch policy for compact-VRF misses.
    pub dest_fetch: DestFetch,
    /// Evictee write-back policy for the compact VRF.
    pub writeback_on_evict: WritebackPolicy,
}

impl Default for MachineConfig {
    fn default() -> Self {
        MachineConfig {
            vlen_bits: 256,
            lanes: 8,
            num_arch_vregs: NUM_ARCH_VREGS,
            vrf_model: VrfModel::Full,
            replacement: Replacement::Fifo,
            l1_size_bytes: 16 * 1024,
            l1_ways: 2,
            line_bytes: 32,
            l1_hit_cycles: 1,
            mem_latency_cycles: 5,
            spill_base_addr: DEFAULT_SPILL_BASE,
            dest_fetch: DestFetch::Always,
            writeback_on_evict: WritebackPolicy::Always,
        }
    }
}

impl MachineConfig {
    /// Vector width in bytes.
    pub fn vlen_bytes(&self) -> usize {
        self.vlen_bits / 8
    }

    /// Number of 32-bit elements per vector register.
    pub fn elems_per_vec(&self) -> usize {
        self.vlen_bits / 32
    }

    /// Byte size of the reserved spill region (31 dispersable registers).
    pub fn spill_region_bytes(&self) -> usize {
        (NUM_ARCH_VREGS - 1) * self.vlen_bytes()
    }

    /// Checks every structural invariant, returning all violations at once.
    pub fn validate(self) -> Result<ValidatedConfig, ConfigError> {
        let mut violations = Vec::new();
        if self.vlen_bits == 0 || self.vlen_bits % 32 != 0 {
            violations.push(format!(
                "vlen_bits must be a positive multiple of 32, got {}",
                self.vlen_bits
            ));
        } else {
            if self.lanes != self.vlen_bits / 32 {
                violations.push(format!(
                    "lanes must equal vlen_bits/32 = {}, got {}",
                    self.vlen_bits / 32,
                    self.lanes
                ));
            }
            if self.vlen_bits > self.line_bytes * 8 {
                violations.push(format!(
                    "vlen_bits ({}) exceeds the cacheline size ({} bits); a vector must fit in one line",
                    self.vlen_bits,
                    self.line_bytes * 8
                ));
            }
        }
        if self.num_arch_vregs != NUM_ARCH_VREGS {
            violations.push(format!(
                "num_arch_vregs must be {}, got {}",
                NUM_ARCH_VREGS, self.num_arch_vregs
            ));
        }
        if let VrfModel::Compact(size) = self.vrf_model {
            if !(3..=NUM_ARCH_VREGS).contains(&size) {
                violations.push(format!(
                    "compact VRF size must be in [3, 32] (3 pins one instruction's operands), got {size}"
                ));
            }
        }
        if self.l1_ways == 0 || self.line_bytes == 0 {
            violations.push("l1_ways and line_bytes must be positive".to_string());
        } else if self.l1_size_bytes == 0
            || self.l1_size_bytes % (self.l1_ways * self.line_bytes) != 0
        {
            violations.push(format!(
                "l1_size_bytes ({}) must be a positive multiple of l1_ways*line_bytes ({})",
                self.l1_size_bytes,
                self.l1_ways * self.line_bytes
            ));
        }
        if self.l1_hit_cycles == 0 {
            violations.push("l1_hit_cycles must be at least 1".to_string());
        }
        if !(1..=5).contains(&self.mem_latency_cycles) {
            violations.push(format!(
                "mem_latency_cycles must be in [1, 5], got {}",
                self.mem_latency_cycles
            ));
        }
        if self.vlen_bits % 32 == 0 && self.vlen_bits > 0 {
            let vb = self.vlen_bytes();
            if self.spill_base_addr % vb != 0 {
                violations.push(format!(
                    "spill_base_addr ({:#x}) must be vector-aligned ({} bytes)",
                    self.spill_base_addr, vb
                ));
            }
            if self.spill_base_addr + self.spill_region_bytes() > MAIN_MEMORY_BYTES {
                violations.push(format!(
                    "spill region [{:#x}, {:#x}) extends past main memory ({:#x} bytes)",
                    self.spill_base_addr,
                    self.spill_base_addr + self.spill_region_bytes(),
                    MAIN_MEMORY_BYTES
                ));
            }
        }
        if violations.is_empty() {
            Ok(ValidatedConfig(self))
        } else {
            Err(ConfigError::Invalid { violations })
        }
    }

    /// Parses the flat `key=value` configuration text format.
    ///
    /// One pair per line, `#` starts a comment, blank lines ignored.
    /// Unknown keys are errors. Missing keys keep their defaults.
    pub fn from_kv_text(text: &str) -> Result<MachineConfig, ConfigError> {
        let mut cfg = MachineConfig::default();
        let mut compact = matches!(cfg.vrf_model, VrfModel::Compact(_));
        let mut cvrf_size = 8usize;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
                line: line_no,
                message: format!("expected key=value, got {line:?}"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |message: String| ConfigError::Parse {
                line: line_no,
                message,
            };
            let parse_usize = |v: &str| -> Result<usize, ConfigError> {
                parse_int(v).ok_or_else(|| bad(format!("invalid integer {v:?} for key {key:?}")))
            };
            match key {
                "vlen_bits" => cfg.vlen_bits = parse_usize(value)?,
                "lanes" => cfg.lanes = parse_usize(value)?,
                "num_arch_vregs" => cfg.num_arch_vregs = parse_usize(value)?,
                "vrf_model" => match value {
                    "full" => compact = false,
                    "compact" => compact = true,
                    other => return Err(bad(format!("vrf_model must be full|compact, got {other:?}"))),
                },
                "cvrf_size" => cvrf_size = parse_usize(value)?,
                "replacement" => match value {
                    "fifo" => cfg.replacement = Replacement::Fifo,
                    "lru" => cfg.replacement = Replacement::Lru,
                    other => return Err(bad(format!("replacement must be fifo|lru, got {other:?}"))),
                },
                "l1_size_bytes" => cfg.l1_size_bytes = parse_usize(value)?,
                "l1_ways" => cfg.l1_ways = parse_usize(value)?,
                "line_bytes" => cfg.line_bytes = parse_usize(value)?,
                "l1_hit_cycles" => cfg.l1_hit_cycles = parse_usize(value)? as u64,
                "mem_latency_cycles" => cfg.mem_latency_cycles = parse_usize(value)? as u64,
                "spill_base_addr" => cfg.spill_base_addr = parse_usize(value)?,
                "dest_fetch" => match value {
                    "always" => cfg.dest_fetch = DestFetch::Always,
                    "when_read" => cfg.dest_fetch = DestFetch::WhenRead,
                    other => {
                        return Err(bad(format!("dest_fetch must be always|when_read, got {other:?}")))
                    }
                },
                "writeback_on_evict" => match value {
                    "always" => cfg.writeback_on_evict = WritebackPolicy::Always,
                    "dirty_only" => cfg.writeback_on_evict = WritebackPolicy::DirtyOnly,
                    other => {
                        return Err(bad(format!(
                            "writeback_on_evict must be always|dirty_only, got {other:?}"
                        )))
                    }
                },
                other => {
                    return Err(bad(format!("unknown configuration key {other:?}")));
                }
            }
        }
        cfg.vrf_model = if compact {
            VrfModel::Compact(cvrf_size)
        } else {
            VrfModel::Full
        };
        Ok(cfg)
    }
}

fn parse_int(v: &str) -> Option<usize> {
    if let Some(hex) = v.strip_prefix("0x").or_else(|| v.strip_prefix("0X")) {
        usize::from_str_radix(hex, 16).ok()
    } else {
        v.parse().ok()
    }
}

/// A configuration that has passed [`MachineConfig::validate`].
///
/// Immutable after validation; safe to share read-only across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig(MachineConfig);

impl ValidatedConfig {
    /// Recovers the inner configuration (re-validating it is a no-op).
    pub fn into_inner(self) -> MachineConfig {
        self.0
    }
}

impl Deref for ValidatedConfig {
    type Target = MachineConfig;
    fn deref(&self) -> &MachineConfig {
        &self.0
    }
}

/// Configuration errors: either invariant violations (all listed) or a
/// config-file parse failure.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Invalid { violations: Vec<String> },
    Parse { line: usize, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Invalid { violations } => {
                writeln!(f, "invalid configuration ({} violations):", violations.len())?;
                for v in violations {
                    writeln!(f, "  - {v}")?;
                }
                Ok(())
            }
            ConfigError::Parse { line, message } => {
                write!(f, "config parse error at line {line}: {message}")
            }
        }
    }
}

impl std::error::Error for ConfigError {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = MachineConfig::default().validate().expect("defaults valid");
        assert_eq!(cfg.vlen_bits, 256);
        assert_eq!(cfg.lanes, 8);
        assert_eq!(cfg.line_bytes, 32);
        assert_eq!(cfg.l1_size_bytes, 16 * 1024);
        assert_eq!(cfg.l1_ways, 2);
        assert_eq!(cfg.l1_hit_cycles, 1);
        assert_eq!(cfg.mem_latency_cycles, 5);
    }

    #[test]
    fn vlen_exceeding_cacheline_is_rejected() {
        let cfg = MachineConfig {
            vlen_bits: 512,
            lanes: 16,
            ..MachineConfig::default()
        };
        let err = cfg.validate().unwrap_err();
        match err {
            ConfigError::Invalid { violations } => {
                assert!(violations.iter().any(|v| v.contains("cacheline")));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn compact_size_below_three_is_rejected() {
        let cfg = MachineConfig {
            vrf_model: VrfModel::Compact(2),
            ..MachineConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn all_violations_are_reported_not_just_the_first() {
        let cfg = MachineConfig {
            vlen_bits: 512,
            lanes: 3,
            vrf_model: VrfModel::Compact(2),
            mem_latency_cycles: 9,
            ..MachineConfig::default()
        };
        match cfg.validate().unwrap_err() {
            ConfigError::Invalid { violations } => {
                assert!(violations.len() >= 3, "got {violations:?}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn validation_is_idempotent() {
        let validated = MachineConfig::default().validate().unwrap();
        let again = validated.clone().into_inner().validate().unwrap();
        assert_eq!(validated, again);
    }

    #[test]
    fn equal_area_config_is_valid() {
        let cfg = MachineConfig {
            vlen_bits: 64,
            lanes: 2,
            ..MachineConfig::default()
        };
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn kv_text_roundtrip() {
        let text = "\
# comment line
vlen_bits=256
lanes = 8
vrf_model=compact
cvrf_size=8
replacement=fifo
mem_latency_cycles=3
spill_base_addr=0x1F0000
";
        let cfg = MachineConfig::from_kv_text(text).unwrap();
        assert_eq!(cfg.vrf_model, VrfModel::Compact(8));
        assert_eq!(cfg.mem_latency_cycles, 3);
        assert_eq!(cfg.spill_base_addr, 0x1F0000);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = MachineConfig::from_kv_text("vlen=256\n").unwrap_err();
        match err {
            ConfigError::Parse { line, message } => {
                assert_eq!(line, 1);
                assert!(message.contains("unknown"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}
