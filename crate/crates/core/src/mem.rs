//! Byte-addressable main memory behind a write-back, write-allocate L1
//! data cache with per-set LRU. One shared port: scalar accesses, vector
//! accesses, and dispersion micro-operations all serialize through
//! [`MemSys::access`] and their latencies add.
//!
//! The flat byte array is the functional truth; the cache tracks tags and
//! dirty bits for timing only, so memory contents are identical under any
//! latency setting.

use std::fmt;

use crate::config::{ValidatedConfig, MAIN_MEMORY_BYTES};
use crate::vector::VectorValue;

#[derive(Debug, Clone, Copy)]
struct L1Entry {
    valid: bool,
    dirty: bool,
    tag: usize,
    /// 0 = most recently used, ways-1 = LRU victim.
    lru_rank: usize,
}

/// Result of one memory access.
#[derive(Debug, Clone)]
pub struct AccessResult {
    pub latency_cycles: u64,
    pub hit: bool,
    /// Loaded bytes (loads only).
    pub bytes: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MemError {
    /// The access spans two cachelines.
    UnalignedCrossLine { addr: usize, len: usize },
    /// The access extends past main memory.
    OutOfRange { addr: usize, len: usize },
    /// Vector access at an address that is not vector-aligned.
    Misaligned { addr: usize },
    /// Bad memory-image text.
    BadImage { line: usize, message: String },
}

impl fmt::Display for MemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MemError::UnalignedCrossLine { addr, len } => {
                write!(f, "access [{addr:#x}, +{len}) crosses a cacheline boundary")
            }
            MemError::OutOfRange { addr, len } => {
                write!(f, "access [{addr:#x}, +{len}) is outside main memory")
            }
            MemError::Misaligned { addr } => {
                write!(f, "vector access at {addr:#x} is not vector-aligned")
            }
            MemError::BadImage { line, message } => {
                write!(f, "memory image line {line}: {message}")
            }
        }
    }
}

impl std::error::Error for MemError {}

/// Main memory plus the L1 data cache timing model.
pub struct MemSys {
    bytes: Vec<u8>,
    sets: Vec<Vec<L1Entry>>,
    ways: usize,
    line_bytes: usize,
    vlen_bytes: usize,
    hit_cycles: u64,
    mem_latency: u64,
}

impl MemSys {
    pub fn new(cfg: &ValidatedConfig) -> MemSys {
        let num_sets = cfg.l1_size_bytes / (cfg.l1_ways * cfg.line_bytes);
        let sets = (0..num_sets)
            .map(|_| {
                (0..cfg.l1_ways)
                    .map(|w| L1Entry {
                        valid: false,
                        dirty: false,
                        tag: 0,
                        lru_rank: w,
                    })
                    .collect()
            })
            .collect();
        MemSys {
            bytes: vec![0; MAIN_MEMORY_BYTES],
            sets,
            ways: cfg.l1_ways,
            line_bytes: cfg.line_bytes,
            vlen_bytes: cfg.vlen_bytes(),
            hit_cycles: cfg.l1_hit_cycles,
            mem_latency: cfg.mem_latency_cycles,
        }
    }

    pub fn size_bytes(&self) -> usize {
        self.bytes.len()
    }

    fn set_and_tag(&self, addr: usize) -> (usize, usize) {
        let line = addr / self.line_bytes;
        (line % self.sets.len(), line / self.sets.len())
    }

    /// Promote `way` to most-recently-used within its set.
    fn touch(&mut self, set: usize, way: usize) {
        let old = self.sets[set][way].lru_rank;
        for e in &mut self.sets[set] {
            if e.lru_rank < old {
                e.lru_rank += 1;
            }
        }
        self.sets[set][way].lru_rank = 0;
    }

    /// One timed access through the shared port. The access must lie
    /// within a single cacheline.
    pub fn access(
        &mut self,
        addr: usize,
        len: usize,
        write: bool,
        payload: Option<&[u8]>,
    ) -> Result<AccessResult, MemError> {
        if len == 0 || addr.checked_add(len).map_or(true, |end| end > self.bytes.len()) {
            return Err(MemError::OutOfRange { addr, len });
        }
        if addr / self.line_bytes != (addr + len - 1) / self.line_bytes {
            return Err(MemError::UnalignedCrossLine { addr, len });
        }
        let (set, tag) = self.set_and_tag(addr);
        let hit_way = self.sets[set]
            .iter()
            .position(|e| e.valid && e.tag == tag);
        let (way, latency, hit) = match hit_way {
            Some(w) => (w, self.hit_cycles, true),
            None => {
                // Miss: fill an invalid way if possible, else the LRU way.
                let victim = self.sets[set]
                    .iter()
                    .position(|e| !e.valid)
                    .unwrap_or_else(|| {
                        self.sets[set]
                            .iter()
                            .position(|e| e.lru_rank == self.ways - 1)
                            .expect("lru ranks form a permutation")
                    });
                let mut latency = self.hit_cycles + self.mem_latency;
                let v = &mut self.sets[set][victim];
                if v.valid && v.dirty {
                    // Write the dirty victim line back before refilling.
                    latency += self.mem_latency;
                }
                v.valid = true;
                v.dirty = false;
                v.tag = tag;
                (victim, latency, false)
            }
        };
        self.touch(set, way);
        let bytes = if write {
            let data = payload.expect("write access requires a payload");
            assert_eq!(data.len(), len, "payload length mismatch");
            self.bytes[addr..addr + len].copy_from_slice(data);
            self.sets[set][way].dirty = true;
            None
        } else {
            Some(self.bytes[addr..addr + len].to_vec())
        };
        Ok(AccessResult {
            latency_cycles: latency,
            hit,
            bytes,
        })
    }

    /// Vector-width load at a vector-aligned address: a single access.
    pub fn read_vector(&mut self, addr: usize) -> Result<(VectorValue, AccessResult), MemError> {
        if addr % self.vlen_bytes != 0 {
            return Err(MemError::Misaligned { addr });
        }
        let res = self.access(addr, self.vlen_bytes, false, None)?;
        let value = VectorValue::from_bytes(res.bytes.clone().unwrap());
        Ok((value, res))
    }

    /// Vector-width store at a vector-aligned address: a single access.
    pub fn write_vector(
        &mut self,
        addr: usize,
        value: &VectorValue,
    ) -> Result<AccessResult, MemError> {
        if addr % self.vlen_bytes != 0 {
            return Err(MemError::Misaligned { addr });
        }
        self.access(addr, self.vlen_bytes, true, Some(value.as_bytes()))
    }

    /// Functional read with no timing effect (fixtures, byte-enable
    /// composition, result comparison).
    pub fn peek(&self, addr: usize, len: usize) -> &[u8] {
        &self.bytes[addr..addr + len]
    }

    /// Functional write with no timing effect (program loading, fixtures).
    pub fn poke(&mut self, addr: usize, data: &[u8]) {
        self.bytes[addr..addr + data.len()].copy_from_slice(data);
    }

    /// Renders `[addr, addr+len)` as `addr: hexbytes` lines, 16 bytes per line.
    pub fn dump_image(&self, addr: usize, len: usize) -> String {
        let mut out = String::new();
        let mut a = addr;
        let end = addr + len;
        while a < end {
            let n = (end - a).min(16);
            out.push_str(&format!("{a:08x}:"));
            out.push(' ');
            for b in &self.bytes[a..a + n] {
                out.push_str(&format!("{b:02x}"));
            }
            out.push('\n');
            a += n;
        }
        out
    }

    /// Loads a memory image produced by [`MemSys::dump_image`].
    pub fn load_image(&mut self, text: &str) -> Result<(), MemError> {
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let (addr_s, hex) = line.split_once(':').ok_or(MemError::BadImage {
                line: line_no,
                message: "expected `addr: hexbytes`".to_string(),
            })?;
            let addr = usize::from_str_radix(addr_s.trim(), 16).map_err(|e| MemError::BadImage {
                line: line_no,
                message: format!("bad address: {e}"),
            })?;
            let hex = hex.trim();
            if hex.len() % 2 != 0 {
                return Err(MemError::BadImage {
                    line: line_no,
                    message: "odd hex digit count".to_string(),
                });
            }
            for (i, chunk) in hex.as_bytes().chunks(2).enumerate() {
                let s = std::str::from_utf8(chunk).unwrap();
                let byte = u8::from_str_radix(s, 16).map_err(|e| MemError::BadImage {
                    line: line_no,
                    message: format!("bad hex byte: {e}"),
                })?;
                if addr + i >= self.bytes.len() {
                    return Err(MemError::OutOfRange { addr: addr + i, len: 1 });
                }
                self.bytes[addr + i] = byte;
            }
        }
        Ok(())
    }

    /// Structural L1 invariants: tag uniqueness per set, rank permutation.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (si, set) in self.sets.iter().enumerate() {
            let mut ranks: Vec<usize> = set.iter().map(|e| e.lru_rank).collect();
            ranks.sort_unstable();
            if ranks != (0..self.ways).collect::<Vec<_>>() {
                return Err(format!("set {si}: lru ranks are not a permutation"));
            }
            for (i, a) in set.iter().enumerate() {
                for b in &set[i + 1..] {
                    if a.valid && b.valid && a.tag == b.tag {
                        return Err(format!("set {si}: duplicate valid tag {:#x}", a.tag));
                    }
                }
            }
        }
        Ok(())
    }
}
