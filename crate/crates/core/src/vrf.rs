//! Vector register file models.
//!
//! The full model keeps all 32 architectural registers physically present.
//! The compact model holds only N physical registers behind a
//! fully-associative tag array organized as a circular FIFO queue: the
//! head points at the longest-resident entry, the tail at the next free
//! slot. Register v0 (the mask register) lives in a dedicated slot and is
//! never dispersed; the remaining 31 registers spill to a reserved memory
//! region on eviction and are re-filled on demand.
//!
//! Operand resolution is serial. Each resolved operand is pinned for the
//! rest of the instruction so a later allocation cannot evict it, which
//! makes 3 the minimum usable size (one instruction names at most three
//! registers). Eviction picks the oldest unpinned entry, so with no
//! pinning interference the eviction order equals the insertion order.

use std::fmt::Write as _;

use crate::config::{
    MachineConfig, Replacement, ValidatedConfig, VrfModel, WritebackPolicy, NUM_ARCH_VREGS,
};
use crate::vector::VectorValue;

/// Register v0 has no spill slot: it is never dispersed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct V0HasNoSpillSlot;

impl std::fmt::Display for V0HasNoSpillSlot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "v0 is held in a dedicated register and has no spill slot")
    }
}

impl std::error::Error for V0HasNoSpillSlot {}

/// Reserved memory address of architectural register `arch` (1..=31).
pub fn spill_address(cfg: &MachineConfig, arch: u8) -> Result<usize, V0HasNoSpillSlot> {
    if arch == 0 {
        return Err(V0HasNoSpillSlot);
    }
    Ok(cfg.spill_base_addr + (arch as usize - 1) * cfg.vlen_bytes())
}

/// A resolved physical location: the dedicated v0 slot or a cVRF index.
/// The full model addresses its registers directly by architectural id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhysSlot {
    V0,
    Idx(usize),
}

/// A memory micro-operation generated by the dispersion control unit.
/// Stores precede the load that reuses their slot; the slot's data is
/// still the evictee's when the store is issued.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MicroOp {
    Store { arch: u8, addr: usize, slot: usize },
    Load { arch: u8, addr: usize, slot: usize },
}

/// One operand of an instruction, in resolution order.
#[derive(Debug, Clone, Copy)]
pub struct OperandReq {
    pub arch: u8,
    pub is_read: bool,
    pub is_written: bool,
    /// On a miss, fetch the register's memory copy into the new slot.
    /// The destination-fetch policy and runtime tail state decide this.
    pub fill_on_miss: bool,
}

/// Outcome of resolving one instruction's operands.
#[derive(Debug)]
pub struct Resolution {
    /// Physical location per operand, parallel to the request list.
    pub phys: Vec<PhysSlot>,
    pub micro_ops: Vec<MicroOp>,
    /// Filled in by the pipeline after issuing the micro-ops.
    pub stall_cycles: u64,
    pub hits: u64,
    pub misses: u64,
}

/// Compact VRF state: tag array plus circular-FIFO data store.
pub struct CompactVrf {
    size: usize,
    tags: Vec<Option<u8>>,
    data: Vec<VectorValue>,
    dirty: Vec<bool>,
    /// FIFO: insertion stamp. LRU: last-use stamp.
    stamp: Vec<u64>,
    next_stamp: u64,
    head: usize,
    tail: usize,
    occupancy: usize,
    v0: VectorValue,
    pins: Vec<usize>,
    replacement: Replacement,
    writeback: WritebackPolicy,
    spill_base: usize,
    vlen_bytes: usize,
}

impl CompactVrf {
    pub fn new(cfg: &ValidatedConfig, size: usize) -> CompactVrf {
        assert!((3..=NUM_ARCH_VREGS).contains(&size));
        CompactVrf {
            size,
            tags: vec![None; size],
            data: vec![VectorValue::zero(cfg.vlen_bits); size],
            dirty: vec![false; size],
            stamp: vec![0; size],
            next_stamp: 0,
            head: 0,
            tail: 0,
            occupancy: 0,
            v0: VectorValue::zero(cfg.vlen_bits),
            pins: Vec::with_capacity(3),
            replacement: cfg.replacement,
            writeback: cfg.writeback_on_evict,
            spill_base: cfg.spill_base_addr,
            vlen_bytes: cfg.vlen_bytes(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn tags(&self) -> &[Option<u8>] {
        &self.tags
    }

    pub fn head(&self) -> usize {
        self.head
    }

    pub fn tail(&self) -> usize {
        self.tail
    }

    pub fn occupancy(&self) -> usize {
        self.occupancy
    }

    fn spill_addr(&self, arch: u8) -> usize {
        debug_assert!(arch != 0);
        self.spill_base + (arch as usize - 1) * self.vlen_bytes
    }

    /// Tag-array lookup. v0 always resolves to its dedicated slot.
    /// Never mutates state.
    pub fn lookup(&self, arch: u8) -> Option<PhysSlot> {
        debug_assert!((arch as usize) < NUM_ARCH_VREGS);
        if arch == 0 {
            return Some(PhysSlot::V0);
        }
        self.tags
            .iter()
            .position(|t| *t == Some(arch))
            .map(PhysSlot::Idx)
    }

    /// Allocate a slot for a missing register, evicting if necessary.
    fn allocate(&mut self, arch: u8, fill: bool) -> (usize, Vec<MicroOp>) {
        debug_assert!(arch != 0 && self.lookup(arch).is_none());
        let mut ops = Vec::new();
        let slot = if self.occupancy < self.size {
            let s = self.tail;
            debug_assert!(self.tags[s].is_none());
            self.tail = (self.tail + 1) % self.size;
            self.occupancy += 1;
            s
        } else {
            // FIFO: oldest unpinned entry. LRU: least recently used
            // unpinned entry (stamps are refreshed on every hit).
            let victim = (0..self.size)
                .filter(|s| !self.pins.contains(s))
                .min_by_key(|s| self.stamp[*s])
                .expect("an instruction pins at most 3 of >=3 slots");
            let evicted = self.tags[victim].expect("full cVRF has no absent tags");
            if self.writeback == WritebackPolicy::Always || self.dirty[victim] {
                ops.push(MicroOp::Store {
                    arch: evicted,
                    addr: self.spill_addr(evicted),
                    slot: victim,
                });
            }
            victim
        };
        self.tags[slot] = Some(arch);
        self.dirty[slot] = false;
        self.stamp[slot] = self.next_stamp;
        self.next_stamp += 1;
        if fill {
            ops.push(MicroOp::Load {
                arch,
                addr: self.spill_addr(arch),
                slot,
            });
        }
        self.recompute_head();
        (slot, ops)
    }

    fn recompute_head(&mut self) {
        if self.occupancy > 0 {
            self.head = (0..self.size)
                .filter(|s| self.tags[*s].is_some())
                .min_by_key(|s| self.stamp[*s])
                .unwrap();
        }
    }

    /// Serial three-operand resolution with pinning.
    pub fn resolve(&mut self, reqs: &[OperandReq]) -> Resolution {
        debug_assert!(reqs.len() <= 3);
        let mut res = Resolution {
            phys: Vec::with_capacity(reqs.len()),
            micro_ops: Vec::new(),
            stall_cycles: 0,
            hits: 0,
            misses: 0,
        };
        for req in reqs {
            if req.arch == 0 {
                res.hits += 1;
                res.phys.push(PhysSlot::V0);
                continue;
            }
            let slot = match self.lookup(req.arch) {
                Some(PhysSlot::Idx(s)) => {
                    res.hits += 1;
                    if self.replacement == Replacement::Lru {
                        self.stamp[s] = self.next_stamp;
                        self.next_stamp += 1;
                        self.recompute_head();
                    }
                    s
                }
                Some(PhysSlot::V0) => unreachable!(),
                None => {
                    res.misses += 1;
                    let (s, ops) = self.allocate(req.arch, req.fill_on_miss);
                    res.micro_ops.extend(ops);
                    s
                }
            };
            if !self.pins.contains(&slot) {
                self.pins.push(slot);
            }
            if req.is_written {
                self.dirty[slot] = true;
            }
            res.phys.push(PhysSlot::Idx(slot));
        }
        self.pins.clear();
        debug_assert!(self.check_invariants().is_ok());
        res
    }

    pub fn read_slot(&self, slot: PhysSlot) -> &VectorValue {
        match slot {
            PhysSlot::V0 => &self.v0,
            PhysSlot::Idx(i) => &self.data[i],
        }
    }

    pub fn write_slot(&mut self, slot: PhysSlot, value: VectorValue) {
        match slot {
            PhysSlot::V0 => self.v0 = value,
            PhysSlot::Idx(i) => {
                self.data[i] = value;
                self.dirty[i] = true;
            }
        }
    }

    /// Install data loaded by a fill micro-op. The slot stays clean: its
    /// memory copy is current by construction.
    pub fn fill_slot(&mut self, slot: usize, value: VectorValue) {
        self.data[slot] = value;
    }

    /// Resident value of an architectural register, if tagged.
    pub fn resident(&self, arch: u8) -> Option<&VectorValue> {
        if arch == 0 {
            return Some(&self.v0);
        }
        match self.lookup(arch) {
            Some(PhysSlot::Idx(i)) => Some(&self.data[i]),
            _ => None,
        }
    }

    /// Structural invariants, checked after every simulated instruction
    /// in stress tests.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = [false; NUM_ARCH_VREGS];
        let mut present = 0;
        for (i, t) in self.tags.iter().enumerate() {
            if let Some(arch) = t {
                if *arch == 0 {
                    return Err(format!("slot {i}: v0 must never be tagged"));
                }
                if (*arch as usize) >= NUM_ARCH_VREGS {
                    return Err(format!("slot {i}: tag v{arch} out of range"));
                }
                if seen[*arch as usize] {
                    return Err(format!("tag v{arch} appears more than once"));
                }
                seen[*arch as usize] = true;
                present += 1;
            }
        }
        if present != self.occupancy {
            return Err(format!(
                "occupancy {} does not match {} present tags",
                self.occupancy, present
            ));
        }
        if self.occupancy < self.size && self.tags[self.tail].is_some() {
            return Err("tail does not point at a free slot".to_string());
        }
        if !self.pins.is_empty() {
            return Err("pins must be empty between instructions".to_string());
        }
        if self.occupancy > 0 {
            let oldest = (0..self.size)
                .filter(|s| self.tags[*s].is_some())
                .min_by_key(|s| self.stamp[*s])
                .unwrap();
            if self.head != oldest {
                return Err(format!(
                    "head {} is not the longest-resident slot {}",
                    self.head, oldest
                ));
            }
        }
        Ok(())
    }

    /// Textual snapshot for golden-file tests.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for i in 0..self.size {
            let tag = match self.tags[i] {
                Some(a) => format!("v{a}"),
                None => "-".to_string(),
            };
            let mut markers = String::new();
            if self.occupancy > 0 && i == self.head {
                markers.push_str(" <head>");
            }
            if self.occupancy < self.size && i == self.tail {
                markers.push_str(" <tail>");
            }
            let _ = writeln!(
                out,
                "phys#{i}: tag={tag} dirty={}{markers}",
                u8::from(self.dirty[i])
            );
        }
        out
    }
}

/// Full 32-entry VRF: every operand is a hit, no micro-ops ever.
pub struct FullVrf {
    regs: Vec<VectorValue>,
}

impl FullVrf {
    pub fn new(cfg: &ValidatedConfig) -> FullVrf {
        FullVrf {
            regs: vec![VectorValue::zero(cfg.vlen_bits); NUM_ARCH_VREGS],
        }
    }
}

/// Either VRF model behind one operation surface.
pub enum VrfState {
    Full(FullVrf),
    Compact(CompactVrf),
}

impl VrfState {
    pub fn new(cfg: &ValidatedConfig) -> VrfState {
        match cfg.vrf_model {
            VrfModel::Full => VrfState::Full(FullVrf::new(cfg)),
            VrfModel::Compact(size) => VrfState::Compact(CompactVrf::new(cfg, size)),
        }
    }

    pub fn resolve(&mut self, reqs: &[OperandReq]) -> Resolution {
        match self {
            VrfState::Full(_) => Resolution {
                phys: reqs.iter().map(|r| PhysSlot::Idx(r.arch as usize)).collect(),
                micro_ops: Vec::new(),
                stall_cycles: 0,
                hits: reqs.len() as u64,
                misses: 0,
            },
            VrfState::Compact(c) => c.resolve(reqs),
        }
    }

    pub fn read(&self, slot: PhysSlot) -> &VectorValue {
        match self {
            VrfState::Full(f) => match slot {
                PhysSlot::Idx(i) => &f.regs[i],
                PhysSlot::V0 => &f.regs[0],
            },
            VrfState::Compact(c) => c.read_slot(slot),
        }
    }

    pub fn write(&mut self, slot: PhysSlot, value: VectorValue) {
        match self {
            VrfState::Full(f) => match slot {
                PhysSlot::Idx(i) => f.regs[i] = value,
                PhysSlot::V0 => f.regs[0] = value,
            },
            VrfState::Compact(c) => c.write_slot(slot, value),
        }
    }

    /// The current mask register value.
    pub fn mask(&self) -> &VectorValue {
        match self {
            VrfState::Full(f) => &f.regs[0],
            VrfState::Compact(c) => &c.v0,
        }
    }

    pub fn compact(&self) -> Option<&CompactVrf> {
        match self {
            VrfState::Compact(c) => Some(c),
            VrfState::Full(_) => None,
        }
    }

    pub fn compact_mut(&mut self) -> Option<&mut CompactVrf> {
        match self {
            VrfState::Compact(c) => Some(c),
            VrfState::Full(_) => None,
        }
    }

    /// Authoritative value of an architectural register: the resident
    /// copy when present, otherwise the register's spill-region bytes.
    pub fn arch_value(&self, arch: u8, spill_peek: &dyn Fn(usize) -> VectorValue) -> VectorValue {
        match self {
            VrfState::Full(f) => f.regs[arch as usize].clone(),
            VrfState::Compact(c) => match c.resident(arch) {
                Some(v) => v.clone(),
                None => spill_peek(c.spill_addr(arch)),
            },
        }
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        match self {
            VrfState::Full(_) => Ok(()),
            VrfState::Compact(c) => c.check_invariants(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::MachineConfig;

    fn cfg(size: usize) -> ValidatedConfig {
        MachineConfig {
            vrf_model: VrfModel::Compact(size),
            ..MachineConfig::default()
        }
        .validate()
        .unwrap()
    }

    fn read_req(arch: u8) -> OperandReq {
        OperandReq {
            arch,
            is_read: true,
            is_written: false,
            fill_on_miss: true,
        }
    }

    fn write_req(arch: u8) -> OperandReq {
        OperandReq {
            arch,
            is_read: false,
            is_written: true,
            fill_on_miss: true,
        }
    }

    #[test]
    fn v0_always_resolves_to_the_dedicated_slot() {
        let c = CompactVrf::new(&cfg(4), 4);
        assert_eq!(c.lookup(0), Some(PhysSlot::V0));
        let mut c = c;
        for _ in 0..3 {
            let r = c.resolve(&[read_req(0)]);
            assert_eq!(r.phys, vec![PhysSlot::V0]);
            assert_eq!(r.misses, 0);
            assert!(r.micro_ops.is_empty());
        }
    }

    #[test]
    fn lookup_misses_on_empty_and_matches_tags() {
        let mut c = CompactVrf::new(&cfg(3), 3);
        assert_eq!(c.lookup(5), None);
        c.resolve(&[read_req(7), read_req(3)]);
        assert_eq!(c.lookup(3), Some(PhysSlot::Idx(1)));
        assert_eq!(c.lookup(7), Some(PhysSlot::Idx(0)));
        assert_eq!(c.lookup(9), None);
    }

    #[test]
    fn misses_fill_free_slots_in_tail_order() {
        // vmacc v3, v1, v2 on an empty size-4 cVRF.
        let mut c = CompactVrf::new(&cfg(4), 4);
        let spill = |a: u8| (a as usize - 1) * 32 + 0x1F0000;
        let r = c.resolve(&[read_req(1), read_req(2), write_req(3)]);
        assert_eq!(r.misses, 3);
        assert_eq!(r.hits, 0);
        assert_eq!(
            r.micro_ops,
            vec![
                MicroOp::Load { arch: 1, addr: spill(1), slot: 0 },
                MicroOp::Load { arch: 2, addr: spill(2), slot: 1 },
                MicroOp::Load { arch: 3, addr: spill(3), slot: 2 },
            ]
        );
        assert_eq!(c.tags(), &[Some(1), Some(2), Some(3), None]);
        assert_eq!(c.tail(), 3);
        assert_eq!(c.occupancy(), 3);
    }

    #[test]
    fn full_cvrf_evicts_in_fifo_order() {
        // Size 3 holding v4, v5, v6 (head at v4); vadd v1, v2, v3
        // evicts and refills all three slots, store before load.
        let mut c = CompactVrf::new(&cfg(3), 3);
        c.resolve(&[read_req(4), read_req(5), read_req(6)]);
        assert_eq!(c.head(), 0);
        let spill = |a: u8| (a as usize - 1) * 32 + 0x1F0000;
        let r = c.resolve(&[read_req(2), read_req(3), write_req(1)]);
        assert_eq!(r.misses, 3);
        assert_eq!(
            r.micro_ops,
            vec![
                MicroOp::Store { arch: 4, addr: spill(4), slot: 0 },
                MicroOp::Load { arch: 2, addr: spill(2), slot: 0 },
                MicroOp::Store { arch: 5, addr: spill(5), slot: 1 },
                MicroOp::Load { arch: 3, addr: spill(3), slot: 1 },
                MicroOp::Store { arch: 6, addr: spill(6), slot: 2 },
                MicroOp::Load { arch: 1, addr: spill(1), slot: 2 },
            ]
        );
        assert_eq!(c.tags(), &[Some(2), Some(3), Some(1)]);
    }

    #[test]
    fn pinned_entries_are_skipped_by_the_evictee_scan() {
        let mut c = CompactVrf::new(&cfg(3), 3);
        c.resolve(&[read_req(7), read_req(8), read_req(9)]);
        // v7 (slot 0, the head) hits first and is pinned; the miss on v6
        // must then evict slot 1 instead.
        let r = c.resolve(&[read_req(7), read_req(6)]);
        assert_eq!(r.hits, 1);
        assert_eq!(r.misses, 1);
        assert!(matches!(r.micro_ops[0], MicroOp::Store { arch: 8, slot: 1, .. }));
        assert!(matches!(r.micro_ops[1], MicroOp::Load { arch: 6, slot: 1, .. }));
        assert_eq!(c.tags(), &[Some(7), Some(6), Some(9)]);
    }

    #[test]
    fn duplicate_operands_share_a_slot_with_one_fill() {
        let mut c = CompactVrf::new(&cfg(4), 4);
        let r = c.resolve(&[read_req(5), read_req(5), write_req(5)]);
        assert_eq!(r.misses, 1);
        assert_eq!(r.hits, 2);
        assert_eq!(r.micro_ops.len(), 1);
        assert_eq!(r.phys, vec![PhysSlot::Idx(0); 3]);
    }

    #[test]
    fn allocation_with_free_slots_emits_only_a_load() {
        let mut c = CompactVrf::new(&cfg(4), 4);
        c.resolve(&[read_req(1), read_req(2)]);
        let r = c.resolve(&[read_req(3)]);
        assert_eq!(r.micro_ops.len(), 1);
        assert!(matches!(r.micro_ops[0], MicroOp::Load { arch: 3, .. }));
    }

    #[test]
    fn lru_replacement_keeps_recently_used_entries() {
        let lru_cfg = MachineConfig {
            vrf_model: VrfModel::Compact(3),
            replacement: Replacement::Lru,
            ..MachineConfig::default()
        }
        .validate()
        .unwrap();
        let mut c = CompactVrf::new(&lru_cfg, 3);
        c.resolve(&[read_req(1), read_req(2), read_req(3)]);
        c.resolve(&[read_req(1)]); // refresh v1
        let r = c.resolve(&[read_req(4)]);
        // FIFO would evict v1; LRU evicts v2.
        assert!(matches!(r.micro_ops[0], MicroOp::Store { arch: 2, .. }));
        assert!(c.lookup(1).is_some());

        let mut fifo = CompactVrf::new(&cfg(3), 3);
        fifo.resolve(&[read_req(1), read_req(2), read_req(3)]);
        fifo.resolve(&[read_req(1)]);
        let r = fifo.resolve(&[read_req(4)]);
        assert!(matches!(r.micro_ops[0], MicroOp::Store { arch: 1, .. }));
    }

    #[test]
    fn dirty_only_writeback_skips_clean_evictees() {
        let d_cfg = MachineConfig {
            vrf_model: VrfModel::Compact(3),
            writeback_on_evict: WritebackPolicy::DirtyOnly,
            ..MachineConfig::default()
        }
        .validate()
        .unwrap();
        let mut c = CompactVrf::new(&d_cfg, 3);
        c.resolve(&[read_req(1), write_req(2), read_req(3)]);
        // Evicting clean v1: no store. Evicting dirty v2: store.
        let r = c.resolve(&[read_req(4)]);
        assert!(matches!(r.micro_ops[0], MicroOp::Load { arch: 4, .. }));
        let r = c.resolve(&[read_req(5)]);
        assert!(matches!(r.micro_ops[0], MicroOp::Store { arch: 2, .. }));
    }

    #[test]
    fn spill_addresses_follow_the_packed_layout() {
        let cfg = MachineConfig::default();
        assert_eq!(spill_address(&cfg, 1).unwrap(), cfg.spill_base_addr);
        assert_eq!(spill_address(&cfg, 5).unwrap(), cfg.spill_base_addr + 128);
        assert_eq!(spill_address(&cfg, 0), Err(V0HasNoSpillSlot));
    }

    #[test]
    fn slot_write_then_read_is_identity_and_marks_dirty() {
        let mut c = CompactVrf::new(&cfg(3), 3);
        c.resolve(&[read_req(5)]);
        let mut v = VectorValue::zero(256);
        v.set_int(crate::vector::Sew::E32, 2, -77);
        c.write_slot(PhysSlot::Idx(0), v.clone());
        assert_eq!(c.read_slot(PhysSlot::Idx(0)), &v);
        assert!(c.dirty[0]);
    }

    #[test]
    fn writing_v0_updates_the_mask() {
        let mut c = CompactVrf::new(&cfg(3), 3);
        let mut v = VectorValue::zero(256);
        v.set_mask_bit(3, true);
        c.write_slot(PhysSlot::V0, v.clone());
        assert_eq!(c.read_slot(PhysSlot::V0), &v);
        assert!(c.tags().iter().all(|t| t.is_none()));
    }

    #[test]
    fn full_model_never_misses() {
        let full = MachineConfig::default().validate().unwrap();
        let mut vrf = VrfState::new(&full);
        let r = vrf.resolve(&[read_req(1), read_req(2), write_req(3)]);
        assert_eq!(r.misses, 0);
        assert_eq!(r.hits, 3);
        assert!(r.micro_ops.is_empty());
        assert_eq!(r.phys[2], PhysSlot::Idx(3));
    }

    #[test]
    fn debug_dump_snapshot() {
        let mut c = CompactVrf::new(&cfg(3), 3);
        c.resolve(&[read_req(4), write_req(7)]);
        assert_eq!(
            c.dump(),
            "phys#0: tag=v4 dirty=0 <head>\nphys#1: tag=v7 dirty=1\nphys#2: tag=- dirty=0 <tail>\n"
        );
    }
}
