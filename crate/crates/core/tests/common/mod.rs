//! Shared test machinery: brute-force reference models and generators.
//! The references here are deliberately naive and independent of the
//! simulator's data structures.

use rdsim_core::asm::{DataSegment, Instruction, Opcode, Program, Shape};
use rdsim_core::kernels::splitmix64;

use std::collections::BTreeMap;

/// Uniform value in [0, bound).
pub fn rand_below(state: &mut u64, bound: u64) -> u64 {
    splitmix64(state) % bound
}

pub fn rand_bool(state: &mut u64) -> bool {
    splitmix64(state) & 1 == 1
}

/// One operand of a synthetic instruction for queue-oracle replay.
#[derive(Debug, Clone, Copy)]
pub struct OracleOp {
    pub arch: u8,
    pub written: bool,
}

/// Per-operand outcome of the reference queue simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleEvent {
    Hit,
    /// Miss, with the architectural register the queue evicted (if full).
    Miss { evicted: Option<u8> },
}

/// Brute-force fully-associative FIFO queue with the same pinning rule as
/// the compact VRF: operands resolve serially, each pins its register for
/// the rest of the instruction, eviction takes the oldest unpinned entry.
/// v0 never enters the queue.
pub struct FifoQueueRef {
    cap: usize,
    queue: Vec<u8>, // front = oldest
}

impl FifoQueueRef {
    pub fn new(cap: usize) -> FifoQueueRef {
        FifoQueueRef {
            cap,
            queue: Vec::new(),
        }
    }

    pub fn resolve(&mut self, ops: &[OracleOp]) -> Vec<OracleEvent> {
        let mut pinned: Vec<u8> = Vec::new();
        let mut events = Vec::with_capacity(ops.len());
        for op in ops {
            if op.arch == 0 {
                events.push(OracleEvent::Hit);
                continue;
            }
            if self.queue.contains(&op.arch) {
                events.push(OracleEvent::Hit);
            } else if self.queue.len() < self.cap {
                self.queue.push(op.arch);
                events.push(OracleEvent::Miss { evicted: None });
            } else {
                let victim_pos = self
                    .queue
                    .iter()
                    .position(|a| !pinned.contains(a))
                    .expect("at most 3 pinned entries in a queue of >= 3");
                let evicted = self.queue.remove(victim_pos);
                self.queue.push(op.arch);
                events.push(OracleEvent::Miss {
                    evicted: Some(evicted),
                });
            }
            pinned.push(op.arch);
        }
        events
    }
}

/// Brute-force set-associative LRU reference: per-set recency lists.
pub struct LruCacheRef {
    sets: Vec<Vec<usize>>, // sets[s] front = MRU, holds line tags
    ways: usize,
    num_sets: usize,
    line_bytes: usize,
}

impl LruCacheRef {
    pub fn new(size_bytes: usize, ways: usize, line_bytes: usize) -> LruCacheRef {
        let num_sets = size_bytes / (ways * line_bytes);
        LruCacheRef {
            sets: vec![Vec::new(); num_sets],
            ways,
            num_sets,
            line_bytes,
        }
    }

    /// Returns whether the access hits; updates recency.
    pub fn access(&mut self, addr: usize) -> bool {
        let line = addr / self.line_bytes;
        let set = line % self.num_sets;
        let tag = line / self.num_sets;
        let list = &mut self.sets[set];
        if let Some(pos) = list.iter().position(|t| *t == tag) {
            let t = list.remove(pos);
            list.insert(0, t);
            true
        } else {
            list.insert(0, tag);
            list.truncate(self.ways);
            false
        }
    }
}

/// Random valid instruction for parser round-trip tests. Labels must
/// already exist; branches pick a random one.
pub fn random_instruction(state: &mut u64, label_indices: &[usize]) -> Instruction {
    use Opcode::*;
    let pool = [
        Li, Add, Addi, Sub, Mul, Slli, Bge, Blt, Bnez, J, Halt, Vsetvli, Vle32, Vse32, Vlse32,
        Vsse32, VaddVv, VsubVv, VmulVv, VmaccVv, VmaddVv, VmaxVv, VmvVv, VmvVx, VredsumVs,
        VfaddVv, VfmulVv, VfmaccVv, VfmaxVv, VfredosumVs, VmsltVx,
    ];
    loop {
        let opcode = pool[rand_below(state, pool.len() as u64) as usize];
        if matches!(opcode.shape(), Shape::BranchCmp | Shape::BranchZero | Shape::Jump)
            && label_indices.is_empty()
        {
            continue;
        }
        return fill_instruction(opcode, state, label_indices);
    }
}

fn fill_instruction(opcode: Opcode, state: &mut u64, label_indices: &[usize]) -> Instruction {
    let mut inst = Instruction::new(opcode);
    let reg = |s: &mut u64| Some(rand_below(s, 32) as u8);
    match opcode.shape() {
        Shape::RdImm => {
            inst.rd = reg(state);
            inst.imm = rand_below(state, 1 << 32) as i64 - (1 << 31);
        }
        Shape::RdRs1Rs2 => {
            inst.rd = reg(state);
            inst.rs1 = reg(state);
            inst.rs2 = reg(state);
        }
        Shape::RdRs1Imm => {
            inst.rd = reg(state);
            inst.rs1 = reg(state);
            inst.imm = if opcode == Opcode::Slli {
                rand_below(state, 32) as i64
            } else {
                rand_below(state, 4001) as i64 - 2000
            };
        }
        Shape::BranchCmp => {
            inst.rs1 = reg(state);
            inst.rs2 = reg(state);
            inst.imm = label_indices[rand_below(state, label_indices.len() as u64) as usize] as i64;
        }
        Shape::BranchZero => {
            inst.rs1 = reg(state);
            inst.imm = label_indices[rand_below(state, label_indices.len() as u64) as usize] as i64;
        }
        Shape::Jump => {
            inst.imm = label_indices[rand_below(state, label_indices.len() as u64) as usize] as i64;
        }
        Shape::Bare => {}
        Shape::VsetvliShape => {
            inst.rd = reg(state);
            inst.rs1 = reg(state);
            inst.imm = [8, 16, 32][rand_below(state, 3) as usize];
        }
        Shape::VMemUnit => {
            inst.vd = reg(state);
            inst.rs1 = reg(state);
            inst.masked = rand_bool(state);
        }
        Shape::VMemStride => {
            inst.vd = reg(state);
            inst.rs1 = reg(state);
            inst.rs2 = reg(state);
            inst.masked = rand_bool(state);
        }
        Shape::VdVs1Vs2 => {
            inst.vd = reg(state);
            inst.vs1 = reg(state);
            inst.vs2 = reg(state);
            inst.masked = opcode.supports_mask() && rand_bool(state);
        }
        Shape::VdVs1 => {
            inst.vd = reg(state);
            inst.vs1 = reg(state);
        }
        Shape::VdRs1 => {
            inst.vd = reg(state);
            inst.rs1 = reg(state);
        }
        Shape::VdVs1Rs1 => {
            inst.vd = reg(state);
            inst.vs1 = reg(state);
            inst.rs1 = reg(state);
        }
    }
    inst.reads_dest = opcode.is_mac() || inst.masked;
    inst
}

/// Random structurally valid program: labels, branches, data segments.
pub fn random_program(state: &mut u64) -> Program {
    let len = 1 + rand_below(state, 40) as usize;
    let num_labels = rand_below(state, 5) as usize;
    let mut labels: BTreeMap<String, usize> = BTreeMap::new();
    for li in 0..num_labels {
        labels.insert(format!("lab{li}"), rand_below(state, len as u64 + 1) as usize);
    }
    let label_indices: Vec<usize> = labels.values().copied().collect();
    let instructions = (0..len)
        .map(|_| random_instruction(state, &label_indices))
        .collect();
    let mut data_segments = Vec::new();
    let mut addr = 0x1000;
    for _ in 0..rand_below(state, 4) {
        let n = 1 + rand_below(state, 40) as usize;
        let bytes: Vec<u8> = (0..n).map(|_| rand_below(state, 256) as u8).collect();
        data_segments.push(DataSegment { addr, bytes });
        addr += n + rand_below(state, 64) as usize + 1;
    }
    Program {
        instructions,
        labels,
        data_segments,
    }
}
