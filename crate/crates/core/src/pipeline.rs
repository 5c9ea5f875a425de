//! Single-issue IF/ID/EX execution and timing engine.
//!
//! Timing model: one base cycle per retired instruction; program-level
//! memory operations add their access latency beyond that one cycle;
//! dispersion micro-ops stall the pipeline for the sum of their memory
//! latencies. Branches resolve with no penalty and the vector ALU retires
//! one vector instruction per cycle regardless of SEW.

use crate::asm::{DataSegment, Instruction, Opcode, Program};
use crate::config::{DestFetch, ValidatedConfig, NUM_ARCH_VREGS};
use crate::mem::{MemError, MemSys};
use crate::stats::ExecStats;
use crate::vector::Sew;
use crate::vrf::{MicroOp, OperandReq, PhysSlot, VrfState};

use std::fmt;

#[derive(Debug)]
pub enum SimError {
    InvalidPc(usize),
    DecodeFault { pc: usize, message: String },
    CycleLimitExceeded { max_cycles: u64 },
    DataOverlapsSpill { addr: usize, len: usize },
    Mem { pc: usize, err: MemError },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::InvalidPc(pc) => write!(f, "pc {pc} is outside the program"),
            SimError::DecodeFault { pc, message } => {
                write!(f, "decode fault at pc {pc}: {message}")
            }
            SimError::CycleLimitExceeded { max_cycles } => {
                write!(f, "cycle limit {max_cycles} exceeded (missing halt?)")
            }
            SimError::DataOverlapsSpill { addr, len } => write!(
                f,
                "data segment [{addr:#x}, +{len}) overlaps the register spill region"
            ),
            SimError::Mem { pc, err } => write!(f, "memory error at pc {pc}: {err}"),
        }
    }
}

impl std::error::Error for SimError {}

/// Per-instruction trace record: `pc, mnemonic, hits, misses, microops,
/// cycles_so_far`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRow {
    pub pc: usize,
    pub mnemonic: &'static str,
    pub hits: u64,
    pub misses: u64,
    pub micro_ops: usize,
    pub cycles_so_far: u64,
}

impl fmt::Display for TraceRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{}",
            self.pc, self.mnemonic, self.hits, self.misses, self.micro_ops, self.cycles_so_far
        )
    }
}

/// Complete machine state for one simulation.
pub struct MachineState {
    pub pc: usize,
    pub scalar_regs: [i32; 32],
    pub vrf: VrfState,
    pub mem: MemSys,
    pub vl: usize,
    pub sew: Sew,
    pub stats: ExecStats,
    pub halted: bool,
    cfg: ValidatedConfig,
}

impl MachineState {
    /// Builds the reset state: zeroed registers and memory (so every
    /// architectural vector register reads as zero under both VRF models),
    /// with the program's data segments loaded.
    pub fn new(program: &Program, cfg: &ValidatedConfig) -> Result<MachineState, SimError> {
        let mut mem = MemSys::new(cfg);
        let spill_lo = cfg.spill_base_addr;
        let spill_hi = spill_lo + cfg.spill_region_bytes();
        for seg in &program.data_segments {
            if seg.addr < spill_hi && seg.addr + seg.bytes.len() > spill_lo {
                return Err(SimError::DataOverlapsSpill {
                    addr: seg.addr,
                    len: seg.bytes.len(),
                });
            }
            mem.poke(seg.addr, &seg.bytes);
        }
        Ok(MachineState {
            pc: 0,
            scalar_regs: [0; 32],
            vrf: VrfState::new(cfg),
            mem: MemSys::new(cfg),
            vl: 0,
            sew: Sew::E32,
            stats: ExecStats::default(),
            halted: false,
            cfg: cfg.clone(),
        }
        .with_mem(mem))
    }

    fn with_mem(mut self, mem: MemSys) -> MachineState {
        self.mem = mem;
        self
    }

    pub fn config(&self) -> &ValidatedConfig {
        &self.cfg
    }

    fn vlmax(&self) -> usize {
        self.cfg.vlen_bits / self.sew.bits()
    }

    fn sreg(&self, r: Option<u8>, pc: usize) -> Result<i32, SimError> {
        let r = r.ok_or_else(|| SimError::DecodeFault {
            pc,
            message: "missing scalar operand".to_string(),
        })?;
        Ok(self.scalar_regs[r as usize])
    }

    fn set_sreg(&mut self, r: Option<u8>, value: i32, pc: usize) -> Result<(), SimError> {
        let r = r.ok_or_else(|| SimError::DecodeFault {
            pc,
            message: "missing scalar destination".to_string(),
        })?;
        if r != 0 {
            self.scalar_regs[r as usize] = value; // x0 stays hardwired to zero
        }
        Ok(())
    }

    /// Executes one instruction; returns its trace record.
    pub fn step(&mut self, program: &Program) -> Result<TraceRow, SimError> {
        if self.halted {
            return Err(SimError::InvalidPc(self.pc));
        }
        let pc = self.pc;
        let inst = program
            .instructions
            .get(pc)
            .ok_or(SimError::InvalidPc(pc))?;

        self.stats.instructions_retired += 1;
        self.stats.cycles += 1; // base cycle
        let mut next_pc = pc + 1;
        let mut hits = 0;
        let mut misses = 0;
        let mut micro_ops = 0;

        use Opcode::*;
        match inst.opcode {
            Li => self.set_sreg(inst.rd, inst.imm as i32, pc)?,
            Add => {
                let v = self.sreg(inst.rs1, pc)?.wrapping_add(self.sreg(inst.rs2, pc)?);
                self.set_sreg(inst.rd, v, pc)?;
            }
            Sub => {
                let v = self.sreg(inst.rs1, pc)?.wrapping_sub(self.sreg(inst.rs2, pc)?);
                self.set_sreg(inst.rd, v, pc)?;
            }
            Mul => {
                let v = self.sreg(inst.rs1, pc)?.wrapping_mul(self.sreg(inst.rs2, pc)?);
                self.set_sreg(inst.rd, v, pc)?;
            }
            Addi => {
                let v = self.sreg(inst.rs1, pc)?.wrapping_add(inst.imm as i32);
                self.set_sreg(inst.rd, v, pc)?;
            }
            Slli => {
                let v = self.sreg(inst.rs1, pc)? << (inst.imm as u32);
                self.set_sreg(inst.rd, v, pc)?;
            }
            Bge => {
                if self.sreg(inst.rs1, pc)? >= self.sreg(inst.rs2, pc)? {
                    next_pc = inst.imm as usize;
                }
            }
            Blt => {
                if self.sreg(inst.rs1, pc)? < self.sreg(inst.rs2, pc)? {
                    next_pc = inst.imm as usize;
                }
            }
            Bnez => {
                if self.sreg(inst.rs1, pc)? != 0 {
                    next_pc = inst.imm as usize;
                }
            }
            J => next_pc = inst.imm as usize,
            Halt => self.halted = true,
            Vsetvli => {
                let sew = Sew::from_bits(inst.imm as usize).ok_or_else(|| SimError::DecodeFault {
                    pc,
                    message: format!("bad SEW {}", inst.imm),
                })?;
                self.sew = sew;
                let avl = self.sreg(inst.rs1, pc)? as u32 as usize;
                self.vl = avl.min(self.cfg.vlen_bits / sew.bits());
                self.set_sreg(inst.rd, self.vl as i32, pc)?;
            }
            _ => {
                let (h, m, mo) = self.exec_vector(inst, pc)?;
                hits = h;
                misses = m;
                micro_ops = mo;
            }
        }

        if next_pc > program.instructions.len()
            || (next_pc == program.instructions.len() && !self.halted)
        {
            return Err(SimError::InvalidPc(next_pc));
        }
        self.pc = next_pc;
        Ok(TraceRow {
            pc,
            mnemonic: inst.opcode.mnemonic(),
            hits,
            misses,
            micro_ops,
            cycles_so_far: self.stats.cycles,
        })
    }

    /// Resolves a vector instruction's operands, issues the dispersion
    /// micro-ops, executes the element-wise semantics, and charges cycles.
    fn exec_vector(
        &mut self,
        inst: &Instruction,
        pc: usize,
    ) -> Result<(u64, u64, usize), SimError> {
        let vlmax = self.vlmax();
        // An instruction needs its destination's old value when it is a
        // multiply-accumulate, masked, writes only part of the register,
        // or leaves a tail (vl below maximum) undisturbed.
        let needs_old_dest =
            inst.reads_dest || inst.opcode.is_partial_write() || self.vl < vlmax;
        let reqs: Vec<OperandReq> = inst
            .vector_operands()
            .into_iter()
            .map(|(arch, is_read, is_written)| OperandReq {
                arch,
                is_read,
                is_written,
                fill_on_miss: is_read
                    || self.cfg.dest_fetch == DestFetch::Always
                    || needs_old_dest,
            })
            .collect();
        let mut res = self.vrf.resolve(&reqs);
        self.stats.vrf_lookups += reqs.len() as u64;
        self.stats.vrf_hits += res.hits;
        self.stats.vrf_misses += res.misses;

        // Issue micro-ops strictly in order; the pipeline stalls for the
        // sum of their access latencies.
        let mut stall = 0u64;
        for mop in &res.micro_ops {
            match *mop {
                MicroOp::Store { addr, slot, .. } => {
                    let value = self.vrf.read(PhysSlot::Idx(slot)).clone();
                    let r = self
                        .mem
                        .write_vector(addr, &value)
                        .map_err(|err| SimError::Mem { pc, err })?;
                    self.count_l1(r.hit);
                    stall += r.latency_cycles;
                    self.stats.spills += 1;
                }
                MicroOp::Load { addr, slot, .. } => {
                    let (value, r) = self
                        .mem
                        .read_vector(addr)
                        .map_err(|err| SimError::Mem { pc, err })?;
                    let compact = self.vrf.compact_mut().expect("micro-ops imply compact VRF");
                    compact.fill_slot(slot, value);
                    self.count_l1(r.hit);
                    stall += r.latency_cycles;
                    self.stats.fills += 1;
                }
            }
        }
        res.stall_cycles = stall;
        self.stats.stall_cycles += stall;
        self.stats.cycles += stall;

        self.exec_semantics(inst, &res.phys, pc)?;
        Ok((res.hits, res.misses, res.micro_ops.len()))
    }

    fn count_l1(&mut self, hit: bool) {
        if hit {
            self.stats.l1_hits += 1;
        } else {
            self.stats.l1_misses += 1;
        }
    }

    /// Charges a program-level memory access: latency beyond the base cycle.
    fn charge_mem(&mut self, latency: u64) {
        let extra = latency.saturating_sub(1);
        self.stats.mem_extra_cycles += extra;
        self.stats.cycles += extra;
    }

    fn exec_semantics(
        &mut self,
        inst: &Instruction,
        phys: &[PhysSlot],
        pc: usize,
    ) -> Result<(), SimError> {
        use Opcode::*;
        let sew = self.sew;
        let vl = self.vl;
        let mask = self.vrf.mask().clone();
        let active = |i: usize| !inst.masked || mask.mask_bit(i);
        let elem_bytes = 4usize; // all memory ops move 32-bit elements

        match inst.opcode {
            Vle32 => {
                let base = self.sreg(inst.rs1, pc)? as u32 as usize;
                let dest = phys[0];
                let mut value = self.vrf.read(dest).clone();
                if vl > 0 {
                    let r = self
                        .mem
                        .access(base, vl * elem_bytes, false, None)
                        .map_err(|err| SimError::Mem { pc, err })?;
                    self.count_l1(r.hit);
                    self.charge_mem(r.latency_cycles);
                    let bytes = r.bytes.unwrap();
                    for i in 0..vl {
                        if active(i) {
                            let b = &bytes[i * 4..i * 4 + 4];
                            value.set_int(
                                Sew::E32,
                                i,
                                i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as i64,
                            );
                        }
                    }
                }
                self.vrf.write(dest, value);
            }
            Vse32 => {
                let base = self.sreg(inst.rs1, pc)? as u32 as usize;
                let value = self.vrf.read(phys[0]).clone();
                if vl > 0 {
                    // Byte-enable semantics: one access; masked-off element
                    // bytes keep their current memory contents.
                    let mut bytes = self.mem.peek(base, vl * elem_bytes).to_vec();
                    for i in 0..vl {
                        if active(i) {
                            let v = value.get_int(Sew::E32, i) as i32;
                            bytes[i * 4..i * 4 + 4].copy_from_slice(&v.to_le_bytes());
                        }
                    }
                    let r = self
                        .mem
                        .access(base, vl * elem_bytes, true, Some(&bytes))
                        .map_err(|err| SimError::Mem { pc, err })?;
                    self.count_l1(r.hit);
                    self.charge_mem(r.latency_cycles);
                }
            }
            Vlse32 => {
                let base = self.sreg(inst.rs1, pc)? as u32 as usize;
                let stride = self.sreg(inst.rs2, pc)? as isize;
                let dest = phys[0];
                let mut value = self.vrf.read(dest).clone();
                let mut latency = 0;
                for i in 0..vl {
                    if !active(i) {
                        continue;
                    }
                    let addr = base as isize + i as isize * stride;
                    let r = self
                        .mem
                        .access(addr as usize, elem_bytes, false, None)
                        .map_err(|err| SimError::Mem { pc, err })?;
                    self.count_l1(r.hit);
                    latency += r.latency_cycles;
                    let b = r.bytes.unwrap();
                    value.set_int(
                        Sew::E32,
                        i,
                        i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as i64,
                    );
                }
                self.charge_mem(latency.max(1));
                self.vrf.write(dest, value);
            }
            Vsse32 => {
                let base = self.sreg(inst.rs1, pc)? as u32 as usize;
                let stride = self.sreg(inst.rs2, pc)? as isize;
                let value = self.vrf.read(phys[0]).clone();
                let mut latency = 0;
                for i in 0..vl {
                    if !active(i) {
                        continue;
                    }
                    let addr = (base as isize + i as isize * stride) as usize;
                    let v = value.get_int(Sew::E32, i) as i32;
                    let r = self
                        .mem
                        .access(addr, elem_bytes, true, Some(&v.to_le_bytes()))
                        .map_err(|err| SimError::Mem { pc, err })?;
                    self.count_l1(r.hit);
                    latency += r.latency_cycles;
                }
                self.charge_mem(latency.max(1));
            }
            VmvVx => {
                let x = self.sreg(inst.rs1, pc)? as i64;
                let dest = phys[0];
                let mut value = self.vrf.read(dest).clone();
                for i in 0..vl {
                    value.set_int(sew, i, x);
                }
                self.vrf.write(dest, value);
            }
            VmvVv => {
                let src = self.vrf.read(phys[0]).clone();
                let dest = phys[1];
                let mut value = self.vrf.read(dest).clone();
                for i in 0..vl {
                    value.set_int(sew, i, src.get_int(sew, i));
                }
                self.vrf.write(dest, value);
            }
            VmsltVx => {
                let src = self.vrf.read(phys[0]).clone();
                let x = self.sreg(inst.rs1, pc)? as i64;
                let dest = phys[1];
                let mut value = self.vrf.read(dest).clone();
                for i in 0..vl {
                    value.set_mask_bit(i, src.get_int(sew, i) < x);
                }
                self.vrf.write(dest, value);
            }
            VredsumVs | VfredosumVs => {
                // vd[0] = vinit[0] + sum of vs elements [0, vl), in
                // ascending index order. With vl = 0 the destination is
                // left untouched.
                let data = self.vrf.read(phys[0]).clone();
                let init = self.vrf.read(phys[1]).clone();
                let dest = phys[2];
                if vl > 0 {
                    let mut value = self.vrf.read(dest).clone();
                    if inst.opcode == VredsumVs {
                        let mut acc = init.get_int(sew, 0);
                        for i in 0..vl {
                            acc = acc.wrapping_add(data.get_int(sew, i));
                        }
                        value.set_int(sew, 0, acc);
                    } else {
                        let mut acc = init.get_f32(0);
                        for i in 0..vl {
                            acc += data.get_f32(i);
                        }
                        value.set_f32(0, acc);
                    }
                    self.vrf.write(dest, value);
                }
            }
            VaddVv | VsubVv | VmulVv | VmaxVv | VmaccVv | VmaddVv | VfaddVv | VfmulVv
            | VfmaccVv | VfmaxVv => {
                let a = self.vrf.read(phys[0]).clone();
                let b = self.vrf.read(phys[1]).clone();
                let dest = phys[2];
                let mut d = self.vrf.read(dest).clone();
                for i in 0..vl {
                    if !active(i) {
                        continue;
                    }
                    match inst.opcode {
                        VaddVv => d.set_int(sew, i, a.get_int(sew, i).wrapping_add(b.get_int(sew, i))),
                        VsubVv => d.set_int(sew, i, a.get_int(sew, i).wrapping_sub(b.get_int(sew, i))),
                        VmulVv => d.set_int(sew, i, a.get_int(sew, i).wrapping_mul(b.get_int(sew, i))),
                        VmaxVv => d.set_int(sew, i, a.get_int(sew, i).max(b.get_int(sew, i))),
                        VmaccVv => d.set_int(
                            sew,
                            i,
                            d.get_int(sew, i)
                                .wrapping_add(a.get_int(sew, i).wrapping_mul(b.get_int(sew, i))),
                        ),
                        VmaddVv => d.set_int(
                            sew,
                            i,
                            d.get_int(sew, i)
                                .wrapping_mul(a.get_int(sew, i))
                                .wrapping_add(b.get_int(sew, i)),
                        ),
                        VfaddVv => d.set_f32(i, a.get_f32(i) + b.get_f32(i)),
                        VfmulVv => d.set_f32(i, a.get_f32(i) * b.get_f32(i)),
                        // Fused multiply-add: one rounding.
                        VfmaccVv => d.set_f32(i, a.get_f32(i).mul_add(b.get_f32(i), d.get_f32(i))),
                        VfmaxVv => d.set_f32(i, a.get_f32(i).max(b.get_f32(i))),
                        _ => unreachable!(),
                    }
                }
                self.vrf.write(dest, d);
            }
            _ => {
                return Err(SimError::DecodeFault {
                    pc,
                    message: format!("{} reached the vector unit", inst.opcode.mnemonic()),
                })
            }
        }
        Ok(())
    }

    /// Steps until halt, erroring out at `max_cycles`.
    pub fn run_to_halt(&mut self, program: &Program, max_cycles: u64) -> Result<(), SimError> {
        while !self.halted {
            if self.stats.cycles >= max_cycles {
                return Err(SimError::CycleLimitExceeded { max_cycles });
            }
            self.step(program)?;
        }
        Ok(())
    }
}

/// Result of a completed run.
pub struct RunOutcome {
    /// Full final memory image.
    pub memory: Vec<u8>,
    pub stats: ExecStats,
}

/// Runs a program to halt under the given configuration.
pub fn run(
    program: &Program,
    cfg: &ValidatedConfig,
    extra_segments: &[DataSegment],
    max_cycles: u64,
) -> Result<RunOutcome, SimError> {
    let mut state = load(program, cfg, extra_segments)?;
    state.run_to_halt(program, max_cycles)?;
    Ok(RunOutcome {
        memory: state.mem.peek(0, state.mem.size_bytes()).to_vec(),
        stats: state.stats,
    })
}

/// Like [`run`], also collecting the per-instruction trace.
pub fn run_traced(
    program: &Program,
    cfg: &ValidatedConfig,
    extra_segments: &[DataSegment],
    max_cycles: u64,
) -> Result<(RunOutcome, Vec<TraceRow>), SimError> {
    let mut state = load(program, cfg, extra_segments)?;
    let mut trace = Vec::new();
    while !state.halted {
        if state.stats.cycles >= max_cycles {
            return Err(SimError::CycleLimitExceeded { max_cycles });
        }
        trace.push(state.step(program)?);
    }
    Ok((
        RunOutcome {
            memory: state.mem.peek(0, state.mem.size_bytes()).to_vec(),
            stats: state.stats,
        },
        trace,
    ))
}

/// Result of a run with a steady-state measurement window.
pub struct SteadyOutcome {
    pub memory: Vec<u8>,
    /// Counters over the whole run.
    pub stats: ExecStats,
    /// Counters excluding the first `warmup_frac` of instructions, so
    /// compulsory cold-start fills do not distort comparisons.
    pub steady: ExecStats,
}

/// Runs twice: once to learn the instruction count, once snapshotting the
/// counters at the warmup boundary.
pub fn run_steady(
    program: &Program,
    cfg: &ValidatedConfig,
    extra_segments: &[DataSegment],
    max_cycles: u64,
    warmup_frac: f64,
) -> Result<SteadyOutcome, SimError> {
    let first = run(program, cfg, extra_segments, max_cycles)?;
    let warmup = (first.stats.instructions_retired as f64 * warmup_frac).ceil() as u64;
    let mut state = load(program, cfg, extra_segments)?;
    let mut at_warmup = ExecStats::default();
    while !state.halted {
        if state.stats.cycles >= max_cycles {
            return Err(SimError::CycleLimitExceeded { max_cycles });
        }
        state.step(program)?;
        if state.stats.instructions_retired == warmup {
            at_warmup = state.stats;
        }
    }
    Ok(SteadyOutcome {
        memory: state.mem.peek(0, state.mem.size_bytes()).to_vec(),
        stats: state.stats,
        steady: state.stats.since(&at_warmup),
    })
}

fn load(
    program: &Program,
    cfg: &ValidatedConfig,
    extra_segments: &[DataSegment],
) -> Result<MachineState, SimError> {
    let mut state = MachineState::new(program, cfg)?;
    let spill_lo = cfg.spill_base_addr;
    let spill_hi = spill_lo + cfg.spill_region_bytes();
    for seg in extra_segments {
        if seg.addr < spill_hi && seg.addr + seg.bytes.len() > spill_lo {
            return Err(SimError::DataOverlapsSpill {
                addr: seg.addr,
                len: seg.bytes.len(),
            });
        }
        state.mem.poke(seg.addr, &seg.bytes);
    }
    Ok(state)
}

/// Memory range comparison helper: equality of two images outside the
/// spill region (the full model never touches it, the compact model does).
pub fn images_match_excluding_spill(a: &[u8], b: &[u8], cfg: &ValidatedConfig) -> bool {
    let lo = cfg.spill_base_addr;
    let hi = lo + cfg.spill_region_bytes();
    a[..lo] == b[..lo] && a[hi..] == b[hi..]
}

#[allow(dead_code)]
fn assert_arch_count() {
    // Compile-time reminder that scalar and vector files are both 32-entry.
    const _: () = assert!(NUM_ARCH_VREGS == 32);
}
