//! Mini vector-assembly: instruction set definition, two-pass parser,
//! canonical disassembler, and static register-usage analysis.
//!
//! Source format: UTF-8 text, one instruction per line, `label:` lines,
//! `.data addr byte,byte,...` directives, `#` comments. Vector operands
//! are `v0`..`v31`; scalar operands accept `x0`..`x31` and the usual ABI
//! names. A trailing `, v0.t` masks the instruction by register v0.

mod parse;

pub use parse::{parse, AsmError, AsmErrorKind};

use std::collections::BTreeMap;
use std::fmt;

/// Supported mnemonics: the minimal closure over the kernel suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Opcode {
    // Scalar
    Li,
    Add,
    Addi,
    Sub,
    Mul,
    Slli,
    Bge,
    Blt,
    Bnez,
    J,
    Halt,
    // Vector configuration
    Vsetvli,
    // Vector memory (unit-stride and strided, 32-bit elements)
    Vle32,
    Vse32,
    Vlse32,
    Vsse32,
    // Vector integer
    VaddVv,
    VsubVv,
    VmulVv,
    VmaccVv,
    VmaddVv,
    VmaxVv,
    VmvVv,
    VmvVx,
    VredsumVs,
    // Vector float (IEEE f32 on 32-bit elements)
    VfaddVv,
    VfmulVv,
    VfmaccVv,
    VfmaxVv,
    VfredosumVs,
    // Mask generation
    VmsltVx,
}

/// Operand grammar of an opcode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// `li rd, imm`
    RdImm,
    /// `add rd, rs1, rs2`
    RdRs1Rs2,
    /// `addi rd, rs1, imm`
    RdRs1Imm,
    /// `bge rs1, rs2, label`
    BranchCmp,
    /// `bnez rs1, label`
    BranchZero,
    /// `j label`
    Jump,
    /// `halt`
    Bare,
    /// `vsetvli rd, rs1, e{8|16|32}` (SEW kept in `imm`)
    VsetvliShape,
    /// `vle32.v vd, (rs1)` / `vse32.v vs3, (rs1)` (store data kept in `vd`)
    VMemUnit,
    /// `vlse32.v vd, (rs1), rs2` / `vsse32.v vs3, (rs1), rs2`
    VMemStride,
    /// `vadd.vv vd, vs1, vs2` (also reductions)
    VdVs1Vs2,
    /// `vmv.v.v vd, vs1`
    VdVs1,
    /// `vmv.v.x vd, rs1`
    VdRs1,
    /// `vmslt.vx vd, vs1, rs1`
    VdVs1Rs1,
}

impl Opcode {
    pub fn mnemonic(self) -> &'static str {
        use Opcode::*;
        match self {
            Li => "li",
            Add => "add",
            Addi => "addi",
            Sub => "sub",
            Mul => "mul",
            Slli => "slli",
            Bge => "bge",
            Blt => "blt",
            Bnez => "bnez",
            J => "j",
            Halt => "halt",
            Vsetvli => "vsetvli",
            Vle32 => "vle32.v",
            Vse32 => "vse32.v",
            Vlse32 => "vlse32.v",
            Vsse32 => "vsse32.v",
            VaddVv => "vadd.vv",
            VsubVv => "vsub.vv",
            VmulVv => "vmul.vv",
            VmaccVv => "vmacc.vv",
            VmaddVv => "vmadd.vv",
            VmaxVv => "vmax.vv",
            VmvVv => "vmv.v.v",
            VmvVx => "vmv.v.x",
            VredsumVs => "vredsum.vs",
            VfaddVv => "vfadd.vv",
            VfmulVv => "vfmul.vv",
            VfmaccVv => "vfmacc.vv",
            VfmaxVv => "vfmax.vv",
            VfredosumVs => "vfredosum.vs",
            VmsltVx => "vmslt.vx",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Opcode> {
        use Opcode::*;
        Some(match s {
            "li" => Li,
            "add" => Add,
            "addi" => Addi,
            "sub" => Sub,
            "mul" => Mul,
            "slli" => Slli,
            "bge" => Bge,
            "blt" => Blt,
            "bnez" => Bnez,
            "j" => J,
            "halt" => Halt,
            "vsetvli" => Vsetvli,
            "vle32.v" => Vle32,
            "vse32.v" => Vse32,
            "vlse32.v" => Vlse32,
            "vsse32.v" => Vsse32,
            "vadd.vv" => VaddVv,
            "vsub.vv" => VsubVv,
            "vmul.vv" => VmulVv,
            "vmacc.vv" => VmaccVv,
            "vmadd.vv" => VmaddVv,
            "vmax.vv" => VmaxVv,
            "vmv.v.v" => VmvVv,
            "vmv.v.x" => VmvVx,
            "vredsum.vs" => VredsumVs,
            "vfadd.vv" => VfaddVv,
            "vfmul.vv" => VfmulVv,
            "vfmacc.vv" => VfmaccVv,
            "vfmax.vv" => VfmaxVv,
            "vfredosum.vs" => VfredosumVs,
            "vmslt.vx" => VmsltVx,
            _ => return None,
        })
    }

    pub fn shape(self) -> Shape {
        use Opcode::*;
        match self {
            Li => Shape::RdImm,
            Add | Sub | Mul => Shape::RdRs1Rs2,
            Addi | Slli => Shape::RdRs1Imm,
            Bge | Blt => Shape::BranchCmp,
            Bnez => Shape::BranchZero,
            J => Shape::Jump,
            Halt => Shape::Bare,
            Vsetvli => Shape::VsetvliShape,
            Vle32 | Vse32 => Shape::VMemUnit,
            Vlse32 | Vsse32 => Shape::VMemStride,
            VaddVv | VsubVv | VmulVv | VmaccVv | VmaddVv | VmaxVv | VredsumVs | VfaddVv
            | VfmulVv | VfmaccVv | VfmaxVv | VfredosumVs => Shape::VdVs1Vs2,
            VmvVv => Shape::VdVs1,
            VmvVx => Shape::VdRs1,
            VmsltVx => Shape::VdVs1Rs1,
        }
    }

    /// May this opcode carry a `, v0.t` mask suffix?
    pub fn supports_mask(self) -> bool {
        use Opcode::*;
        matches!(
            self,
            Vle32
                | Vse32
                | Vlse32
                | Vsse32
                | VaddVv
                | VsubVv
                | VmulVv
                | VmaccVv
                | VmaddVv
                | VmaxVv
                | VfaddVv
                | VfmulVv
                | VfmaccVv
                | VfmaxVv
        )
    }

    /// Multiply-accumulate style ops whose execution reads the destination.
    pub fn is_mac(self) -> bool {
        matches!(self, Opcode::VmaccVv | Opcode::VmaddVv | Opcode::VfmaccVv)
    }

    /// Vector store (the `vd` field holds the data source register).
    pub fn is_vector_store(self) -> bool {
        matches!(self, Opcode::Vse32 | Opcode::Vsse32)
    }

    /// Ops that write only part of the destination register even with a
    /// full vector length (reductions write element 0, compares write bits).
    pub fn is_partial_write(self) -> bool {
        matches!(
            self,
            Opcode::VredsumVs | Opcode::VfredosumVs | Opcode::VmsltVx
        )
    }

    /// Does this opcode reference any vector register at all?
    pub fn is_vector(self) -> bool {
        !matches!(self.shape(), Shape::VsetvliShape)
            && self.mnemonic().starts_with('v')
    }
}

/// One parsed instruction. Register fields are populated according to the
/// opcode's [`Shape`]; `imm` holds the immediate, the SEW for `vsetvli`,
/// or the resolved target instruction index for branches and jumps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub opcode: Opcode,
    pub vd: Option<u8>,
    pub vs1: Option<u8>,
    pub vs2: Option<u8>,
    pub rd: Option<u8>,
    pub rs1: Option<u8>,
    pub rs2: Option<u8>,
    pub imm: i64,
    pub masked: bool,
    /// True when execution needs the destination's old value: vmacc-style
    /// ops and any masked write. (A write with `vl` below the maximum also
    /// reads its destination; that is a runtime property handled by the
    /// pipeline since `vl` is not known statically.)
    pub reads_dest: bool,
}

impl Instruction {
    pub fn new(opcode: Opcode) -> Instruction {
        Instruction {
            opcode,
            vd: None,
            vs1: None,
            vs2: None,
            rd: None,
            rs1: None,
            rs2: None,
            imm: 0,
            masked: false,
            reads_dest: false,
        }
    }

    /// Vector operands in serial resolution order (vs1, vs2, then vd),
    /// as `(arch, is_read, is_written)`.
    pub fn vector_operands(&self) -> Vec<(u8, bool, bool)> {
        let mut ops = Vec::with_capacity(3);
        if let Some(v) = self.vs1 {
            ops.push((v, true, false));
        }
        if let Some(v) = self.vs2 {
            ops.push((v, true, false));
        }
        if let Some(v) = self.vd {
            if self.opcode.is_vector_store() {
                ops.push((v, true, false)); // store data is a source
            } else {
                ops.push((v, self.reads_dest, true));
            }
        }
        ops
    }
}

/// A loadable data segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSegment {
    pub addr: usize,
    pub bytes: Vec<u8>,
}

/// A parsed program: instructions, label map, and data segments.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub instructions: Vec<Instruction>,
    pub labels: BTreeMap<String, usize>,
    pub data_segments: Vec<DataSegment>,
}

/// Static register-usage summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RegisterUsageReport {
    /// Distinct vector registers referenced as explicit operands.
    /// v0 is counted only when it appears as an explicit operand, not
    /// when it is used solely through the `, v0.t` mask suffix.
    pub active_registers: usize,
    /// `active_registers / 32 * 100`.
    pub utilization_pct: f64,
    /// Explicit reference count per register.
    pub per_register_counts: BTreeMap<u8, u64>,
    /// Number of instructions that read v0 through the mask suffix.
    pub v0_mask_uses: u64,
}

/// Counts distinct vector registers statically referenced by the program.
pub fn analyze_registers(program: &Program) -> RegisterUsageReport {
    let mut counts: BTreeMap<u8, u64> = BTreeMap::new();
    let mut mask_uses = 0;
    for inst in &program.instructions {
        for reg in [inst.vd, inst.vs1, inst.vs2].into_iter().flatten() {
            *counts.entry(reg).or_insert(0) += 1;
        }
        if inst.masked {
            mask_uses += 1;
        }
    }
    let active = counts.len();
    RegisterUsageReport {
        active_registers: active,
        utilization_pct: active as f64 / 32.0 * 100.0,
        per_register_counts: counts,
        v0_mask_uses: mask_uses,
    }
}

impl fmt::Display for RegisterUsageReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "active vector registers: {} ({:.0}% of 32)",
            self.active_registers, self.utilization_pct
        )?;
        writeln!(f, "v0 mask-suffix uses: {}", self.v0_mask_uses)?;
        for (reg, count) in &self.per_register_counts {
            writeln!(f, "  v{reg}: {count} references")?;
        }
        Ok(())
    }
}

/// Renders a program as canonical text whose re-parse yields a
/// structurally identical [`Program`].
pub fn disassemble(program: &Program) -> String {
    let mut out = String::new();
    for seg in &program.data_segments {
        out.push_str(&format!(".data {} ", seg.addr));
        let bytes: Vec<String> = seg.bytes.iter().map(|b| b.to_string()).collect();
        out.push_str(&bytes.join(","));
        out.push('\n');
    }
    // Labels grouped by target index; BTreeMap iteration keeps the
    // emission order deterministic.
    let mut labels_at: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for (name, idx) in &program.labels {
        labels_at.entry(*idx).or_default().push(name);
    }
    let target_name = |idx: usize| -> String {
        labels_at
            .get(&idx)
            .and_then(|v| v.first())
            .expect("branch target must have a label")
            .to_string()
    };
    for (idx, inst) in program.instructions.iter().enumerate() {
        if let Some(names) = labels_at.get(&idx) {
            for name in names {
                out.push_str(name);
                out.push_str(":\n");
            }
        }
        out.push_str(&format_instruction(inst, &target_name));
        out.push('\n');
    }
    if let Some(names) = labels_at.get(&program.instructions.len()) {
        for name in names {
            out.push_str(name);
            out.push_str(":\n");
        }
    }
    out
}

fn format_instruction(inst: &Instruction, target_name: &dyn Fn(usize) -> String) -> String {
    let m = inst.opcode.mnemonic();
    let x = |r: Option<u8>| format!("x{}", r.unwrap());
    let v = |r: Option<u8>| format!("v{}", r.unwrap());
    let mask = if inst.masked { ", v0.t" } else { "" };
    match inst.opcode.shape() {
        Shape::RdImm => format!("{m} {}, {}", x(inst.rd), inst.imm),
        Shape::RdRs1Rs2 => format!("{m} {}, {}, {}", x(inst.rd), x(inst.rs1), x(inst.rs2)),
        Shape::RdRs1Imm => format!("{m} {}, {}, {}", x(inst.rd), x(inst.rs1), inst.imm),
        Shape::BranchCmp => format!(
            "{m} {}, {}, {}",
            x(inst.rs1),
            x(inst.rs2),
            target_name(inst.imm as usize)
        ),
        Shape::BranchZero => format!("{m} {}, {}", x(inst.rs1), target_name(inst.imm as usize)),
        Shape::Jump => format!("{m} {}", target_name(inst.imm as usize)),
        Shape::Bare => m.to_string(),
        Shape::VsetvliShape => format!("{m} {}, {}, e{}", x(inst.rd), x(inst.rs1), inst.imm),
        Shape::VMemUnit => format!("{m} {}, ({}){mask}", v(inst.vd), x(inst.rs1)),
        Shape::VMemStride => format!(
            "{m} {}, ({}), {}{mask}",
            v(inst.vd),
            x(inst.rs1),
            x(inst.rs2)
        ),
        Shape::VdVs1Vs2 => format!(
            "{m} {}, {}, {}{mask}",
            v(inst.vd),
            v(inst.vs1),
            v(inst.vs2)
        ),
        Shape::VdVs1 => format!("{m} {}, {}", v(inst.vd), v(inst.vs1)),
        Shape::VdRs1 => format!("{m} {}, {}", v(inst.vd), x(inst.rs1)),
        Shape::VdVs1Rs1 => format!(
            "{m} {}, {}, {}{mask}",
            v(inst.vd),
            v(inst.vs1),
            x(inst.rs1)
        ),
    }
}
