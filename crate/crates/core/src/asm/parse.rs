//! Two-pass assembler: pass 1 collects labels and data directives,
//! pass 2 encodes instructions and resolves branch targets.

use std::collections::BTreeMap;
use std::fmt;

use super::{DataSegment, Instruction, Opcode, Program, Shape};

/// Parse error with 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsmError {
    pub line: usize,
    pub col: usize,
    pub kind: AsmErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AsmErrorKind {
    Syntax(String),
    UnknownMnemonic(String),
    UndefinedLabel(String),
    BadRegister(String),
    DuplicateLabel(String),
    BadData(String),
    OverlappingData(String),
}

impl fmt::Display for AsmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match &self.kind {
            AsmErrorKind::Syntax(m) => format!("syntax error: {m}"),
            AsmErrorKind::UnknownMnemonic(m) => format!("unknown mnemonic {m:?}"),
            AsmErrorKind::UndefinedLabel(m) => format!("undefined label {m:?}"),
            AsmErrorKind::BadRegister(m) => format!("bad register {m:?} (ids are 0..=31)"),
            AsmErrorKind::DuplicateLabel(m) => format!("duplicate label {m:?}"),
            AsmErrorKind::BadData(m) => format!("bad data directive: {m}"),
            AsmErrorKind::OverlappingData(m) => format!("overlapping data segments: {m}"),
        };
        write!(f, "line {}, col {}: {}", self.line, self.col, what)
    }
}

impl std::error::Error for AsmError {}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    LParen,
    RParen,
    Comma,
    Colon,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    col: usize,
}

fn err(line: usize, col: usize, kind: AsmErrorKind) -> AsmError {
    AsmError { line, col, kind }
}

fn tokenize(line: &str, line_no: usize) -> Result<Vec<Token>, AsmError> {
    let mut toks = Vec::new();
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        match c {
            '#' => break,
            c if c.is_whitespace() => {
                i += 1;
            }
            '(' => {
                toks.push(Token { tok: Tok::LParen, col });
                i += 1;
            }
            ')' => {
                toks.push(Token { tok: Tok::RParen, col });
                i += 1;
            }
            ',' => {
                toks.push(Token { tok: Tok::Comma, col });
                i += 1;
            }
            ':' => {
                toks.push(Token { tok: Tok::Colon, col });
                i += 1;
            }
            c if c.is_ascii_digit() || c == '-' => {
                let start = i;
                i += 1;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric() || chars[i] == 'x' || chars[i] == 'X')
                {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let value = parse_i64(&text).ok_or_else(|| {
                    err(
                        line_no,
                        col,
                        AsmErrorKind::Syntax(format!("invalid number {text:?}")),
                    )
                })?;
                toks.push(Token {
                    tok: Tok::Int(value),
                    col,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' || c == '.' => {
                let start = i;
                i += 1;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '.')
                {
                    i += 1;
                }
                toks.push(Token {
                    tok: Tok::Ident(chars[start..i].iter().collect()),
                    col,
                });
            }
            other => {
                return Err(err(
                    line_no,
                    col,
                    AsmErrorKind::Syntax(format!("unexpected character {other:?}")),
                ));
            }
        }
    }
    Ok(toks)
}

fn parse_i64(text: &str) -> Option<i64> {
    let (neg, rest) = match text.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, text),
    };
    let v = if let Some(hex) = rest.strip_prefix("0x").or_else(|| rest.strip_prefix("0X")) {
        i64::from_str_radix(hex, 16).ok()?
    } else {
        rest.parse::<i64>().ok()?
    };
    Some(if neg { -v } else { v })
}

fn scalar_reg_id(name: &str) -> Option<u8> {
    let abi = [
        ("zero", 0),
        ("ra", 1),
        ("sp", 2),
        ("gp", 3),
        ("tp", 4),
        ("t0", 5),
        ("t1", 6),
        ("t2", 7),
        ("s0", 8),
        ("fp", 8),
        ("s1", 9),
        ("a0", 10),
        ("a1", 11),
        ("a2", 12),
        ("a3", 13),
        ("a4", 14),
        ("a5", 15),
        ("a6", 16),
        ("a7", 17),
        ("s2", 18),
        ("s3", 19),
        ("s4", 20),
        ("s5", 21),
        ("s6", 22),
        ("s7", 23),
        ("s8", 24),
        ("s9", 25),
        ("s10", 26),
        ("s11", 27),
        ("t3", 28),
        ("t4", 29),
        ("t5", 30),
        ("t6", 31),
    ];
    abi.iter().find(|(n, _)| *n == name).map(|(_, id)| *id)
}

struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn end_col(&self) -> usize {
        self.toks.last().map(|t| t.col + 1).unwrap_or(1)
    }

    fn syntax(&self, col: usize, msg: impl Into<String>) -> AsmError {
        err(self.line, col, AsmErrorKind::Syntax(msg.into()))
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), AsmError> {
        match self.next() {
            Some(t) if t.tok == want => Ok(()),
            Some(t) => Err(self.syntax(t.col, format!("expected {what}"))),
            None => Err(self.syntax(self.end_col(), format!("expected {what}"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize), AsmError> {
        match self.next() {
            Some(Token {
                tok: Tok::Ident(s),
                col,
            }) => Ok((s, col)),
            Some(t) => Err(self.syntax(t.col, format!("expected {what}"))),
            None => Err(self.syntax(self.end_col(), format!("expected {what}"))),
        }
    }

    fn int(&mut self, what: &str) -> Result<(i64, usize), AsmError> {
        match self.next() {
            Some(Token {
                tok: Tok::Int(v),
                col,
            }) => Ok((v, col)),
            Some(t) => Err(self.syntax(t.col, format!("expected {what}"))),
            None => Err(self.syntax(self.end_col(), format!("expected {what}"))),
        }
    }

    fn vector_reg(&mut self) -> Result<u8, AsmError> {
        let (name, col) = self.ident("vector register")?;
        let id = name
            .strip_prefix('v')
            .and_then(|d| d.parse::<u32>().ok())
            .ok_or_else(|| self.syntax(col, format!("expected vector register, got {name:?}")))?;
        if id > 31 {
            return Err(err(self.line, col, AsmErrorKind::BadRegister(name)));
        }
        Ok(id as u8)
    }

    fn scalar_reg(&mut self) -> Result<u8, AsmError> {
        let (name, col) = self.ident("scalar register")?;
        if let Some(id) = scalar_reg_id(&name) {
            return Ok(id);
        }
        if let Some(digits) = name.strip_prefix('x') {
            if let Ok(id) = digits.parse::<u32>() {
                if id > 31 {
                    return Err(err(self.line, col, AsmErrorKind::BadRegister(name)));
                }
                return Ok(id as u8);
            }
        }
        Err(self.syntax(col, format!("expected scalar register, got {name:?}")))
    }

    fn comma(&mut self) -> Result<(), AsmError> {
        self.expect(Tok::Comma, "','")
    }

    /// Optional trailing `, v0.t` mask suffix.
    fn mask_suffix(&mut self, opcode: Opcode) -> Result<bool, AsmError> {
        if self.peek().is_none() {
            return Ok(false);
        }
        let col = self.peek().unwrap().col;
        self.comma()?;
        let (name, ncol) = self.ident("mask suffix v0.t")?;
        if name != "v0.t" {
            return Err(self.syntax(ncol, format!("expected v0.t, got {name:?}")));
        }
        if !opcode.supports_mask() {
            return Err(self.syntax(
                col,
                format!("{} does not support masking", opcode.mnemonic()),
            ));
        }
        Ok(true)
    }

    fn finish(&mut self) -> Result<(), AsmError> {
        if let Some(t) = self.peek() {
            return Err(self.syntax(t.col, "unexpected trailing tokens"));
        }
        Ok(())
    }
}

struct PendingLine {
    line_no: usize,
    toks: Vec<Token>,
}

/// Parses mini-assembly source into a [`Program`].
pub fn parse(text: &str) -> Result<Program, AsmError> {
    let mut labels: BTreeMap<String, usize> = BTreeMap::new();
    let mut segments: Vec<(DataSegment, usize)> = Vec::new();
    let mut pending: Vec<PendingLine> = Vec::new();

    // Pass 1: labels, data directives, and instruction token streams.
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let mut toks = tokenize(raw, line_no)?;
        if toks.is_empty() {
            continue;
        }
        if matches!(&toks[0].tok, Tok::Ident(s) if s == ".data") {
            segments.push((parse_data_line(&toks, line_no)?, line_no));
            continue;
        }
        // One or more leading `name:` labels, then an optional instruction.
        loop {
            match (toks.first(), toks.get(1)) {
                (
                    Some(Token {
                        tok: Tok::Ident(name),
                        col,
                    }),
                    Some(Token {
                        tok: Tok::Colon, ..
                    }),
                ) => {
                    if labels.insert(name.clone(), pending.len()).is_some() {
                        return Err(err(
                            line_no,
                            *col,
                            AsmErrorKind::DuplicateLabel(name.clone()),
                        ));
                    }
                    toks.drain(..2);
                }
                _ => break,
            }
        }
        if !toks.is_empty() {
            pending.push(PendingLine { line_no, toks });
        }
    }

    // Pass 2: encode instructions with the complete label map.
    let mut instructions = Vec::with_capacity(pending.len());
    for p in &pending {
        instructions.push(parse_instruction(p, &labels)?);
    }

    // Data segments must not overlap one another.
    let mut spans: Vec<(usize, usize, usize)> = segments
        .iter()
        .map(|(s, line)| (s.addr, s.addr + s.bytes.len(), *line))
        .collect();
    spans.sort_unstable();
    for w in spans.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(err(
                w[1].2,
                1,
                AsmErrorKind::OverlappingData(format!(
                    "[{:#x}, {:#x}) intersects [{:#x}, {:#x})",
                    w[1].0, w[1].1, w[0].0, w[0].1
                )),
            ));
        }
    }

    Ok(Program {
        instructions,
        labels,
        data_segments: segments.into_iter().map(|(s, _)| s).collect(),
    })
}

fn parse_data_line(toks: &[Token], line_no: usize) -> Result<DataSegment, AsmError> {
    let mut cur = Cursor {
        toks,
        pos: 1,
        line: line_no,
    };
    let (addr, acol) = cur.int("data address")?;
    if addr < 0 {
        return Err(err(
            line_no,
            acol,
            AsmErrorKind::BadData("negative address".to_string()),
        ));
    }
    let mut bytes = Vec::new();
    loop {
        let (b, bcol) = cur.int("data byte")?;
        if !(0..=255).contains(&b) {
            return Err(err(
                line_no,
                bcol,
                AsmErrorKind::BadData(format!("byte {b} out of range 0..=255")),
            ));
        }
        bytes.push(b as u8);
        if cur.peek().is_none() {
            break;
        }
        cur.comma()?;
    }
    Ok(DataSegment {
        addr: addr as usize,
        bytes,
    })
}

fn parse_instruction(
    p: &PendingLine,
    labels: &BTreeMap<String, usize>,
) -> Result<Instruction, AsmError> {
    let mut cur = Cursor {
        toks: &p.toks,
        pos: 0,
        line: p.line_no,
    };
    let (mnemonic, mcol) = cur.ident("mnemonic")?;
    let opcode = Opcode::from_mnemonic(&mnemonic)
        .ok_or_else(|| err(p.line_no, mcol, AsmErrorKind::UnknownMnemonic(mnemonic)))?;
    let mut inst = Instruction::new(opcode);

    let label_target = |cur: &mut Cursor| -> Result<i64, AsmError> {
        let (name, col) = cur.ident("label")?;
        labels
            .get(&name)
            .map(|idx| *idx as i64)
            .ok_or_else(|| err(p.line_no, col, AsmErrorKind::UndefinedLabel(name)))
    };

    match opcode.shape() {
        Shape::RdImm => {
            inst.rd = Some(cur.scalar_reg()?);
            cur.comma()?;
            let (v, col) = cur.int("immediate")?;
            if !(-(1i64 << 31)..(1i64 << 32)).contains(&v) {
                return Err(cur.syntax(col, "immediate does not fit in 32 bits"));
            }
            inst.imm = v;
        }
        Shape::RdRs1Rs2 => {
            inst.rd = Some(cur.scalar_reg()?);
            cur.comma()?;
            inst.rs1 = Some(cur.scalar_reg()?);
            cur.comma()?;
            inst.rs2 = Some(cur.scalar_reg()?);
        }
        Shape::RdRs1Imm => {
            inst.rd = Some(cur.scalar_reg()?);
            cur.comma()?;
            inst.rs1 = Some(cur.scalar_reg()?);
            cur.comma()?;
            let (v, col) = cur.int("immediate")?;
            if opcode == Opcode::Slli && !(0..32).contains(&v) {
                return Err(cur.syntax(col, "shift amount must be in 0..=31"));
            }
            if !(-(1i64 << 31)..(1i64 << 31)).contains(&v) {
                return Err(cur.syntax(col, "immediate does not fit in 32 bits"));
            }
            inst.imm = v;
        }
        Shape::BranchCmp => {
            inst.rs1 = Some(cur.scalar_reg()?);
            cur.comma()?;
            inst.rs2 = Some(cur.scalar_reg()?);
            cur.comma()?;
            inst.imm = label_target(&mut cur)?;
        }
        Shape::BranchZero => {
            inst.rs1 = Some(cur.scalar_reg()?);
            cur.comma()?;
            inst.imm = label_target(&mut cur)?;
        }
        Shape::Jump => {
            inst.imm = label_target(&mut cur)?;
        }
        Shape::Bare => {}
        Shape::VsetvliShape => {
            inst.rd = Some(cur.scalar_reg()?);
            cur.comma()?;
            inst.rs1 = Some(cur.scalar_reg()?);
            cur.comma()?;
            let (sew, col) = cur.ident("element width e8|e16|e32")?;
            inst.imm = match sew.as_str() {
                "e8" => 8,
                "e16" => 16,
                "e32" => 32,
                other => {
                    return Err(cur.syntax(col, format!("expected e8|e16|e32, got {other:?}")))
                }
            };
        }
        Shape::VMemUnit => {
            inst.vd = Some(cur.vector_reg()?);
            cur.comma()?;
            cur.expect(Tok::LParen, "'('")?;
            inst.rs1 = Some(cur.scalar_reg()?);
            cur.expect(Tok::RParen, "')'")?;
            inst.masked = cur.mask_suffix(opcode)?;
        }
        Shape::VMemStride => {
            inst.vd = Some(cur.vector_reg()?);
            cur.comma()?;
            cur.expect(Tok::LParen, "'('")?;
            inst.rs1 = Some(cur.scalar_reg()?);
            cur.expect(Tok::RParen, "')'")?;
            cur.comma()?;
            inst.rs2 = Some(cur.scalar_reg()?);
            inst.masked = cur.mask_suffix(opcode)?;
        }
        Shape::VdVs1Vs2 => {
            inst.vd = Some(cur.vector_reg()?);
            cur.comma()?;
            inst.vs1 = Some(cur.vector_reg()?);
            cur.comma()?;
            inst.vs2 = Some(cur.vector_reg()?);
            inst.masked = cur.mask_suffix(opcode)?;
        }
        Shape::VdVs1 => {
            inst.vd = Some(cur.vector_reg()?);
            cur.comma()?;
            inst.vs1 = Some(cur.vector_reg()?);
        }
        Shape::VdRs1 => {
            inst.vd = Some(cur.vector_reg()?);
            cur.comma()?;
            inst.rs1 = Some(cur.scalar_reg()?);
        }
        Shape::VdVs1Rs1 => {
            inst.vd = Some(cur.vector_reg()?);
            cur.comma()?;
            inst.vs1 = Some(cur.vector_reg()?);
            cur.comma()?;
            inst.rs1 = Some(cur.scalar_reg()?);
            inst.masked = cur.mask_suffix(opcode)?;
        }
    }
    cur.finish()?;
    inst.reads_dest = opcode.is_mac() || inst.masked;
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::parse;

    #[test]
    fn abi_register_names_map_to_ids() {
        let p = parse("add a0, t0, s1\n").unwrap();
        let i = &p.instructions[0];
        assert_eq!((i.rd, i.rs1, i.rs2), (Some(10), Some(5), Some(9)));
    }

    #[test]
    fn unknown_mnemonic_is_reported() {
        let e = parse("vxor.vv v1, v2, v3\n").unwrap_err();
        assert!(matches!(e.kind, AsmErrorKind::UnknownMnemonic(_)));
    }

    #[test]
    fn undefined_label_is_reported() {
        let e = parse("j nowhere\n").unwrap_err();
        assert!(matches!(e.kind, AsmErrorKind::UndefinedLabel(_)));
        assert_eq!(e.col, 3);
    }

    #[test]
    fn forward_references_resolve() {
        let p = parse("j end\nli x5, 1\nend:\nhalt\n").unwrap();
        assert_eq!(p.instructions[0].imm, 2);
        assert_eq!(p.labels["end"], 2);
    }

    #[test]
    fn duplicate_labels_are_rejected() {
        let e = parse("a:\nhalt\na:\n").unwrap_err();
        assert!(matches!(e.kind, AsmErrorKind::DuplicateLabel(_)));
    }

    #[test]
    fn data_directive_parses_bytes() {
        let p = parse(".data 0x1000 1,2,0xff\n").unwrap();
        assert_eq!(p.data_segments[0].addr, 0x1000);
        assert_eq!(p.data_segments[0].bytes, vec![1, 2, 255]);
    }

    #[test]
    fn overlapping_data_is_rejected() {
        let e = parse(".data 16 1,2,3,4\n.data 18 9\n").unwrap_err();
        assert!(matches!(e.kind, AsmErrorKind::OverlappingData(_)));
    }

    #[test]
    fn masking_an_unmaskable_opcode_is_rejected() {
        let e = parse("vmv.v.v v1, v2, v0.t\n").unwrap_err();
        assert!(matches!(e.kind, AsmErrorKind::Syntax(_)));
    }

    #[test]
    fn label_and_instruction_share_a_line() {
        let p = parse("top: halt\n").unwrap();
        assert_eq!(p.labels["top"], 0);
        assert_eq!(p.instructions.len(), 1);
    }

    #[test]
    fn hex_and_negative_immediates() {
        let p = parse("li t0, 0x3E4CCCCD\nli t1, -44\n").unwrap();
        assert_eq!(p.instructions[0].imm, 0x3E4CCCCD);
        assert_eq!(p.instructions[1].imm, -44);
    }
}
