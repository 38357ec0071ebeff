//! Two-pass assembler for the RV64IMFD subset.
//!
//! Syntax, one statement per line:
//!
//! ```text
//! # comment            (also `//` and `;`)
//! label:  addi x5, x0, 42
//!         ld   a0, 8(sp)
//!         beq  a0, a1, label     # label or numeric byte offset
//!         fmadd.s ft0, ft1, ft2, ft3, rne   # optional rounding mode
//!         .word 0x13
//!         .dword 0x1234
//! ```
//!
//! Registers use `xN`/`fN` or ABI names. Pseudo-instructions: `nop`, `li`,
//! `la`, `mv`, `not`, `neg`, `j`, `jr`, `ret`, `call`, `beqz`, `bnez`,
//! `bltz`, `bgez`, `blez`, `bgtz`, `bgt`, `ble`, `bgtu`, `bleu`, `fmv.s`,
//! `fmv.d`, `fneg.s`, `fneg.d`, `fabs.s`, `fabs.d`.

use crate::isa::{default_rm, EncodeError, Format, Instruction, Opcode, RegFile};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AsmErrorKind {
    #[error("unknown mnemonic `{0}`")]
    UnknownMnemonic(String),
    #[error("undefined label `{0}`")]
    UndefinedLabel(String),
    #[error("immediate {0} out of range")]
    ImmediateOutOfRange(i64),
    #[error("bad operand `{0}`")]
    BadOperand(String),
    #[error("expected {expected} operands, found {found}")]
    OperandCount { expected: usize, found: usize },
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("unknown directive `{0}`")]
    UnknownDirective(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct AsmError {
    pub line: usize,
    pub kind: AsmErrorKind,
}

/// Assembled code and the resolved label addresses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assembled {
    pub base: u64,
    pub code: Vec<u8>,
    pub labels: BTreeMap<String, u64>,
}

impl Assembled {
    pub fn words(&self) -> impl Iterator<Item = u32> + '_ {
        self.code.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap()))
    }
}

/// Assembles `source` at address 0 and returns the code bytes.
pub fn assemble(source: &str) -> Result<Vec<u8>, AsmError> {
    assemble_at(source, 0).map(|a| a.code)
}

/// Assembles `source` for placement at `base`.
pub fn assemble_at(source: &str, base: u64) -> Result<Assembled, AsmError> {
    let stmts = parse(source)?;

    // pass 1: sizes and label addresses
    let mut labels = BTreeMap::new();
    let mut addr = base;
    for st in &stmts {
        for l in &st.labels {
            if labels.insert(l.clone(), addr).is_some() {
                return Err(AsmError { line: st.line, kind: AsmErrorKind::DuplicateLabel(l.clone()) });
            }
        }
        if let Some(body) = &st.body {
            addr += size_of(body).map_err(|kind| AsmError { line: st.line, kind })?;
        }
    }

    // pass 2: encode
    let mut code = Vec::with_capacity((addr - base) as usize);
    for st in &stmts {
        let Some(body) = &st.body else { continue };
        let pc = base + code.len() as u64;
        let ctx = Ctx { labels: &labels, pc };
        emit(body, &ctx, &mut code).map_err(|kind| AsmError { line: st.line, kind })?;
    }
    Ok(Assembled { base, code, labels })
}

struct Stmt {
    line: usize,
    labels: Vec<String>,
    body: Option<Body>,
}

struct Body {
    mnemonic: String,
    operands: Vec<String>,
}

fn strip_comment(line: &str) -> &str {
    let mut end = line.len();
    for pat in ["#", "//", ";"] {
        if let Some(i) = line.find(pat) {
            end = end.min(i);
        }
    }
    &line[..end]
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '.')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '$')
}

fn parse(source: &str) -> Result<Vec<Stmt>, AsmError> {
    let mut out = Vec::new();
    for (i, raw) in source.lines().enumerate() {
        let line = i + 1;
        let mut rest = strip_comment(raw).trim();
        let mut labels = Vec::new();
        while let Some(colon) = rest.find(':') {
            let name = rest[..colon].trim();
            if !is_ident(name) {
                break;
            }
            labels.push(name.to_string());
            rest = rest[colon + 1..].trim();
        }
        let body = if rest.is_empty() {
            None
        } else {
            let (mn, ops) = match rest.find(char::is_whitespace) {
                Some(i) => (&rest[..i], rest[i..].trim()),
                None => (rest, ""),
            };
            let operands = if ops.is_empty() {
                Vec::new()
            } else {
                ops.split(',').map(|s| s.trim().to_string()).collect()
            };
            Some(Body { mnemonic: mn.to_ascii_lowercase(), operands })
        };
        if !labels.is_empty() || body.is_some() {
            out.push(Stmt { line, labels, body });
        }
    }
    Ok(out)
}

fn parse_int(s: &str) -> Option<i64> {
    let s = s.trim();
    let (neg, digits) = match s.strip_prefix('-') {
        Some(d) => (true, d),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let v = if let Some(h) = digits.strip_prefix("0x").or_else(|| digits.strip_prefix("0X")) {
        u64::from_str_radix(&h.replace('_', ""), 16).ok()? as i64
    } else if let Some(b) = digits.strip_prefix("0b") {
        u64::from_str_radix(&b.replace('_', ""), 2).ok()? as i64
    } else {
        digits.replace('_', "").parse::<u64>().ok()? as i64
    };
    Some(if neg { v.wrapping_neg() } else { v })
}

const INT_ABI: [&str; 32] = [
    "zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "s0", "s1", "a0", "a1", "a2", "a3", "a4",
    "a5", "a6", "a7", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9", "s10", "s11", "t3", "t4",
    "t5", "t6",
];

const FP_ABI: [&str; 32] = [
    "ft0", "ft1", "ft2", "ft3", "ft4", "ft5", "ft6", "ft7", "fs0", "fs1", "fa0", "fa1", "fa2",
    "fa3", "fa4", "fa5", "fa6", "fa7", "fs2", "fs3", "fs4", "fs5", "fs6", "fs7", "fs8", "fs9",
    "fs10", "fs11", "ft8", "ft9", "ft10", "ft11",
];

fn parse_reg(s: &str, file: RegFile) -> Result<u8, AsmErrorKind> {
    let s = s.trim();
    let bad = || AsmErrorKind::BadOperand(s.to_string());
    let (prefix, abi): (char, &[&str; 32]) = match file {
        RegFile::Float => ('f', &FP_ABI),
        _ => ('x', &INT_ABI),
    };
    if let Some(n) = s.strip_prefix(prefix).and_then(|d| d.parse::<u8>().ok()) {
        return if n < 32 { Ok(n) } else { Err(bad()) };
    }
    if file == RegFile::Int && s == "fp" {
        return Ok(8);
    }
    abi.iter().position(|r| *r == s).map(|p| p as u8).ok_or_else(bad)
}

fn parse_rm(s: &str) -> Result<u8, AsmErrorKind> {
    Ok(match s.trim() {
        "rne" => 0,
        "rtz" => 1,
        "rdn" => 2,
        "rup" => 3,
        "rmm" => 4,
        "dyn" => 7,
        other => return Err(AsmErrorKind::BadOperand(other.to_string())),
    })
}

/// `imm(reg)` or `(reg)`.
fn parse_mem(s: &str) -> Result<(i64, u8), AsmErrorKind> {
    let bad = || AsmErrorKind::BadOperand(s.to_string());
    let open = s.find('(').ok_or_else(bad)?;
    let close = s.rfind(')').ok_or_else(bad)?;
    let off = s[..open].trim();
    let imm = if off.is_empty() { 0 } else { parse_int(off).ok_or_else(bad)? };
    let reg = parse_reg(&s[open + 1..close], RegFile::Int)?;
    Ok((imm, reg))
}

fn expect(ops: &[String], n: usize) -> Result<(), AsmErrorKind> {
    if ops.len() == n {
        Ok(())
    } else {
        Err(AsmErrorKind::OperandCount { expected: n, found: ops.len() })
    }
}

fn fits12(v: i64) -> bool {
    (-2048..=2047).contains(&v)
}

/// Number of instructions `li` expands to.
fn li_len(v: i64) -> Result<u64, AsmErrorKind> {
    if fits12(v) {
        Ok(1)
    } else if v >= i32::MIN as i64 && v <= i32::MAX as i64 {
        Ok(2)
    } else {
        Err(AsmErrorKind::ImmediateOutOfRange(v))
    }
}

fn size_of(body: &Body) -> Result<u64, AsmErrorKind> {
    let ops = &body.operands;
    Ok(match body.mnemonic.as_str() {
        ".word" => 4 * ops.len() as u64,
        ".dword" => 8 * ops.len() as u64,
        ".text" | ".globl" | ".global" => 0,
        d if d.starts_with('.') => return Err(AsmErrorKind::UnknownDirective(d.to_string())),
        "li" => {
            expect(ops, 2)?;
            let v = parse_int(&ops[1]).ok_or_else(|| AsmErrorKind::BadOperand(ops[1].clone()))?;
            4 * li_len(v)?
        }
        "la" => 8,
        _ => 4,
    })
}

struct Ctx<'a> {
    labels: &'a BTreeMap<String, u64>,
    pc: u64,
}

impl Ctx<'_> {
    /// Label or numeric offset, relative to the current instruction.
    fn offset(&self, s: &str) -> Result<i64, AsmErrorKind> {
        if let Some(v) = parse_int(s) {
            return Ok(v);
        }
        if !is_ident(s) {
            return Err(AsmErrorKind::BadOperand(s.to_string()));
        }
        self.labels
            .get(s)
            .map(|&a| a.wrapping_sub(self.pc) as i64)
            .ok_or_else(|| AsmErrorKind::UndefinedLabel(s.to_string()))
    }
}

fn enc_err(e: EncodeError) -> AsmErrorKind {
    match e {
        EncodeError::ImmediateOutOfRange { value, .. } => AsmErrorKind::ImmediateOutOfRange(value),
        EncodeError::MisalignedOffset(v) => AsmErrorKind::ImmediateOutOfRange(v),
        EncodeError::BadRegister(r) => AsmErrorKind::BadOperand(format!("x{r}")),
        EncodeError::BadRoundingMode(rm) => AsmErrorKind::BadOperand(format!("rm {rm}")),
    }
}

fn push(code: &mut Vec<u8>, i: Result<Instruction, EncodeError>) -> Result<(), AsmErrorKind> {
    code.extend_from_slice(&i.map_err(enc_err)?.raw.to_le_bytes());
    Ok(())
}

fn emit(body: &Body, ctx: &Ctx, code: &mut Vec<u8>) -> Result<(), AsmErrorKind> {
    use Opcode::*;
    let ops = &body.operands;
    let xr = |i: usize| parse_reg(&ops[i], RegFile::Int);
    let fr = |i: usize| parse_reg(&ops[i], RegFile::Float);
    let int = |i: usize| parse_int(&ops[i]).ok_or_else(|| AsmErrorKind::BadOperand(ops[i].clone()));

    match body.mnemonic.as_str() {
        ".word" => {
            for i in 0..ops.len() {
                let v = int(i)?;
                if v < i32::MIN as i64 || v > u32::MAX as i64 {
                    return Err(AsmErrorKind::ImmediateOutOfRange(v));
                }
                code.extend_from_slice(&(v as u32).to_le_bytes());
            }
            return Ok(());
        }
        ".dword" => {
            for i in 0..ops.len() {
                code.extend_from_slice(&(int(i)? as u64).to_le_bytes());
            }
            return Ok(());
        }
        ".text" | ".globl" | ".global" => return Ok(()),
        "nop" => {
            expect(ops, 0)?;
            return push(code, Ok(Instruction::nop()));
        }
        "li" => {
            expect(ops, 2)?;
            let rd = xr(0)?;
            let v = int(1)?;
            if li_len(v)? == 1 {
                return push(code, Instruction::i(Addi, rd, 0, v));
            }
            let lo = (v << 52) >> 52;
            let hi = ((v - lo) as i32) as i64;
            push(code, Instruction::u(Lui, rd, hi))?;
            return push(code, Instruction::i(Addiw, rd, rd, lo));
        }
        "la" => {
            expect(ops, 2)?;
            let rd = xr(0)?;
            let off = ctx.offset(&ops[1])?;
            let lo = (off << 52) >> 52;
            let hi = off - lo;
            if hi < i32::MIN as i64 || hi > i32::MAX as i64 {
                return Err(AsmErrorKind::ImmediateOutOfRange(off));
            }
            push(code, Instruction::u(Auipc, rd, hi))?;
            return push(code, Instruction::i(Addi, rd, rd, lo));
        }
        "mv" => {
            expect(ops, 2)?;
            return push(code, Instruction::i(Addi, xr(0)?, xr(1)?, 0));
        }
        "not" => {
            expect(ops, 2)?;
            return push(code, Instruction::i(Xori, xr(0)?, xr(1)?, -1));
        }
        "neg" => {
            expect(ops, 2)?;
            return push(code, Instruction::r(Sub, xr(0)?, 0, xr(1)?));
        }
        "j" => {
            expect(ops, 1)?;
            return push(code, Instruction::j(0, ctx.offset(&ops[0])?));
        }
        "call" => {
            expect(ops, 1)?;
            return push(code, Instruction::j(1, ctx.offset(&ops[0])?));
        }
        "jr" => {
            expect(ops, 1)?;
            return push(code, Instruction::i(Jalr, 0, xr(0)?, 0));
        }
        "ret" => {
            expect(ops, 0)?;
            return push(code, Instruction::i(Jalr, 0, 1, 0));
        }
        "beqz" | "bnez" | "bltz" | "bgez" | "blez" | "bgtz" => {
            expect(ops, 2)?;
            let r = xr(0)?;
            let off = ctx.offset(&ops[1])?;
            let i = match body.mnemonic.as_str() {
                "beqz" => Instruction::b(Beq, r, 0, off),
                "bnez" => Instruction::b(Bne, r, 0, off),
                "bltz" => Instruction::b(Blt, r, 0, off),
                "bgez" => Instruction::b(Bge, r, 0, off),
                "blez" => Instruction::b(Bge, 0, r, off),
                _ => Instruction::b(Blt, 0, r, off),
            };
            return push(code, i);
        }
        "bgt" | "ble" | "bgtu" | "bleu" => {
            expect(ops, 3)?;
            let (a, b) = (xr(0)?, xr(1)?);
            let off = ctx.offset(&ops[2])?;
            let op = match body.mnemonic.as_str() {
                "bgt" => Blt,
                "ble" => Bge,
                "bgtu" => Bltu,
                _ => Bgeu,
            };
            return push(code, Instruction::b(op, b, a, off));
        }
        "fmv.s" | "fmv.d" | "fneg.s" | "fneg.d" | "fabs.s" | "fabs.d" => {
            expect(ops, 2)?;
            let (rd, rs) = (fr(0)?, fr(1)?);
            let double = body.mnemonic.ends_with(".d");
            let op = match (&body.mnemonic[..4], double) {
                ("fmv.", false) => FsgnjS,
                ("fmv.", true) => FsgnjD,
                ("fneg", false) => FsgnjnS,
                ("fneg", true) => FsgnjnD,
                ("fabs", false) => FsgnjxS,
                _ => FsgnjxD,
            };
            return push(code, Instruction::r(op, rd, rs, rs));
        }
        _ => {}
    }

    let op = Opcode::from_mnemonic(&body.mnemonic)
        .ok_or_else(|| AsmErrorKind::UnknownMnemonic(body.mnemonic.clone()))?;
    let files = op.reg_files();
    let reg = |i: usize, slot: usize| parse_reg(&ops[i], files[slot]);
    // optional trailing rounding mode
    let rm_at = |i: usize| -> Result<u8, AsmErrorKind> {
        if ops.len() > i {
            parse_rm(&ops[i])
        } else {
            Ok(default_rm(op))
        }
    };
    let with_rm = |n: usize| -> Result<(), AsmErrorKind> {
        if ops.len() == n || ops.len() == n + 1 {
            Ok(())
        } else {
            Err(AsmErrorKind::OperandCount { expected: n, found: ops.len() })
        }
    };

    let instr = match op.format() {
        Format::R => {
            expect(ops, 3)?;
            Instruction::r(op, reg(0, 0)?, reg(1, 1)?, reg(2, 2)?)
        }
        Format::R4 => {
            with_rm(4)?;
            Instruction::new(op, reg(0, 0)?, reg(1, 1)?, reg(2, 2)?, reg(3, 3)?, rm_at(4)?, 0)
        }
        Format::RRm => {
            with_rm(3)?;
            Instruction::new(op, reg(0, 0)?, reg(1, 1)?, reg(2, 2)?, 0, rm_at(3)?, 0)
        }
        Format::R1Rm => {
            with_rm(2)?;
            Instruction::new(op, reg(0, 0)?, reg(1, 1)?, 0, 0, rm_at(2)?, 0)
        }
        Format::R1 => {
            expect(ops, 2)?;
            Instruction::r1(op, reg(0, 0)?, reg(1, 1)?)
        }
        Format::I | Format::Sh6 | Format::Sh5 => {
            if op == Jalr && ops.len() == 2 {
                let (imm, rs1) = parse_mem(&ops[1])?;
                Instruction::i(op, reg(0, 0)?, rs1, imm)
            } else {
                expect(ops, 3)?;
                Instruction::i(op, reg(0, 0)?, reg(1, 1)?, int(2)?)
            }
        }
        Format::Load => {
            if op == Jalr && ops.len() == 1 {
                Instruction::i(op, 1, reg(0, 1)?, 0)
            } else if op == Jalr && ops.len() == 3 {
                Instruction::i(op, reg(0, 0)?, reg(1, 1)?, int(2)?)
            } else {
                expect(ops, 2)?;
                let (imm, rs1) = parse_mem(&ops[1])?;
                Instruction::i(op, reg(0, 0)?, rs1, imm)
            }
        }
        Format::Store => {
            expect(ops, 2)?;
            let (imm, rs1) = parse_mem(&ops[1])?;
            Instruction::s(op, reg(0, 2)?, rs1, imm)
        }
        Format::B => {
            expect(ops, 3)?;
            Instruction::b(op, reg(0, 1)?, reg(1, 2)?, ctx.offset(&ops[2])?)
        }
        Format::U => {
            expect(ops, 2)?;
            let v = int(1)?;
            if !(-0x80000..=0xfffff).contains(&v) {
                return Err(AsmErrorKind::ImmediateOutOfRange(v));
            }
            Instruction::u(op, reg(0, 0)?, ((v << 12) as i32) as i64)
        }
        Format::J => {
            if ops.len() == 1 {
                Instruction::j(1, ctx.offset(&ops[0])?)
            } else {
                expect(ops, 2)?;
                Instruction::j(reg(0, 0)?, ctx.offset(&ops[1])?)
            }
        }
        Format::Fence => match ops.len() {
            0 => Instruction::new(op, 0, 0, 0, 0, 0, 0x0ff),
            1 => Instruction::new(op, 0, 0, 0, 0, 0, int(0)?),
            n => return Err(AsmErrorKind::OperandCount { expected: 1, found: n }),
        },
        Format::Sys => {
            expect(ops, 0)?;
            Instruction::new(op, 0, 0, 0, 0, 0, 0)
        }
    };
    push(code, instr)
}
