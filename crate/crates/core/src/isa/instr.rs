use super::opcode::{Format, InstrClass, Opcode, RegFile, Width};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Dynamic rounding mode (use `frm`, which is fixed to round-to-nearest-even).
pub const RM_DYN: u8 = 0b111;
pub const RM_RNE: u8 = 0b000;
pub const RM_RTZ: u8 = 0b001;
pub const RM_RDN: u8 = 0b010;
pub const RM_RUP: u8 = 0b011;
pub const RM_RMM: u8 = 0b100;

/// A decoded RV64IMFD instruction.
///
/// Operand fields that the format does not use are zero. `raw` is always the
/// encoding of the other fields, so two instructions compare equal exactly
/// when their encodings do.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instruction {
    pub op: Opcode,
    pub rd: u8,
    pub rs1: u8,
    pub rs2: u8,
    pub rs3: u8,
    /// Rounding-mode field for FP encodings that carry one.
    pub rm: u8,
    /// Sign-extended immediate. U-type immediates hold the shifted value
    /// (`imm20 << 12`); fence holds the raw 12-bit pred/succ field.
    pub imm: i64,
    pub raw: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("register index {0} out of range")]
    BadRegister(u8),
    #[error("immediate {value} out of range for {op}")]
    ImmediateOutOfRange { op: Opcode, value: i64 },
    #[error("misaligned branch/jump offset {0}")]
    MisalignedOffset(i64),
    #[error("invalid rounding mode {0}")]
    BadRoundingMode(u8),
}

impl Instruction {
    /// Builds an instruction from its fields, validating ranges and computing
    /// the raw encoding. Fields the format does not use must be zero.
    pub fn new(
        op: Opcode,
        rd: u8,
        rs1: u8,
        rs2: u8,
        rs3: u8,
        rm: u8,
        imm: i64,
    ) -> Result<Self, EncodeError> {
        let mut instr = Instruction { op, rd, rs1, rs2, rs3, rm, imm, raw: 0 };
        instr.raw = encode(&instr)?;
        Ok(instr)
    }

    /// Register-register form (`rd, rs1, rs2`). FP ops with a rounding-mode
    /// field get the dynamic mode.
    pub fn r(op: Opcode, rd: u8, rs1: u8, rs2: u8) -> Result<Self, EncodeError> {
        let rm = if op.has_rm() { RM_DYN } else { 0 };
        Self::new(op, rd, rs1, rs2, 0, rm, 0)
    }

    /// Unary FP form (`rd, rs1`).
    pub fn r1(op: Opcode, rd: u8, rs1: u8) -> Result<Self, EncodeError> {
        let rm = if op.has_rm() { default_rm(op) } else { 0 };
        Self::new(op, rd, rs1, 0, 0, rm, 0)
    }

    pub fn r4(op: Opcode, rd: u8, rs1: u8, rs2: u8, rs3: u8) -> Result<Self, EncodeError> {
        Self::new(op, rd, rs1, rs2, rs3, RM_DYN, 0)
    }

    /// Immediate, load, shift and jalr forms (`rd, rs1, imm`).
    pub fn i(op: Opcode, rd: u8, rs1: u8, imm: i64) -> Result<Self, EncodeError> {
        Self::new(op, rd, rs1, 0, 0, 0, imm)
    }

    /// Store form: `op rs2, imm(rs1)`.
    pub fn s(op: Opcode, rs2: u8, rs1: u8, imm: i64) -> Result<Self, EncodeError> {
        Self::new(op, 0, rs1, rs2, 0, 0, imm)
    }

    /// Conditional branch with a byte offset relative to the branch.
    pub fn b(op: Opcode, rs1: u8, rs2: u8, offset: i64) -> Result<Self, EncodeError> {
        Self::new(op, 0, rs1, rs2, 0, 0, offset)
    }

    /// `lui`/`auipc` with the already-shifted immediate.
    pub fn u(op: Opcode, rd: u8, imm: i64) -> Result<Self, EncodeError> {
        Self::new(op, rd, 0, 0, 0, 0, imm)
    }

    pub fn j(rd: u8, offset: i64) -> Result<Self, EncodeError> {
        Self::new(Opcode::Jal, rd, 0, 0, 0, 0, offset)
    }

    pub fn nop() -> Self {
        Instruction { op: Opcode::Addi, rd: 0, rs1: 0, rs2: 0, rs3: 0, rm: 0, imm: 0, raw: 0x13 }
    }

    pub fn class(&self) -> InstrClass {
        self.op.class()
    }

    pub fn width(&self) -> Width {
        self.op.width()
    }

    /// Unified register ids of source operands: 0..32 integer, 32..64 float.
    /// x0 is never reported.
    pub fn sources(&self) -> impl Iterator<Item = u8> {
        let files = self.op.reg_files();
        let regs = [self.rs1, self.rs2, self.rs3];
        let mut out = [None; 3];
        for (slot, (file, reg)) in out.iter_mut().zip(files[1..].iter().zip(regs)) {
            *slot = unified(*file, reg);
        }
        if self.op == Opcode::Ecall {
            out[0] = Some(17);
            out[1] = Some(10);
        }
        out.into_iter().flatten()
    }

    /// Unified id of the destination register, if any (never x0).
    pub fn dest(&self) -> Option<u8> {
        unified(self.op.reg_files()[0], self.rd)
    }
}

fn unified(file: RegFile, reg: u8) -> Option<u8> {
    match file {
        RegFile::Int if reg != 0 => Some(reg),
        RegFile::Float => Some(reg + 32),
        _ => None,
    }
}

/// Rounding mode the assembler uses when none is written. Widening
/// conversions are exact and conventionally encoded with RNE.
pub fn default_rm(op: Opcode) -> u8 {
    use Opcode::*;
    match op {
        FcvtDS | FcvtDW | FcvtDWu => RM_RNE,
        _ => RM_DYN,
    }
}

fn check_reg(r: u8) -> Result<u32, EncodeError> {
    if r < 32 {
        Ok(r as u32)
    } else {
        Err(EncodeError::BadRegister(r))
    }
}

fn signed_fits(value: i64, bits: u32) -> bool {
    let min = -(1i64 << (bits - 1));
    let max = (1i64 << (bits - 1)) - 1;
    (min..=max).contains(&value)
}

/// Encodes an instruction from its fields using the opcode table.
pub fn encode(instr: &Instruction) -> Result<u32, EncodeError> {
    let op = instr.op;
    let rd = check_reg(instr.rd)?;
    let rs1 = check_reg(instr.rs1)?;
    let rs2 = check_reg(instr.rs2)?;
    let rs3 = check_reg(instr.rs3)?;
    let imm = instr.imm;
    let range = |bits| {
        if signed_fits(imm, bits) {
            Ok(())
        } else {
            Err(EncodeError::ImmediateOutOfRange { op, value: imm })
        }
    };
    let base = op.match_bits();
    let word = match op.format() {
        Format::R => base | rd << 7 | rs1 << 15 | rs2 << 20,
        Format::R4 => {
            let rm = check_rm(instr.rm)?;
            base | rd << 7 | rm << 12 | rs1 << 15 | rs2 << 20 | rs3 << 27
        }
        Format::RRm => {
            let rm = check_rm(instr.rm)?;
            base | rd << 7 | rm << 12 | rs1 << 15 | rs2 << 20
        }
        Format::R1Rm => {
            let rm = check_rm(instr.rm)?;
            base | rd << 7 | rm << 12 | rs1 << 15
        }
        Format::R1 => base | rd << 7 | rs1 << 15,
        Format::I | Format::Load => {
            range(12)?;
            base | rd << 7 | rs1 << 15 | ((imm as u32) & 0xfff) << 20
        }
        Format::Sh6 | Format::Sh5 => {
            let limit = if op.format() == Format::Sh6 { 64 } else { 32 };
            if !(0..limit).contains(&imm) {
                return Err(EncodeError::ImmediateOutOfRange { op, value: imm });
            }
            base | rd << 7 | rs1 << 15 | (imm as u32) << 20
        }
        Format::Store => {
            range(12)?;
            let v = imm as u32;
            base | (v & 0x1f) << 7 | rs1 << 15 | rs2 << 20 | ((v >> 5) & 0x7f) << 25
        }
        Format::B => {
            range(13)?;
            if imm & 1 != 0 {
                return Err(EncodeError::MisalignedOffset(imm));
            }
            let v = imm as u32;
            base | ((v >> 11) & 1) << 7
                | ((v >> 1) & 0xf) << 8
                | rs1 << 15
                | rs2 << 20
                | ((v >> 5) & 0x3f) << 25
                | ((v >> 12) & 1) << 31
        }
        Format::U => {
            if imm & 0xfff != 0 || !signed_fits(imm, 32) {
                return Err(EncodeError::ImmediateOutOfRange { op, value: imm });
            }
            base | rd << 7 | (imm as u32 & 0xffff_f000)
        }
        Format::J => {
            range(21)?;
            if imm & 1 != 0 {
                return Err(EncodeError::MisalignedOffset(imm));
            }
            let v = imm as u32;
            base | rd << 7
                | ((v >> 12) & 0xff) << 12
                | ((v >> 11) & 1) << 20
                | ((v >> 1) & 0x3ff) << 21
                | ((v >> 20) & 1) << 31
        }
        Format::Fence => {
            if !(0..4096).contains(&imm) {
                return Err(EncodeError::ImmediateOutOfRange { op, value: imm });
            }
            base | rd << 7 | rs1 << 15 | (imm as u32) << 20
        }
        Format::Sys => base,
    };
    Ok(word)
}

fn check_rm(rm: u8) -> Result<u32, EncodeError> {
    match rm {
        0..=4 | 7 => Ok(rm as u32),
        _ => Err(EncodeError::BadRoundingMode(rm)),
    }
}

pub fn reg_name(file: RegFile, r: u8) -> String {
    match file {
        RegFile::Float => format!("f{r}"),
        _ => format!("x{r}"),
    }
}

fn rm_suffix(op: Opcode, rm: u8) -> &'static str {
    if rm == default_rm(op) {
        return "";
    }
    match rm {
        RM_RNE => ", rne",
        RM_RTZ => ", rtz",
        RM_RDN => ", rdn",
        RM_RUP => ", rup",
        RM_RMM => ", rmm",
        _ => ", dyn",
    }
}

/// Assembler syntax; the assembler in `loader::asm` accepts exactly this form.
impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let files = self.op.reg_files();
        let rd = reg_name(files[0], self.rd);
        let rs1 = reg_name(files[1], self.rs1);
        let rs2 = reg_name(files[2], self.rs2);
        let rs3 = reg_name(files[3], self.rs3);
        let mn = self.op.mnemonic();
        let rm = rm_suffix(self.op, self.rm);
        match self.op.format() {
            Format::R => write!(f, "{mn} {rd}, {rs1}, {rs2}"),
            Format::R4 => write!(f, "{mn} {rd}, {rs1}, {rs2}, {rs3}{rm}"),
            Format::RRm => write!(f, "{mn} {rd}, {rs1}, {rs2}{rm}"),
            Format::R1Rm => write!(f, "{mn} {rd}, {rs1}{rm}"),
            Format::R1 => write!(f, "{mn} {rd}, {rs1}"),
            Format::I | Format::Sh6 | Format::Sh5 => write!(f, "{mn} {rd}, {rs1}, {}", self.imm),
            Format::Load => write!(f, "{mn} {rd}, {}({rs1})", self.imm),
            Format::Store => write!(f, "{mn} {rs2}, {}({rs1})", self.imm),
            Format::B => write!(f, "{mn} {rs1}, {rs2}, {}", self.imm),
            Format::U => write!(f, "{mn} {rd}, {:#x}", (self.imm >> 12) & 0xfffff),
            Format::J => write!(f, "{mn} {rd}, {}", self.imm),
            Format::Fence => write!(f, "{mn} {:#x}", self.imm),
            Format::Sys => write!(f, "{mn}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encodes_reference_words() {
        // Reference words produced by an external RV64 assembler.
        assert_eq!(Instruction::i(Opcode::Addi, 5, 0, 42).unwrap().raw, 0x02A0_0293);
        assert_eq!(Instruction::r(Opcode::Add, 10, 10, 11).unwrap().raw, 0x00B5_0533);
        assert_eq!(Instruction::r4(Opcode::FmaddD, 10, 11, 12, 14).unwrap().raw, 0x72C5_F543);
        assert_eq!(Instruction::u(Opcode::Lui, 5, 0x12345 << 12).unwrap().raw, 0x1234_52B7);
        assert_eq!(Instruction::s(Opcode::Sd, 6, 5, 8).unwrap().raw, 0x0062_B423);
        assert_eq!(Instruction::nop().raw, 0x13);
    }

    #[test]
    fn rejects_out_of_range_immediates() {
        assert!(matches!(
            Instruction::i(Opcode::Addi, 1, 0, 5000),
            Err(EncodeError::ImmediateOutOfRange { .. })
        ));
        assert!(Instruction::i(Opcode::Addi, 1, 0, -2048).is_ok());
        assert!(Instruction::i(Opcode::Addi, 1, 0, 2047).is_ok());
        assert!(Instruction::i(Opcode::Addi, 1, 0, 2048).is_err());
        assert!(Instruction::b(Opcode::Beq, 1, 2, 3).is_err());
        assert!(Instruction::b(Opcode::Beq, 1, 2, 4096).is_err());
        assert!(Instruction::b(Opcode::Beq, 1, 2, -4096).is_ok());
        assert!(Instruction::i(Opcode::Slliw, 1, 2, 32).is_err());
        assert!(Instruction::i(Opcode::Slli, 1, 2, 63).is_ok());
        assert!(Instruction::r(Opcode::Add, 32, 0, 0).is_err());
    }

    #[test]
    fn sources_skip_x0_and_tag_float_regs() {
        let add = Instruction::r(Opcode::Add, 1, 0, 2).unwrap();
        assert_eq!(add.sources().collect::<Vec<_>>(), vec![2]);
        assert_eq!(add.dest(), Some(1));
        let fma = Instruction::r4(Opcode::FmaddS, 0, 1, 2, 3).unwrap();
        assert_eq!(fma.sources().collect::<Vec<_>>(), vec![33, 34, 35]);
        assert_eq!(fma.dest(), Some(32));
        let sw = Instruction::s(Opcode::Fsw, 4, 5, 0).unwrap();
        assert_eq!(sw.sources().collect::<Vec<_>>(), vec![5, 36]);
        assert_eq!(sw.dest(), None);
    }
}
