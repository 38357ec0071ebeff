//! Opcode table for the RV64IMFD subset.
//!
//! Every opcode carries its assembler mnemonic, its operand format, the fixed
//! bits of its encoding and its instruction class. The encoder is driven by
//! this table; the decoder in [`super::decode`] is written independently so
//! that round-trip tests compare two separate views of the encoding.

use serde::{Deserialize, Serialize};
use std::fmt;

/// gem5-style functional class of an instruction; the unit of the
/// instruction-mix statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InstrClass {
    IntAlu,
    IntMult,
    IntDiv,
    MemRead,
    MemWrite,
    FloatAdd,
    FloatMult,
    FloatMultAcc,
    FloatDiv,
    FloatMisc,
    Branch,
    Jump,
    Other,
}

impl InstrClass {
    pub const COUNT: usize = 13;

    pub const ALL: [InstrClass; Self::COUNT] = [
        InstrClass::IntAlu,
        InstrClass::IntMult,
        InstrClass::IntDiv,
        InstrClass::MemRead,
        InstrClass::MemWrite,
        InstrClass::FloatAdd,
        InstrClass::FloatMult,
        InstrClass::FloatMultAcc,
        InstrClass::FloatDiv,
        InstrClass::FloatMisc,
        InstrClass::Branch,
        InstrClass::Jump,
        InstrClass::Other,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            InstrClass::IntAlu => "IntAlu",
            InstrClass::IntMult => "IntMult",
            InstrClass::IntDiv => "IntDiv",
            InstrClass::MemRead => "MemRead",
            InstrClass::MemWrite => "MemWrite",
            InstrClass::FloatAdd => "FloatAdd",
            InstrClass::FloatMult => "FloatMult",
            InstrClass::FloatMultAcc => "FloatMultAcc",
            InstrClass::FloatDiv => "FloatDiv",
            InstrClass::FloatMisc => "FloatMisc",
            InstrClass::Branch => "Branch",
            InstrClass::Jump => "Jump",
            InstrClass::Other => "Other",
        }
    }

    pub fn is_mem(self) -> bool {
        matches!(self, InstrClass::MemRead | InstrClass::MemWrite)
    }

    pub fn is_control(self) -> bool {
        matches!(self, InstrClass::Branch | InstrClass::Jump)
    }
}

impl fmt::Display for InstrClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Operand layout of an encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    /// rd, rs1, rs2
    R,
    /// rd, rs1, rs2, rs3 with rounding mode
    R4,
    /// rd, rs1, rs2 with rounding mode
    RRm,
    /// rd, rs1 with rounding mode (rs2 field fixed)
    R1Rm,
    /// rd, rs1 (rs2 and funct3 fixed)
    R1,
    /// rd, rs1, 12-bit immediate
    I,
    /// rd, imm(rs1)
    Load,
    /// rd, rs1, 6-bit shift amount
    Sh6,
    /// rd, rs1, 5-bit shift amount
    Sh5,
    /// rs2, imm(rs1)
    Store,
    /// rs1, rs2, 13-bit even offset
    B,
    /// rd, upper 20 bits
    U,
    /// rd, 21-bit even offset
    J,
    /// pred/succ fields carried in imm
    Fence,
    /// no operands
    Sys,
}

/// Register file an operand field refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegFile {
    None,
    Int,
    Float,
}

/// Operand width tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Width {
    /// Full 64-bit integer operation.
    D,
    /// 32-bit integer operation (W suffix) or 32-bit access.
    W,
    /// Single-precision float.
    S,
    /// Double-precision float.
    Fd,
    /// 8- or 16-bit access.
    Narrow,
}

macro_rules! opcodes {
    ($($name:ident => $mn:literal, $fmt:ident, $bits:literal, $class:ident;)*) => {
        /// Every instruction of the supported RV64IMFD subset.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum Opcode { $($name),* }

        impl Opcode {
            pub const ALL: &'static [Opcode] = &[$(Opcode::$name),*];

            pub fn mnemonic(self) -> &'static str {
                match self { $(Opcode::$name => $mn),* }
            }

            pub fn format(self) -> Format {
                match self { $(Opcode::$name => Format::$fmt),* }
            }

            /// Fixed bits of the encoding; operand fields are zero.
            pub fn match_bits(self) -> u32 {
                match self { $(Opcode::$name => $bits),* }
            }

            pub fn class(self) -> InstrClass {
                match self { $(Opcode::$name => InstrClass::$class),* }
            }

            pub fn from_mnemonic(s: &str) -> Option<Opcode> {
                match s { $($mn => Some(Opcode::$name),)* _ => None }
            }
        }
    };
}

// funct7 << 25 | rs2 << 20 | funct3 << 12 | opcode
opcodes! {
    Lui => "lui", U, 0x0000_0037, IntAlu;
    Auipc => "auipc", U, 0x0000_0017, IntAlu;
    Jal => "jal", J, 0x0000_006f, Jump;
    Jalr => "jalr", Load, 0x0000_0067, Jump;
    Beq => "beq", B, 0x0000_0063, Branch;
    Bne => "bne", B, 0x0000_1063, Branch;
    Blt => "blt", B, 0x0000_4063, Branch;
    Bge => "bge", B, 0x0000_5063, Branch;
    Bltu => "bltu", B, 0x0000_6063, Branch;
    Bgeu => "bgeu", B, 0x0000_7063, Branch;
    Lb => "lb", Load, 0x0000_0003, MemRead;
    Lh => "lh", Load, 0x0000_1003, MemRead;
    Lw => "lw", Load, 0x0000_2003, MemRead;
    Ld => "ld", Load, 0x0000_3003, MemRead;
    Lbu => "lbu", Load, 0x0000_4003, MemRead;
    Lhu => "lhu", Load, 0x0000_5003, MemRead;
    Lwu => "lwu", Load, 0x0000_6003, MemRead;
    Sb => "sb", Store, 0x0000_0023, MemWrite;
    Sh => "sh", Store, 0x0000_1023, MemWrite;
    Sw => "sw", Store, 0x0000_2023, MemWrite;
    Sd => "sd", Store, 0x0000_3023, MemWrite;
    Addi => "addi", I, 0x0000_0013, IntAlu;
    Slti => "slti", I, 0x0000_2013, IntAlu;
    Sltiu => "sltiu", I, 0x0000_3013, IntAlu;
    Xori => "xori", I, 0x0000_4013, IntAlu;
    Ori => "ori", I, 0x0000_6013, IntAlu;
    Andi => "andi", I, 0x0000_7013, IntAlu;
    Slli => "slli", Sh6, 0x0000_1013, IntAlu;
    Srli => "srli", Sh6, 0x0000_5013, IntAlu;
    Srai => "srai", Sh6, 0x4000_5013, IntAlu;
    Add => "add", R, 0x0000_0033, IntAlu;
    Sub => "sub", R, 0x4000_0033, IntAlu;
    Sll => "sll", R, 0x0000_1033, IntAlu;
    Slt => "slt", R, 0x0000_2033, IntAlu;
    Sltu => "sltu", R, 0x0000_3033, IntAlu;
    Xor => "xor", R, 0x0000_4033, IntAlu;
    Srl => "srl", R, 0x0000_5033, IntAlu;
    Sra => "sra", R, 0x4000_5033, IntAlu;
    Or => "or", R, 0x0000_6033, IntAlu;
    And => "and", R, 0x0000_7033, IntAlu;
    Addiw => "addiw", I, 0x0000_001b, IntAlu;
    Slliw => "slliw", Sh5, 0x0000_101b, IntAlu;
    Srliw => "srliw", Sh5, 0x0000_501b, IntAlu;
    Sraiw => "sraiw", Sh5, 0x4000_501b, IntAlu;
    Addw => "addw", R, 0x0000_003b, IntAlu;
    Subw => "subw", R, 0x4000_003b, IntAlu;
    Sllw => "sllw", R, 0x0000_103b, IntAlu;
    Srlw => "srlw", R, 0x0000_503b, IntAlu;
    Sraw => "sraw", R, 0x4000_503b, IntAlu;
    Fence => "fence", Fence, 0x0000_000f, Other;
    Ecall => "ecall", Sys, 0x0000_0073, Other;
    Ebreak => "ebreak", Sys, 0x0010_0073, Other;

    Mul => "mul", R, 0x0200_0033, IntMult;
    Mulh => "mulh", R, 0x0200_1033, IntMult;
    Mulhsu => "mulhsu", R, 0x0200_2033, IntMult;
    Mulhu => "mulhu", R, 0x0200_3033, IntMult;
    Div => "div", R, 0x0200_4033, IntDiv;
    Divu => "divu", R, 0x0200_5033, IntDiv;
    Rem => "rem", R, 0x0200_6033, IntDiv;
    Remu => "remu", R, 0x0200_7033, IntDiv;
    Mulw => "mulw", R, 0x0200_003b, IntMult;
    Divw => "divw", R, 0x0200_403b, IntDiv;
    Divuw => "divuw", R, 0x0200_503b, IntDiv;
    Remw => "remw", R, 0x0200_603b, IntDiv;
    Remuw => "remuw", R, 0x0200_703b, IntDiv;

    Flw => "flw", Load, 0x0000_2007, MemRead;
    Fsw => "fsw", Store, 0x0000_2027, MemWrite;
    FmaddS => "fmadd.s", R4, 0x0000_0043, FloatMultAcc;
    FmsubS => "fmsub.s", R4, 0x0000_0047, FloatMultAcc;
    FnmsubS => "fnmsub.s", R4, 0x0000_004b, FloatMultAcc;
    FnmaddS => "fnmadd.s", R4, 0x0000_004f, FloatMultAcc;
    FaddS => "fadd.s", RRm, 0x0000_0053, FloatAdd;
    FsubS => "fsub.s", RRm, 0x0800_0053, FloatAdd;
    FmulS => "fmul.s", RRm, 0x1000_0053, FloatMult;
    FdivS => "fdiv.s", RRm, 0x1800_0053, FloatDiv;
    FsqrtS => "fsqrt.s", R1Rm, 0x5800_0053, FloatDiv;
    FsgnjS => "fsgnj.s", R, 0x2000_0053, FloatMisc;
    FsgnjnS => "fsgnjn.s", R, 0x2000_1053, FloatMisc;
    FsgnjxS => "fsgnjx.s", R, 0x2000_2053, FloatMisc;
    FminS => "fmin.s", R, 0x2800_0053, FloatMisc;
    FmaxS => "fmax.s", R, 0x2800_1053, FloatMisc;
    FcvtWS => "fcvt.w.s", R1Rm, 0xc000_0053, FloatMisc;
    FcvtWuS => "fcvt.wu.s", R1Rm, 0xc010_0053, FloatMisc;
    FcvtLS => "fcvt.l.s", R1Rm, 0xc020_0053, FloatMisc;
    FcvtLuS => "fcvt.lu.s", R1Rm, 0xc030_0053, FloatMisc;
    FmvXW => "fmv.x.w", R1, 0xe000_0053, FloatMisc;
    FclassS => "fclass.s", R1, 0xe000_1053, FloatMisc;
    FeqS => "feq.s", R, 0xa000_2053, FloatMisc;
    FltS => "flt.s", R, 0xa000_1053, FloatMisc;
    FleS => "fle.s", R, 0xa000_0053, FloatMisc;
    FcvtSW => "fcvt.s.w", R1Rm, 0xd000_0053, FloatMisc;
    FcvtSWu => "fcvt.s.wu", R1Rm, 0xd010_0053, FloatMisc;
    FcvtSL => "fcvt.s.l", R1Rm, 0xd020_0053, FloatMisc;
    FcvtSLu => "fcvt.s.lu", R1Rm, 0xd030_0053, FloatMisc;
    FmvWX => "fmv.w.x", R1, 0xf000_0053, FloatMisc;

    Fld => "fld", Load, 0x0000_3007, MemRead;
    Fsd => "fsd", Store, 0x0000_3027, MemWrite;
    FmaddD => "fmadd.d", R4, 0x0200_0043, FloatMultAcc;
    FmsubD => "fmsub.d", R4, 0x0200_0047, FloatMultAcc;
    FnmsubD => "fnmsub.d", R4, 0x0200_004b, FloatMultAcc;
    FnmaddD => "fnmadd.d", R4, 0x0200_004f, FloatMultAcc;
    FaddD => "fadd.d", RRm, 0x0200_0053, FloatAdd;
    FsubD => "fsub.d", RRm, 0x0a00_0053, FloatAdd;
    FmulD => "fmul.d", RRm, 0x1200_0053, FloatMult;
    FdivD => "fdiv.d", RRm, 0x1a00_0053, FloatDiv;
    FsqrtD => "fsqrt.d", R1Rm, 0x5a00_0053, FloatDiv;
    FsgnjD => "fsgnj.d", R, 0x2200_0053, FloatMisc;
    FsgnjnD => "fsgnjn.d", R, 0x2200_1053, FloatMisc;
    FsgnjxD => "fsgnjx.d", R, 0x2200_2053, FloatMisc;
    FminD => "fmin.d", R, 0x2a00_0053, FloatMisc;
    FmaxD => "fmax.d", R, 0x2a00_1053, FloatMisc;
    FcvtSD => "fcvt.s.d", R1Rm, 0x4010_0053, FloatMisc;
    FcvtDS => "fcvt.d.s", R1Rm, 0x4200_0053, FloatMisc;
    FeqD => "feq.d", R, 0xa200_2053, FloatMisc;
    FltD => "flt.d", R, 0xa200_1053, FloatMisc;
    FleD => "fle.d", R, 0xa200_0053, FloatMisc;
    FclassD => "fclass.d", R1, 0xe200_1053, FloatMisc;
    FcvtWD => "fcvt.w.d", R1Rm, 0xc200_0053, FloatMisc;
    FcvtWuD => "fcvt.wu.d", R1Rm, 0xc210_0053, FloatMisc;
    FcvtLD => "fcvt.l.d", R1Rm, 0xc220_0053, FloatMisc;
    FcvtLuD => "fcvt.lu.d", R1Rm, 0xc230_0053, FloatMisc;
    FmvXD => "fmv.x.d", R1, 0xe200_0053, FloatMisc;
    FcvtDW => "fcvt.d.w", R1Rm, 0xd200_0053, FloatMisc;
    FcvtDWu => "fcvt.d.wu", R1Rm, 0xd210_0053, FloatMisc;
    FcvtDL => "fcvt.d.l", R1Rm, 0xd220_0053, FloatMisc;
    FcvtDLu => "fcvt.d.lu", R1Rm, 0xd230_0053, FloatMisc;
    FmvDX => "fmv.d.x", R1, 0xf200_0053, FloatMisc;
}

impl Opcode {
    /// Register files of the (rd, rs1, rs2, rs3) operand fields.
    pub fn reg_files(self) -> [RegFile; 4] {
        use Opcode::*;
        use RegFile::{Float as F, Int as X, None as N};
        match self {
            Lui | Auipc | Jal => [X, N, N, N],
            Jalr => [X, X, N, N],
            Beq | Bne | Blt | Bge | Bltu | Bgeu => [N, X, X, N],
            Lb | Lh | Lw | Ld | Lbu | Lhu | Lwu => [X, X, N, N],
            Sb | Sh | Sw | Sd => [N, X, X, N],
            Addi | Slti | Sltiu | Xori | Ori | Andi | Slli | Srli | Srai | Addiw | Slliw
            | Srliw | Sraiw => [X, X, N, N],
            Fence | Ecall | Ebreak => [N, N, N, N],
            Flw | Fld => [F, X, N, N],
            Fsw | Fsd => [N, X, F, N],
            FmaddS | FmsubS | FnmsubS | FnmaddS | FmaddD | FmsubD | FnmsubD | FnmaddD => {
                [F, F, F, F]
            }
            FaddS | FsubS | FmulS | FdivS | FsgnjS | FsgnjnS | FsgnjxS | FminS | FmaxS
            | FaddD | FsubD | FmulD | FdivD | FsgnjD | FsgnjnD | FsgnjxD | FminD | FmaxD => {
                [F, F, F, N]
            }
            FsqrtS | FsqrtD | FcvtSD | FcvtDS => [F, F, N, N],
            FcvtWS | FcvtWuS | FcvtLS | FcvtLuS | FmvXW | FclassS | FcvtWD | FcvtWuD
            | FcvtLD | FcvtLuD | FmvXD | FclassD => [X, F, N, N],
            FeqS | FltS | FleS | FeqD | FltD | FleD => [X, F, F, N],
            FcvtSW | FcvtSWu | FcvtSL | FcvtSLu | FmvWX | FcvtDW | FcvtDWu | FcvtDL
            | FcvtDLu | FmvDX => [F, X, N, N],
            // remaining register-register integer ops
            _ => [X, X, X, N],
        }
    }

    /// Whether the encoding has a rounding-mode field.
    pub fn has_rm(self) -> bool {
        matches!(self.format(), Format::R4 | Format::RRm | Format::R1Rm)
    }

    pub fn width(self) -> Width {
        use Opcode::*;
        match self {
            Lb | Lbu | Lh | Lhu | Sb | Sh => Width::Narrow,
            Lw | Lwu | Sw | Addiw | Slliw | Srliw | Sraiw | Addw | Subw | Sllw | Srlw | Sraw
            | Mulw | Divw | Divuw | Remw | Remuw => Width::W,
            _ => {
                let mn = self.mnemonic();
                if mn.starts_with('f') && mn != "fence" {
                    if mn.contains(".d") || matches!(self, Fld | Fsd) {
                        Width::Fd
                    } else {
                        Width::S
                    }
                } else {
                    Width::D
                }
            }
        }
    }

    /// Access size in bytes for loads and stores.
    pub fn access_size(self) -> Option<u8> {
        use Opcode::*;
        match self {
            Lb | Lbu | Sb => Some(1),
            Lh | Lhu | Sh => Some(2),
            Lw | Lwu | Sw | Flw | Fsw => Some(4),
            Ld | Sd | Fld | Fsd => Some(8),
            _ => None,
        }
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mnemonics_are_unique() {
        let mut seen = std::collections::HashSet::new();
        for op in Opcode::ALL {
            assert!(seen.insert(op.mnemonic()), "duplicate {}", op);
            assert_eq!(Opcode::from_mnemonic(op.mnemonic()), Some(*op));
        }
    }

    #[test]
    fn match_bits_are_unique() {
        let mut seen = std::collections::HashMap::new();
        for op in Opcode::ALL {
            if let Some(prev) = seen.insert(op.match_bits(), *op) {
                panic!("{} and {} share fixed bits", prev, op);
            }
        }
    }

    #[test]
    fn widths() {
        assert_eq!(Opcode::Addw.width(), Width::W);
        assert_eq!(Opcode::FmaddS.width(), Width::S);
        assert_eq!(Opcode::FmaddD.width(), Width::Fd);
        assert_eq!(Opcode::Fld.width(), Width::Fd);
        assert_eq!(Opcode::Fence.width(), Width::D);
        assert_eq!(Opcode::Add.width(), Width::D);
    }
}
