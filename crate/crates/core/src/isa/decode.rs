use super::instr::Instruction;
use super::opcode::Opcode;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("illegal instruction {0:#010x}")]
pub struct IllegalInstruction(pub u32);

#[inline]
fn bits(word: u32, hi: u32, lo: u32) -> u32 {
    (word >> lo) & ((1 << (hi - lo + 1)) - 1)
}

/// Decodes one 32-bit word. Compressed (C), atomic (A) and vector (V)
/// encodings, CSR accesses and the all-zero word are illegal.
pub fn decode(word: u32) -> Result<Instruction, IllegalInstruction> {
    use Opcode::*;
    let illegal = Err(IllegalInstruction(word));
    if word & 0b11 != 0b11 {
        return illegal;
    }
    let rd = bits(word, 11, 7) as u8;
    let f3 = bits(word, 14, 12);
    let rs1 = bits(word, 19, 15) as u8;
    let rs2 = bits(word, 24, 20) as u8;
    let f7 = bits(word, 31, 25);
    let imm_i = ((word as i32) >> 20) as i64;
    let imm_s = ((((word as i32) >> 25) << 5) | bits(word, 11, 7) as i32) as i64;
    let imm_b = {
        let v = (bits(word, 31, 31) << 12)
            | (bits(word, 7, 7) << 11)
            | (bits(word, 30, 25) << 5)
            | (bits(word, 11, 8) << 1);
        ((v << 19) as i32 >> 19) as i64
    };
    let imm_u = (word & 0xffff_f000) as i32 as i64;
    let imm_j = {
        let v = (bits(word, 31, 31) << 20)
            | (bits(word, 19, 12) << 12)
            | (bits(word, 20, 20) << 11)
            | (bits(word, 30, 21) << 1);
        ((v << 11) as i32 >> 11) as i64
    };

    let mk = |op, rd, rs1, rs2, rs3, rm, imm| {
        Ok(Instruction { op, rd, rs1, rs2, rs3, rm, imm, raw: word })
    };
    let r = |op| mk(op, rd, rs1, rs2, 0, 0, 0);
    let i = |op| mk(op, rd, rs1, 0, 0, 0, imm_i);
    let valid_rm = matches!(f3, 0..=4 | 7);

    match word & 0x7f {
        0x37 => mk(Lui, rd, 0, 0, 0, 0, imm_u),
        0x17 => mk(Auipc, rd, 0, 0, 0, 0, imm_u),
        0x6f => mk(Jal, rd, 0, 0, 0, 0, imm_j),
        0x67 if f3 == 0 => i(Jalr),
        0x63 => {
            let op = match f3 {
                0 => Beq,
                1 => Bne,
                4 => Blt,
                5 => Bge,
                6 => Bltu,
                7 => Bgeu,
                _ => return illegal,
            };
            mk(op, 0, rs1, rs2, 0, 0, imm_b)
        }
        0x03 => {
            let op = match f3 {
                0 => Lb,
                1 => Lh,
                2 => Lw,
                3 => Ld,
                4 => Lbu,
                5 => Lhu,
                6 => Lwu,
                _ => return illegal,
            };
            i(op)
        }
        0x23 => {
            let op = match f3 {
                0 => Sb,
                1 => Sh,
                2 => Sw,
                3 => Sd,
                _ => return illegal,
            };
            mk(op, 0, rs1, rs2, 0, 0, imm_s)
        }
        0x13 => {
            let shamt = bits(word, 25, 20) as i64;
            let f6 = bits(word, 31, 26);
            match f3 {
                0 => i(Addi),
                2 => i(Slti),
                3 => i(Sltiu),
                4 => i(Xori),
                6 => i(Ori),
                7 => i(Andi),
                1 if f6 == 0 => mk(Slli, rd, rs1, 0, 0, 0, shamt),
                5 if f6 == 0 => mk(Srli, rd, rs1, 0, 0, 0, shamt),
                5 if f6 == 0x10 => mk(Srai, rd, rs1, 0, 0, 0, shamt),
                _ => illegal,
            }
        }
        0x1b => {
            let shamt = rs2 as i64;
            match (f3, f7) {
                (0, _) => i(Addiw),
                (1, 0) => mk(Slliw, rd, rs1, 0, 0, 0, shamt),
                (5, 0) => mk(Srliw, rd, rs1, 0, 0, 0, shamt),
                (5, 0x20) => mk(Sraiw, rd, rs1, 0, 0, 0, shamt),
                _ => illegal,
            }
        }
        0x33 => {
            let op = match (f7, f3) {
                (0, 0) => Add,
                (0x20, 0) => Sub,
                (0, 1) => Sll,
                (0, 2) => Slt,
                (0, 3) => Sltu,
                (0, 4) => Xor,
                (0, 5) => Srl,
                (0x20, 5) => Sra,
                (0, 6) => Or,
                (0, 7) => And,
                (1, 0) => Mul,
                (1, 1) => Mulh,
                (1, 2) => Mulhsu,
                (1, 3) => Mulhu,
                (1, 4) => Div,
                (1, 5) => Divu,
                (1, 6) => Rem,
                (1, 7) => Remu,
                _ => return illegal,
            };
            r(op)
        }
        0x3b => {
            let op = match (f7, f3) {
                (0, 0) => Addw,
                (0x20, 0) => Subw,
                (0, 1) => Sllw,
                (0, 5) => Srlw,
                (0x20, 5) => Sraw,
                (1, 0) => Mulw,
                (1, 4) => Divw,
                (1, 5) => Divuw,
                (1, 6) => Remw,
                (1, 7) => Remuw,
                _ => return illegal,
            };
            r(op)
        }
        0x0f if f3 == 0 => mk(Fence, rd, rs1, 0, 0, 0, bits(word, 31, 20) as i64),
        0x73 => match word {
            0x0000_0073 => mk(Ecall, 0, 0, 0, 0, 0, 0),
            0x0010_0073 => mk(Ebreak, 0, 0, 0, 0, 0, 0),
            _ => illegal,
        },
        0x07 => match f3 {
            2 => i(Flw),
            3 => i(Fld),
            _ => illegal,
        },
        0x27 => match f3 {
            2 => mk(Fsw, 0, rs1, rs2, 0, 0, imm_s),
            3 => mk(Fsd, 0, rs1, rs2, 0, 0, imm_s),
            _ => illegal,
        },
        opc @ (0x43 | 0x47 | 0x4b | 0x4f) => {
            let double = match bits(word, 26, 25) {
                0 => false,
                1 => true,
                _ => return illegal,
            };
            if !valid_rm {
                return illegal;
            }
            let op = match (opc, double) {
                (0x43, false) => FmaddS,
                (0x47, false) => FmsubS,
                (0x4b, false) => FnmsubS,
                (0x4f, false) => FnmaddS,
                (0x43, true) => FmaddD,
                (0x47, true) => FmsubD,
                (0x4b, true) => FnmsubD,
                _ => FnmaddD,
            };
            mk(op, rd, rs1, rs2, bits(word, 31, 27) as u8, f3 as u8, 0)
        }
        0x53 => decode_op_fp(word, rd, rs1, rs2, f3, f7, valid_rm),
        _ => illegal,
    }
}

fn decode_op_fp(
    word: u32,
    rd: u8,
    rs1: u8,
    rs2: u8,
    f3: u32,
    f7: u32,
    valid_rm: bool,
) -> Result<Instruction, IllegalInstruction> {
    use Opcode::*;
    let illegal = Err(IllegalInstruction(word));
    let mk = |op, rs2, rm| Ok(Instruction { op, rd, rs1, rs2, rs3: 0, rm, imm: 0, raw: word });
    // rounding-mode forms
    let with_rm = |op, rs2: u8| {
        if valid_rm {
            mk(op, rs2, f3 as u8)
        } else {
            Err(IllegalInstruction(word))
        }
    };
    match f7 {
        0x00 => with_rm(FaddS, rs2),
        0x04 => with_rm(FsubS, rs2),
        0x08 => with_rm(FmulS, rs2),
        0x0c => with_rm(FdivS, rs2),
        0x01 => with_rm(FaddD, rs2),
        0x05 => with_rm(FsubD, rs2),
        0x09 => with_rm(FmulD, rs2),
        0x0d => with_rm(FdivD, rs2),
        0x2c if rs2 == 0 => with_rm(FsqrtS, 0),
        0x2d if rs2 == 0 => with_rm(FsqrtD, 0),
        0x20 if rs2 == 1 => with_rm(FcvtSD, 0),
        0x21 if rs2 == 0 => with_rm(FcvtDS, 0),
        0x60 | 0x61 | 0x68 | 0x69 => {
            let op = match (f7, rs2) {
                (0x60, 0) => FcvtWS,
                (0x60, 1) => FcvtWuS,
                (0x60, 2) => FcvtLS,
                (0x60, 3) => FcvtLuS,
                (0x61, 0) => FcvtWD,
                (0x61, 1) => FcvtWuD,
                (0x61, 2) => FcvtLD,
                (0x61, 3) => FcvtLuD,
                (0x68, 0) => FcvtSW,
                (0x68, 1) => FcvtSWu,
                (0x68, 2) => FcvtSL,
                (0x68, 3) => FcvtSLu,
                (0x69, 0) => FcvtDW,
                (0x69, 1) => FcvtDWu,
                (0x69, 2) => FcvtDL,
                (0x69, 3) => FcvtDLu,
                _ => return illegal,
            };
            with_rm(op, 0)
        }
        0x10 | 0x11 | 0x14 | 0x15 | 0x50 | 0x51 => {
            let op = match (f7, f3) {
                (0x10, 0) => FsgnjS,
                (0x10, 1) => FsgnjnS,
                (0x10, 2) => FsgnjxS,
                (0x11, 0) => FsgnjD,
                (0x11, 1) => FsgnjnD,
                (0x11, 2) => FsgnjxD,
                (0x14, 0) => FminS,
                (0x14, 1) => FmaxS,
                (0x15, 0) => FminD,
                (0x15, 1) => FmaxD,
                (0x50, 0) => FleS,
                (0x50, 1) => FltS,
                (0x50, 2) => FeqS,
                (0x51, 0) => FleD,
                (0x51, 1) => FltD,
                (0x51, 2) => FeqD,
                _ => return illegal,
            };
            mk(op, rs2, 0)
        }
        0x70 | 0x71 | 0x78 | 0x79 if rs2 == 0 => {
            let op = match (f7, f3) {
                (0x70, 0) => FmvXW,
                (0x70, 1) => FclassS,
                (0x71, 0) => FmvXD,
                (0x71, 1) => FclassD,
                (0x78, 0) => FmvWX,
                (0x79, 0) => FmvDX,
                _ => return illegal,
            };
            mk(op, 0, 0)
        }
        _ => illegal,
    }
}
