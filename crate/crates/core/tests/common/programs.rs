//! Random straight-line (optionally looped) RV64IMFD programs.

use proptest::prelude::*;
use rvmb_core::isa::{default_rm, Format, Instruction, InstrClass, Opcode};
use rvmb_core::loader::{MemoryImage, TOHOST};

pub const CODE: u64 = 0x1_0000;
pub const DATA: u64 = 0x2_0000;
pub const DATA_LEN: u64 = 4096;
pub const HTIF: u64 = 0x8000;
/// Holds `DATA` throughout; never a destination.
pub const BASE: u8 = 3;
/// Loop counter; never a destination.
pub const COUNTER: u8 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ending {
    Htif,
    Ecall,
}

fn reserved(i: &Instruction) -> bool {
    matches!(i.dest(), Some(BASE) | Some(COUNTER))
}

fn computational() -> Vec<Opcode> {
    Opcode::ALL
        .iter()
        .copied()
        .filter(|op| {
            matches!(op.format(), Format::R | Format::R4 | Format::RRm | Format::R1Rm | Format::R1 | Format::I | Format::Sh6 | Format::Sh5)
                && !matches!(op.class(), InstrClass::Branch | InstrClass::Jump | InstrClass::Other)
                && !op.class().is_mem()
        })
        .collect()
}

fn memory() -> Vec<Opcode> {
    Opcode::ALL.iter().copied().filter(|op| op.access_size().is_some()).collect()
}

fn build(op: Opcode, rd: u8, rs1: u8, rs2: u8, rs3: u8, imm: i64) -> Instruction {
    let rm = if op.has_rm() { default_rm(op) } else { 0 };
    let (rs2, rs3) = match op.format() {
        Format::R4 => (rs2, rs3),
        Format::R | Format::RRm => (rs2, 0),
        _ => (0, 0),
    };
    let imm = match op.format() {
        Format::I => imm.clamp(-2048, 2047),
        Format::Sh6 => imm.rem_euclid(64),
        Format::Sh5 => imm.rem_euclid(32),
        _ => 0,
    };
    Instruction::new(op, rd, rs1, rs2, rs3, rm, imm).expect("valid fields")
}

/// One non-control instruction; memory accesses stay inside the scratch area.
pub fn arb_instr() -> impl Strategy<Value = Instruction> {
    let comp = computational();
    let mem = memory();
    let c = (0..comp.len(), 0u8..32, 0u8..32, 0u8..32, 0u8..32, -2048i64..2048)
        .prop_map(move |(k, rd, a, b, d, imm)| build(comp[k], rd, a, b, d, imm));
    let m = (0..mem.len(), 0u8..32, 0i64..256).prop_map(move |(k, r, slot)| {
        let op = mem[k];
        let off = slot * 8;
        if op.format() == Format::Load {
            Instruction::i(op, r, BASE, off).unwrap()
        } else {
            Instruction::s(op, r, BASE, off).unwrap()
        }
    });
    prop_oneof![3 => c, 1 => m].prop_filter("reserved destination", |i| !reserved(i))
}

pub fn li(rd: u8, v: i64) -> Vec<Instruction> {
    assert!((i32::MIN as i64..i32::MAX as i64 - 0x800).contains(&v));
    if (-2048..2048).contains(&v) {
        return vec![Instruction::i(Opcode::Addi, rd, 0, v).unwrap()];
    }
    let hi = (v + 0x800) >> 12;
    let lo = v - (hi << 12);
    vec![
        Instruction::u(Opcode::Lui, rd, ((hi << 12) as i32) as i64).unwrap(),
        Instruction::i(Opcode::Addiw, rd, rd, lo).unwrap(),
    ]
}

/// Loads every register from `data`, runs `body` `trips` times, then exits.
pub fn program(body: &[Instruction], trips: u32, data: &[u8], ending: Ending) -> MemoryImage {
    assert!(trips >= 1);
    let mut code = li(BASE, DATA as i64);
    for r in 1..32u8 {
        if r != BASE && r != COUNTER {
            code.push(Instruction::i(Opcode::Ld, r, BASE, 8 * r as i64).unwrap());
        }
        code.push(Instruction::i(Opcode::Fld, r, BASE, 256 + 8 * r as i64).unwrap());
    }
    code.extend(li(COUNTER, trips as i64));
    let top = code.len();
    code.extend_from_slice(body);
    code.push(Instruction::i(Opcode::Addi, COUNTER, COUNTER, -1).unwrap());
    let back = (top as i64 - code.len() as i64) * 4;
    code.push(Instruction::b(Opcode::Bne, COUNTER, 0, back).unwrap());
    // Identical register effects for both endings.
    code.extend(li(17, 93));
    code.extend(li(10, 0));
    code.extend(li(5, 1));
    code.extend(li(6, HTIF as i64));
    code.push(match ending {
        Ending::Htif => Instruction::s(Opcode::Sd, 5, 6, 0).unwrap(),
        Ending::Ecall => Instruction::new(Opcode::Ecall, 0, 0, 0, 0, 0, 0).unwrap(),
    });
    code.push(Instruction::j(0, 0).unwrap());

    let bytes: Vec<u8> = code.iter().flat_map(|i| i.raw.to_le_bytes()).collect();
    let mut img = MemoryImage::new(CODE);
    img.add_code(CODE, bytes).unwrap();
    img.add_data(DATA, data.to_vec(), DATA_LEN).unwrap();
    img.add_data(HTIF, vec![], 64).unwrap();
    img.symbols.insert(TOHOST.into(), HTIF);
    img.output = Some(rvmb_core::loader::Region { addr: DATA, len: DATA_LEN });
    img
}

/// Body, trip count and initial scratch contents.
pub fn arb_program(max_len: usize) -> impl Strategy<Value = (Vec<Instruction>, u32, Vec<u8>)> {
    (
        proptest::collection::vec(arb_instr(), 1..max_len),
        1u32..4,
        proptest::collection::vec(any::<u8>(), DATA_LEN as usize),
    )
}
