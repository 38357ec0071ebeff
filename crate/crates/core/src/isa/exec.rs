use super::fp::{self, box_s, canon_d, canon_s, unbox_s};
use super::instr::{Instruction, RM_DYN, RM_RNE};
use super::opcode::{InstrClass, Opcode};
use super::state::{ArchState, MemError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One data-memory access made by an instruction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MemAccess {
    pub addr: u64,
    pub size: u8,
    pub is_write: bool,
}

/// Committed-instruction record: the unit of trace and mix statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub pc: u64,
    pub class: InstrClass,
    pub mem: Option<MemAccess>,
}

/// Architectural effects of one executed instruction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Effects {
    pub next_pc: u64,
    pub mem: Option<MemAccess>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error(transparent)]
    Mem(#[from] MemError),
    #[error("static rounding mode {rm} is not supported by {op}")]
    UnsupportedRoundingMode { op: Opcode, rm: u8 },
    #[error("unsupported environment call {0}")]
    UnsupportedSyscall(u64),
    #[error("breakpoint")]
    Breakpoint,
}

#[inline]
fn sext32(v: u64) -> u64 {
    v as i32 as i64 as u64
}

/// Applies `instr` (fetched at `state.pc`) to the state and advances pc.
///
/// ECALL with a7 = 93 only reports the exit; the exit itself is detected by
/// the caller.
pub fn step(state: &mut ArchState, instr: &Instruction) -> Result<Effects, ExecError> {
    use Opcode::*;
    let pc = state.pc;
    let mut next_pc = pc.wrapping_add(4);
    let mut mem = None;
    let rs1 = state.x(instr.rs1);
    let rs2 = state.x(instr.rs2);
    let imm = instr.imm as u64;
    let rd = instr.rd;

    macro_rules! set {
        ($v:expr) => {
            state.set_x(rd, $v)
        };
    }
    macro_rules! load {
        ($size:expr) => {{
            let addr = rs1.wrapping_add(imm);
            mem = Some(MemAccess { addr, size: $size, is_write: false });
            state.mem.load(addr, $size)?
        }};
    }
    macro_rules! store {
        ($size:expr, $v:expr) => {{
            let addr = rs1.wrapping_add(imm);
            mem = Some(MemAccess { addr, size: $size, is_write: true });
            state.mem.store(addr, $size, $v)?;
        }};
    }
    macro_rules! branch {
        ($cond:expr) => {
            if $cond {
                next_pc = pc.wrapping_add(imm);
            }
        };
    }

    match instr.op {
        Lui => set!(imm),
        Auipc => set!(pc.wrapping_add(imm)),
        Jal => {
            set!(next_pc);
            next_pc = pc.wrapping_add(imm);
        }
        Jalr => {
            let target = rs1.wrapping_add(imm) & !1;
            set!(next_pc);
            next_pc = target;
        }
        Beq => branch!(rs1 == rs2),
        Bne => branch!(rs1 != rs2),
        Blt => branch!((rs1 as i64) < (rs2 as i64)),
        Bge => branch!((rs1 as i64) >= (rs2 as i64)),
        Bltu => branch!(rs1 < rs2),
        Bgeu => branch!(rs1 >= rs2),
        Lb => set!(load!(1) as i8 as i64 as u64),
        Lh => set!(load!(2) as i16 as i64 as u64),
        Lw => set!(sext32(load!(4))),
        Ld => set!(load!(8)),
        Lbu => set!(load!(1)),
        Lhu => set!(load!(2)),
        Lwu => set!(load!(4)),
        Sb => store!(1, rs2),
        Sh => store!(2, rs2),
        Sw => store!(4, rs2),
        Sd => store!(8, rs2),
        Addi => set!(rs1.wrapping_add(imm)),
        Slti => set!(((rs1 as i64) < instr.imm) as u64),
        Sltiu => set!((rs1 < imm) as u64),
        Xori => set!(rs1 ^ imm),
        Ori => set!(rs1 | imm),
        Andi => set!(rs1 & imm),
        Slli => set!(rs1 << (imm & 63)),
        Srli => set!(rs1 >> (imm & 63)),
        Srai => set!(((rs1 as i64) >> (imm & 63)) as u64),
        Add => set!(rs1.wrapping_add(rs2)),
        Sub => set!(rs1.wrapping_sub(rs2)),
        Sll => set!(rs1 << (rs2 & 63)),
        Slt => set!(((rs1 as i64) < (rs2 as i64)) as u64),
        Sltu => set!((rs1 < rs2) as u64),
        Xor => set!(rs1 ^ rs2),
        Srl => set!(rs1 >> (rs2 & 63)),
        Sra => set!(((rs1 as i64) >> (rs2 & 63)) as u64),
        Or => set!(rs1 | rs2),
        And => set!(rs1 & rs2),
        Addiw => set!(sext32(rs1.wrapping_add(imm))),
        Slliw => set!(sext32(((rs1 as u32) << (imm & 31)) as u64)),
        Srliw => set!(sext32(((rs1 as u32) >> (imm & 31)) as u64)),
        Sraiw => set!(((rs1 as i32) >> (imm & 31)) as i64 as u64),
        Addw => set!(sext32(rs1.wrapping_add(rs2))),
        Subw => set!(sext32(rs1.wrapping_sub(rs2))),
        Sllw => set!(sext32(((rs1 as u32) << (rs2 & 31)) as u64)),
        Srlw => set!(sext32(((rs1 as u32) >> (rs2 & 31)) as u64)),
        Sraw => set!(((rs1 as i32) >> (rs2 & 31)) as i64 as u64),
        Fence => {}
        Ecall => {
            let code = state.x(17);
            if code != 93 {
                return Err(ExecError::UnsupportedSyscall(code));
            }
        }
        Ebreak => return Err(ExecError::Breakpoint),

        Mul => set!(rs1.wrapping_mul(rs2)),
        Mulh => set!(((rs1 as i64 as i128 * rs2 as i64 as i128) >> 64) as u64),
        Mulhsu => set!(((rs1 as i64 as i128).wrapping_mul(rs2 as i128) >> 64) as u64),
        Mulhu => set!(((rs1 as u128 * rs2 as u128) >> 64) as u64),
        Div => set!(div_s(rs1 as i64, rs2 as i64) as u64),
        Divu => set!(rs1.checked_div(rs2).unwrap_or(u64::MAX)),
        Rem => set!(rem_s(rs1 as i64, rs2 as i64) as u64),
        Remu => set!(if rs2 == 0 { rs1 } else { rs1 % rs2 }),
        Mulw => set!(sext32(rs1.wrapping_mul(rs2))),
        Divw => set!(div_s(rs1 as i32 as i64, rs2 as i32 as i64) as i32 as i64 as u64),
        Divuw => {
            let (a, b) = (rs1 as u32, rs2 as u32);
            set!(sext32(a.checked_div(b).unwrap_or(u32::MAX) as u64))
        }
        Remw => set!(rem_s(rs1 as i32 as i64, rs2 as i32 as i64) as i32 as i64 as u64),
        Remuw => {
            let (a, b) = (rs1 as u32, rs2 as u32);
            set!(sext32(if b == 0 { a } else { a % b } as u64))
        }

        Flw => {
            let v = load!(4);
            state.f[rd as usize] = box_s(v as u32);
        }
        Fld => {
            let v = load!(8);
            state.f[rd as usize] = v;
        }
        Fsw => {
            let v = state.f[instr.rs2 as usize] & 0xffff_ffff;
            store!(4, v)
        }
        Fsd => {
            let v = state.f[instr.rs2 as usize];
            store!(8, v)
        }
        _ => exec_fp(state, instr)?,
    }
    state.pc = next_pc;
    Ok(Effects { next_pc, mem })
}

fn div_s(a: i64, b: i64) -> i64 {
    if b == 0 {
        -1
    } else {
        a.wrapping_div(b)
    }
}

fn rem_s(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        a.wrapping_rem(b)
    }
}

/// Only float-to-integer conversions honor a static rounding mode; every
/// other rounding-sensitive operation runs at round-to-nearest-even.
fn check_rm(instr: &Instruction) -> Result<(), ExecError> {
    use Opcode::*;
    let exact = matches!(
        instr.op,
        FcvtDS
            | FcvtDW
            | FcvtDWu
            | FcvtWS
            | FcvtWuS
            | FcvtLS
            | FcvtLuS
            | FcvtWD
            | FcvtWuD
            | FcvtLD
            | FcvtLuD
    );
    if exact || instr.rm == RM_RNE || instr.rm == RM_DYN {
        Ok(())
    } else {
        Err(ExecError::UnsupportedRoundingMode { op: instr.op, rm: instr.rm })
    }
}

fn exec_fp(state: &mut ArchState, instr: &Instruction) -> Result<(), ExecError> {
    use Opcode::*;
    if instr.op.has_rm() {
        check_rm(instr)?;
    }
    let rd = instr.rd as usize;
    let fr1 = state.f[instr.rs1 as usize];
    let fr2 = state.f[instr.rs2 as usize];
    let fr3 = state.f[instr.rs3 as usize];
    let (s1, s2, s3) = (unbox_s(fr1), unbox_s(fr2), unbox_s(fr3));
    let (d1, d2, d3) = (f64::from_bits(fr1), f64::from_bits(fr2), f64::from_bits(fr3));
    let x1 = state.x(instr.rs1);
    let rm = instr.rm;

    let mut fset = |v: u64| state.f[rd] = v;
    let mut xv: Option<u64> = None;
    match instr.op {
        FmaddS => fset(canon_s(s1.mul_add(s2, s3))),
        FmsubS => fset(canon_s(s1.mul_add(s2, -s3))),
        FnmsubS => fset(canon_s((-s1).mul_add(s2, s3))),
        FnmaddS => fset(canon_s((-s1).mul_add(s2, -s3))),
        FaddS => fset(canon_s(s1 + s2)),
        FsubS => fset(canon_s(s1 - s2)),
        FmulS => fset(canon_s(s1 * s2)),
        FdivS => fset(canon_s(s1 / s2)),
        FsqrtS => fset(canon_s(s1.sqrt())),
        FsgnjS => fset(box_s(sgnj32(s1.to_bits(), s2.to_bits(), 0))),
        FsgnjnS => fset(box_s(sgnj32(s1.to_bits(), s2.to_bits(), 1))),
        FsgnjxS => fset(box_s(sgnj32(s1.to_bits(), s2.to_bits(), 2))),
        FminS => fset(canon_s(fp::fmin_f32(s1, s2))),
        FmaxS => fset(canon_s(fp::fmax_f32(s1, s2))),
        FcvtWS => xv = Some(fp::to_signed(s1 as f64, rm, 32) as u64),
        FcvtWuS => xv = Some(sext32(fp::to_unsigned(s1 as f64, rm, 32))),
        FcvtLS => xv = Some(fp::to_signed(s1 as f64, rm, 64) as u64),
        FcvtLuS => xv = Some(fp::to_unsigned(s1 as f64, rm, 64)),
        FmvXW => xv = Some(sext32(fr1 & 0xffff_ffff)),
        FclassS => xv = Some(fp::fclass_s(s1)),
        FeqS => xv = Some((s1 == s2) as u64),
        FltS => xv = Some((s1 < s2) as u64),
        FleS => xv = Some((s1 <= s2) as u64),
        FcvtSW => fset(canon_s(x1 as i32 as f32)),
        FcvtSWu => fset(canon_s(x1 as u32 as f32)),
        FcvtSL => fset(canon_s(x1 as i64 as f32)),
        FcvtSLu => fset(canon_s(x1 as f32)),
        FmvWX => fset(box_s(x1 as u32)),

        FmaddD => fset(canon_d(d1.mul_add(d2, d3))),
        FmsubD => fset(canon_d(d1.mul_add(d2, -d3))),
        FnmsubD => fset(canon_d((-d1).mul_add(d2, d3))),
        FnmaddD => fset(canon_d((-d1).mul_add(d2, -d3))),
        FaddD => fset(canon_d(d1 + d2)),
        FsubD => fset(canon_d(d1 - d2)),
        FmulD => fset(canon_d(d1 * d2)),
        FdivD => fset(canon_d(d1 / d2)),
        FsqrtD => fset(canon_d(d1.sqrt())),
        FsgnjD => fset(sgnj64(fr1, fr2, 0)),
        FsgnjnD => fset(sgnj64(fr1, fr2, 1)),
        FsgnjxD => fset(sgnj64(fr1, fr2, 2)),
        FminD => fset(canon_d(fp::fmin_f64(d1, d2))),
        FmaxD => fset(canon_d(fp::fmax_f64(d1, d2))),
        FcvtSD => fset(canon_s(d1 as f32)),
        FcvtDS => fset(canon_d(s1 as f64)),
        FeqD => xv = Some((d1 == d2) as u64),
        FltD => xv = Some((d1 < d2) as u64),
        FleD => xv = Some((d1 <= d2) as u64),
        FclassD => xv = Some(fp::fclass_d(d1)),
        FcvtWD => xv = Some(fp::to_signed(d1, rm, 32) as u64),
        FcvtWuD => xv = Some(sext32(fp::to_unsigned(d1, rm, 32))),
        FcvtLD => xv = Some(fp::to_signed(d1, rm, 64) as u64),
        FcvtLuD => xv = Some(fp::to_unsigned(d1, rm, 64)),
        FmvXD => xv = Some(fr1),
        FcvtDW => fset(canon_d(x1 as i32 as f64)),
        FcvtDWu => fset(canon_d(x1 as u32 as f64)),
        FcvtDL => fset(canon_d(x1 as i64 as f64)),
        FcvtDLu => fset(canon_d(x1 as f64)),
        FmvDX => fset(x1),
        op => unreachable!("{op} is not a floating-point op"),
    }
    if let Some(v) = xv {
        state.set_x(instr.rd, v);
    }
    Ok(())
}

fn sgnj32(a: u32, b: u32, kind: u8) -> u32 {
    let sign = match kind {
        0 => b & 0x8000_0000,
        1 => !b & 0x8000_0000,
        _ => (a ^ b) & 0x8000_0000,
    };
    (a & 0x7fff_ffff) | sign
}

fn sgnj64(a: u64, b: u64, kind: u8) -> u64 {
    const SIGN: u64 = 1 << 63;
    let sign = match kind {
        0 => b & SIGN,
        1 => !b & SIGN,
        _ => (a ^ b) & SIGN,
    };
    (a & !SIGN) | sign
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::state::Memory;

    fn state() -> ArchState {
        let mut mem = Memory::new();
        mem.map(0x1000, 0x1000);
        ArchState::new(0x100, mem)
    }

    fn run(st: &mut ArchState, i: Instruction) -> Effects {
        step(st, &i).unwrap()
    }

    #[test]
    fn addi_immediate_move() {
        let mut st = state();
        let fx = run(&mut st, Instruction::i(Opcode::Addi, 5, 0, 42).unwrap());
        assert_eq!(st.x(5), 42);
        assert_eq!(fx.next_pc, 0x104);
        assert_eq!(st.pc, 0x104);
    }

    #[test]
    fn x0_stays_zero() {
        let mut st = state();
        st.set_x(1, 3);
        st.set_x(2, 4);
        run(&mut st, Instruction::r(Opcode::Add, 0, 1, 2).unwrap());
        assert_eq!(st.x(0), 0);
    }

    #[test]
    fn fmadd_d_example() {
        let mut st = state();
        st.f[2] = 1.5f64.to_bits();
        st.f[3] = 2.0f64.to_bits();
        st.f[4] = 0.25f64.to_bits();
        run(&mut st, Instruction::r4(Opcode::FmaddD, 1, 2, 3, 4).unwrap());
        assert_eq!(f64::from_bits(st.f[1]), 3.25);
    }

    #[test]
    fn fmadd_s_is_single_rounding() {
        // (1 + 2^-12)^2 - 1 = 2^-11 + 2^-24; rounding the product first drops 2^-24.
        let mut st = state();
        let a = 1.0f32 + 2f32.powi(-12);
        st.f[1] = box_s(a.to_bits());
        st.f[2] = box_s(a.to_bits());
        st.f[3] = box_s((-1.0f32).to_bits());
        run(&mut st, Instruction::r4(Opcode::FmaddS, 4, 1, 2, 3).unwrap());
        let fused = unbox_s(st.f[4]);
        assert_eq!(fused, 2f32.powi(-11) + 2f32.powi(-24));
        assert_eq!(a * a - 1.0, 2f32.powi(-11));
    }

    #[test]
    fn branches_and_jumps() {
        let mut st = state();
        st.set_x(1, 5);
        let fx = run(&mut st, Instruction::b(Opcode::Bne, 1, 0, -8).unwrap());
        assert_eq!(fx.next_pc, 0xf8);
        let fx = run(&mut st, Instruction::j(1, 0x20).unwrap());
        assert_eq!(fx.next_pc, 0x118);
        assert_eq!(st.x(1), 0xfc);
        st.set_x(2, 0x203);
        let fx = run(&mut st, Instruction::i(Opcode::Jalr, 0, 2, 0).unwrap());
        assert_eq!(fx.next_pc, 0x202);
    }

    #[test]
    fn loads_sign_extend_and_report_access() {
        let mut st = state();
        st.mem.store(0x1008, 8, 0xffff_ffff_8000_00ff).unwrap();
        st.set_x(1, 0x1000);
        let fx = run(&mut st, Instruction::i(Opcode::Lw, 2, 1, 8).unwrap());
        assert_eq!(st.x(2), 0xffff_ffff_8000_00ff);
        assert_eq!(fx.mem, Some(MemAccess { addr: 0x1008, size: 4, is_write: false }));
        run(&mut st, Instruction::i(Opcode::Lbu, 3, 1, 8).unwrap());
        assert_eq!(st.x(3), 0xff);
        run(&mut st, Instruction::i(Opcode::Lb, 3, 1, 8).unwrap());
        assert_eq!(st.x(3), u64::MAX);
    }

    #[test]
    fn unaligned_and_unmapped_accesses_fail() {
        let mut st = state();
        st.set_x(1, 0x1002);
        let err = step(&mut st, &Instruction::i(Opcode::Ld, 2, 1, 0).unwrap()).unwrap_err();
        assert_eq!(err, ExecError::Mem(MemError::Unaligned { addr: 0x1002, size: 8 }));
        st.set_x(1, 0x9000);
        let err = step(&mut st, &Instruction::s(Opcode::Sw, 2, 1, 0).unwrap()).unwrap_err();
        assert_eq!(err, ExecError::Mem(MemError::OutOfBounds { addr: 0x9000 }));
        // failed instructions do not advance pc
        assert_eq!(st.pc, 0x100);
    }

    #[test]
    fn division_edge_cases() {
        let mut st = state();
        st.set_x(1, i64::MIN as u64);
        st.set_x(2, u64::MAX);
        run(&mut st, Instruction::r(Opcode::Div, 3, 1, 2).unwrap());
        assert_eq!(st.x(3), i64::MIN as u64);
        run(&mut st, Instruction::r(Opcode::Rem, 3, 1, 2).unwrap());
        assert_eq!(st.x(3), 0);
        run(&mut st, Instruction::r(Opcode::Divu, 3, 1, 0).unwrap());
        assert_eq!(st.x(3), u64::MAX);
        run(&mut st, Instruction::r(Opcode::Remw, 3, 1, 0).unwrap());
        assert_eq!(st.x(3), 0);
        st.set_x(4, 7);
        run(&mut st, Instruction::r(Opcode::Remuw, 3, 4, 0).unwrap());
        assert_eq!(st.x(3), 7);
    }

    #[test]
    fn mulh_variants() {
        let mut st = state();
        st.set_x(1, u64::MAX); // -1
        st.set_x(2, 2);
        run(&mut st, Instruction::r(Opcode::Mulh, 3, 1, 2).unwrap());
        assert_eq!(st.x(3), u64::MAX);
        run(&mut st, Instruction::r(Opcode::Mulhu, 3, 1, 2).unwrap());
        assert_eq!(st.x(3), 1);
        run(&mut st, Instruction::r(Opcode::Mulhsu, 3, 1, 2).unwrap());
        assert_eq!(st.x(3), u64::MAX);
    }

    #[test]
    fn single_precision_results_are_boxed() {
        let mut st = state();
        st.f[1] = box_s(1.0f32.to_bits());
        st.f[2] = box_s(2.0f32.to_bits());
        run(&mut st, Instruction::r(Opcode::FaddS, 3, 1, 2).unwrap());
        assert_eq!(st.f[3] >> 32, 0xffff_ffff);
        assert_eq!(unbox_s(st.f[3]), 3.0);
        // unboxed inputs behave as canonical NaN
        st.f[4] = 1.0f32.to_bits() as u64;
        run(&mut st, Instruction::r(Opcode::FaddS, 5, 4, 2).unwrap());
        assert_eq!(st.f[5] as u32, fp::CANONICAL_NAN_S);
    }

    #[test]
    fn static_rounding_only_for_conversions() {
        let mut st = state();
        st.f[1] = box_s(2.7f32.to_bits());
        let cvt = Instruction::new(Opcode::FcvtWS, 2, 1, 0, 0, 0b001, 0).unwrap();
        run(&mut st, cvt);
        assert_eq!(st.x(2), 2);
        let add = Instruction::new(Opcode::FaddS, 2, 1, 1, 0, 0b001, 0).unwrap();
        assert!(matches!(step(&mut st, &add), Err(ExecError::UnsupportedRoundingMode { .. })));
    }

    #[test]
    fn ecall_requires_exit_number() {
        let mut st = state();
        st.set_x(17, 64);
        let ecall = Instruction::new(Opcode::Ecall, 0, 0, 0, 0, 0, 0).unwrap();
        assert_eq!(step(&mut st, &ecall), Err(ExecError::UnsupportedSyscall(64)));
        st.set_x(17, 93);
        assert!(step(&mut st, &ecall).is_ok());
    }
}
