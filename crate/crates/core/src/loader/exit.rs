//! Bare-metal exit conventions.
//!
//! * HTIF: a store of `v` with `v & 1 == 1` to the `tohost` symbol exits with
//!   code `v >> 1`.
//! * Linux-style `exit`: ECALL with `a7 == 93` exits with the low 32 bits of
//!   `a0`.

use super::image::MemoryImage;
use crate::isa::{ArchState, Instruction, Opcode};

pub const EXIT_SYSCALL: u64 = 93;

/// Per-run exit detector; resolves the tohost address once.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExitMonitor {
    tohost: Option<u64>,
}

impl ExitMonitor {
    pub fn new(image: &MemoryImage) -> Self {
        ExitMonitor { tohost: image.tohost() }
    }

    /// Called after `instr` committed against `state`.
    #[inline]
    pub fn check(&self, state: &ArchState, instr: &Instruction) -> Option<i64> {
        match instr.op {
            Opcode::Sb | Opcode::Sh | Opcode::Sw | Opcode::Sd => {
                let tohost = self.tohost?;
                let addr = state.x(instr.rs1).wrapping_add(instr.imm as u64);
                if addr != tohost {
                    return None;
                }
                let size = instr.op.access_size().unwrap_or(8) as u32;
                let mut v = state.x(instr.rs2);
                if size < 8 {
                    v &= (1u64 << (size * 8)) - 1;
                }
                (v & 1 == 1).then_some((v >> 1) as i64)
            }
            Opcode::Ecall if state.x(17) == EXIT_SYSCALL => Some(state.x(10) as u32 as i64),
            _ => None,
        }
    }
}

/// Returns the exit code if `instr`, just committed, terminates the program.
pub fn exit_check(state: &ArchState, instr: &Instruction, image: &MemoryImage) -> Option<i64> {
    ExitMonitor::new(image).check(state, instr)
}
