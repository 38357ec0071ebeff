//! RV64IMFD decoding, classification and the functional reference model.

mod decode;
mod exec;
pub mod fp;
mod instr;
mod machine;
mod opcode;
mod state;

pub use decode::{decode, IllegalInstruction};
pub use exec::{step, Effects, ExecError, MemAccess, TraceEvent};
pub use instr::{default_rm, encode, reg_name, EncodeError, Instruction, RM_DYN, RM_RDN, RM_RMM, RM_RNE, RM_RTZ, RM_RUP};
pub use machine::{
    run_functional, run_functional_traced, Fault, FunctionalResult, InstrMix, Machine, Retired,
    SimError, StateDigest, TraceSink,
};
pub use opcode::{Format, InstrClass, Opcode, RegFile, Width};
pub use state::{ArchState, MemError, Memory, CONSOLE_ADDR, PAGE_SIZE};

/// Functional class of an instruction (gem5 naming).
pub fn classify(instr: &Instruction) -> InstrClass {
    instr.op.class()
}
