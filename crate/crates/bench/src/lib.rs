//! Inputs shared by the criterion benches.

use rvmb_core::harness::{resolve, Workload};
use rvmb_core::isa::{encode, Instruction, Opcode};

/// Encodings of a representative loop body (the matmul inner loop plus
/// integer and branch traffic), repeated to `n` words.
pub fn instruction_words(n: usize) -> Vec<u32> {
    let body = [
        Instruction::i(Opcode::Flw, 1, 5, 0),
        Instruction::i(Opcode::Flw, 2, 6, 0),
        Instruction::r4(Opcode::FmaddS, 0, 1, 2, 0),
        Instruction::i(Opcode::Addi, 6, 6, 64),
        Instruction::i(Opcode::Addi, 5, 5, 4),
        Instruction::b(Opcode::Bne, 5, 7, -20),
        Instruction::r(Opcode::Mul, 10, 11, 12),
        Instruction::s(Opcode::Sd, 10, 2, 8),
    ];
    let words: Vec<u32> = body.iter().map(|i| encode(i.as_ref().unwrap()).unwrap()).collect();
    words.iter().copied().cycle().take(n).collect()
}

/// A suite benchmark compiled and bound with seed 1.
pub fn workload(name: &str) -> Workload {
    resolve(name, 1).expect("suite benchmark")
}

/// Addresses for a cache benchmark: a strided sweep over `bytes`.
pub fn sweep(bytes: u64, stride: u64) -> Vec<u64> {
    (0..bytes / stride).map(|i| 0x10_0000 + i * stride).collect()
}
