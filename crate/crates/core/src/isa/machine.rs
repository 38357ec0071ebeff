//! Functional (atomic) model: fetch, decode, execute, commit.

use super::decode::decode;
use super::exec::{step, ExecError, MemAccess, TraceEvent};
use super::instr::Instruction;
use super::opcode::InstrClass;
use super::state::ArchState;
use crate::loader::{ExitMonitor, ImageError, MemoryImage, Region};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::ops::{Index, IndexMut};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("illegal instruction {word:#010x} at pc {pc:#x}")]
    IllegalInstruction { pc: u64, word: u32 },
    #[error("{source} at pc {pc:#x}")]
    Fault { pc: u64, source: ExecError },
    #[error("no exit within {0} instructions")]
    LimitExceeded(u64),
    #[error("invalid image: {0}")]
    Image(#[from] ImageError),
}

impl SimError {
    pub fn pc(&self) -> Option<u64> {
        match self {
            SimError::IllegalInstruction { pc, .. } | SimError::Fault { pc, .. } => Some(*pc),
            _ => None,
        }
    }
}

/// A committed instruction together with everything the timing models need.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Retired {
    pub seq: u64,
    pub pc: u64,
    pub instr: Instruction,
    pub next_pc: u64,
    pub mem: Option<MemAccess>,
}

impl Retired {
    #[inline]
    pub fn class(&self) -> InstrClass {
        self.instr.class()
    }

    /// Control transfer left the fall-through path.
    #[inline]
    pub fn taken(&self) -> bool {
        self.next_pc != self.pc.wrapping_add(4)
    }

    pub fn event(&self) -> TraceEvent {
        TraceEvent { seq: self.seq, pc: self.pc, class: self.class(), mem: self.mem }
    }
}

/// Receives every committed instruction of a run.
pub trait TraceSink {
    fn record(&mut self, retired: &Retired);
}

impl TraceSink for () {
    #[inline]
    fn record(&mut self, _: &Retired) {}
}

impl TraceSink for Vec<TraceEvent> {
    fn record(&mut self, retired: &Retired) {
        self.push(retired.event());
    }
}

impl<F: FnMut(&Retired)> TraceSink for F {
    fn record(&mut self, retired: &Retired) {
        self(retired)
    }
}

/// Per-class committed-instruction counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InstrMix(pub [u64; InstrClass::COUNT]);

impl InstrMix {
    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (InstrClass, u64)> + '_ {
        InstrClass::ALL.iter().map(move |c| (*c, self.0[c.index()]))
    }

    /// Fractions per class; all zero for an empty mix.
    pub fn fractions(&self) -> [f64; InstrClass::COUNT] {
        let total = self.total();
        let mut out = [0.0; InstrClass::COUNT];
        if total > 0 {
            for (o, c) in out.iter_mut().zip(self.0) {
                *o = c as f64 / total as f64;
            }
        }
        out
    }
}

impl Index<InstrClass> for InstrMix {
    type Output = u64;
    fn index(&self, c: InstrClass) -> &u64 {
        &self.0[c.index()]
    }
}

impl IndexMut<InstrClass> for InstrMix {
    fn index_mut(&mut self, c: InstrClass) -> &mut u64 {
        &mut self.0[c.index()]
    }
}

/// Final architectural state summarized for cross-model comparison.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDigest {
    pub x: [u64; 32],
    pub f: [u64; 32],
    /// Final contents of the image's output region (empty if none).
    pub output: Vec<u8>,
    pub hash: [u8; 32],
}

impl StateDigest {
    pub fn capture(state: &ArchState, output: Option<Region>) -> Result<Self, SimError> {
        let output = match output {
            Some(r) => state
                .mem
                .read_bytes(r.addr, r.len)
                .map_err(|e| SimError::Fault { pc: state.pc, source: e.into() })?,
            None => Vec::new(),
        };
        let mut d = StateDigest { x: *state.xregs(), f: state.f, output, hash: [0; 32] };
        d.hash = Sha256::digest(d.blob()).into();
        Ok(d)
    }

    /// Byte serialization the hash covers: x registers, f registers, then the
    /// output region, all little-endian.
    pub fn blob(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(512 + self.output.len());
        for v in self.x.iter().chain(self.f.iter()) {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b.extend_from_slice(&self.output);
        b
    }

    pub fn hex(&self) -> String {
        hex::encode(self.hash)
    }
}

/// Result of running a program to completion.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionalResult {
    pub final_state: StateDigest,
    pub instr_counts: InstrMix,
    pub total_instrs: u64,
    pub exit_code: i64,
    /// SHA-256 of all mapped memory at exit.
    pub memory_hash: [u8; 32],
    pub console: Vec<u8>,
    pub trace: Option<Vec<TraceEvent>>,
}

impl FunctionalResult {
    pub fn digest(&self) -> String {
        self.final_state.hex()
    }
}

/// Deliberate corruption used to check that differentials catch divergence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fault {
    /// Flip the lowest mantissa bit of the result of the `nth` (0-based)
    /// fused multiply-add, as a wrong rounding would.
    FlipFmaRounding { nth: u64 },
}

/// Stepping interpreter over a loaded image.
pub struct Machine {
    state: ArchState,
    exit: ExitMonitor,
    output: Option<Region>,
    mix: InstrMix,
    seq: u64,
    exit_code: Option<i64>,
    fault: Option<Fault>,
    fma_seen: u64,
}

impl Machine {
    pub fn new(image: &MemoryImage, entry: u64) -> Result<Self, SimError> {
        image.validate()?;
        Ok(Machine {
            state: ArchState::new(entry, image.to_memory()),
            exit: ExitMonitor::new(image),
            output: image.output,
            mix: InstrMix::default(),
            seq: 0,
            exit_code: None,
            fault: None,
            fma_seen: 0,
        })
    }

    pub fn with_fault(mut self, fault: Option<Fault>) -> Self {
        self.fault = fault;
        self
    }

    pub fn state(&self) -> &ArchState {
        &self.state
    }

    pub fn exit_code(&self) -> Option<i64> {
        self.exit_code
    }

    pub fn retired(&self) -> u64 {
        self.seq
    }

    /// Executes one instruction. Must not be called after exit.
    #[inline]
    pub fn step(&mut self) -> Result<Retired, SimError> {
        debug_assert!(self.exit_code.is_none());
        let pc = self.state.pc;
        let word = self
            .state
            .mem
            .load_u32(pc)
            .map_err(|e| SimError::Fault { pc, source: e.into() })?;
        let instr = decode(word).map_err(|_| SimError::IllegalInstruction { pc, word })?;
        let fx = step(&mut self.state, &instr).map_err(|source| SimError::Fault { pc, source })?;
        let class = instr.class();
        if class == InstrClass::FloatMultAcc {
            self.apply_fault(&instr);
        }
        self.mix.0[class.index()] += 1;
        let retired = Retired { seq: self.seq, pc, instr, next_pc: fx.next_pc, mem: fx.mem };
        self.seq += 1;
        self.exit_code = self.exit.check(&self.state, &instr);
        Ok(retired)
    }

    fn apply_fault(&mut self, instr: &Instruction) {
        if let Some(Fault::FlipFmaRounding { nth }) = self.fault {
            if self.fma_seen == nth {
                self.state.f[instr.rd as usize] ^= 1;
            }
        }
        self.fma_seen += 1;
    }

    /// Runs until exit, feeding every committed instruction to `sink`.
    pub fn run<S: TraceSink + ?Sized>(&mut self, limit: u64, sink: &mut S) -> Result<i64, SimError> {
        while self.exit_code.is_none() {
            if self.seq >= limit {
                return Err(SimError::LimitExceeded(limit));
            }
            let r = self.step()?;
            sink.record(&r);
        }
        Ok(self.exit_code.unwrap_or_default())
    }

    /// Summarizes a finished run.
    pub fn finish(self, trace: Option<Vec<TraceEvent>>) -> Result<FunctionalResult, SimError> {
        let final_state = StateDigest::capture(&self.state, self.output)?;
        Ok(FunctionalResult {
            final_state,
            instr_counts: self.mix,
            total_instrs: self.seq,
            exit_code: self.exit_code.unwrap_or_default(),
            memory_hash: self.state.mem.content_hash(),
            console: self.state.mem.console().to_vec(),
            trace,
        })
    }
}

/// Runs an image on the functional model until it exits.
pub fn run_functional(image: &MemoryImage, entry: u64, limit: u64) -> Result<FunctionalResult, SimError> {
    let mut m = Machine::new(image, entry)?;
    m.run(limit, &mut ())?;
    m.finish(None)
}

/// As [`run_functional`], also recording the committed trace.
pub fn run_functional_traced(
    image: &MemoryImage,
    entry: u64,
    limit: u64,
) -> Result<FunctionalResult, SimError> {
    let mut m = Machine::new(image, entry)?;
    let mut trace = Vec::new();
    m.run(limit, &mut trace)?;
    m.finish(Some(trace))
}
