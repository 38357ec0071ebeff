//! Gshare direction predictor with a return address stack.

use crate::isa::{InstrClass, Instruction, Opcode};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorConfig {
    pub pht_entries: usize,
    pub history_bits: u32,
    pub ras_entries: usize,
    /// Initial value of every 2-bit counter (1 = weakly not-taken).
    pub counter_init: u8,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig { pht_entries: 4096, history_bits: 12, ras_entries: 32, counter_init: 1 }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !self.pht_entries.is_power_of_two() {
            return Err("pht_entries must be a power of two");
        }
        if self.history_bits > 32 {
            return Err("history_bits must be at most 32");
        }
        if self.ras_entries == 0 {
            return Err("ras_entries must be at least 1");
        }
        if self.counter_init > 3 {
            return Err("counter_init must be in 0..=3");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Prediction {
    pub taken: bool,
    /// Predicted next pc.
    pub target: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictorStats {
    /// All control-flow instructions predicted.
    pub predictions: u64,
    pub mispredictions: u64,
    pub branches: u64,
    pub branch_mispredictions: u64,
    pub returns: u64,
    /// Returns whose target came correctly off the RAS.
    pub ras_hits: u64,
}

impl PredictorStats {
    /// Fraction of control-flow instructions predicted correctly.
    pub fn accuracy(&self) -> Option<f64> {
        (self.predictions > 0)
            .then(|| 1.0 - self.mispredictions as f64 / self.predictions as f64)
    }
}

/// Fixed-size return address stack; pushing onto a full stack overwrites
/// the oldest entry.
#[derive(Clone, Debug)]
pub struct ReturnStack {
    buf: Vec<u64>,
    top: usize,
    len: usize,
}

impl ReturnStack {
    pub fn new(entries: usize) -> Self {
        ReturnStack { buf: vec![0; entries], top: 0, len: 0 }
    }

    pub fn push(&mut self, addr: u64) {
        self.top = (self.top + 1) % self.buf.len();
        self.buf[self.top] = addr;
        self.len = (self.len + 1).min(self.buf.len());
    }

    pub fn pop(&mut self) -> Option<u64> {
        if self.len == 0 {
            return None;
        }
        let v = self.buf[self.top];
        self.top = (self.top + self.buf.len() - 1) % self.buf.len();
        self.len -= 1;
        Some(v)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

#[derive(Clone, Copy, Debug)]
struct Pending {
    pc: u64,
    pred: Prediction,
    pht_index: Option<usize>,
    is_return: bool,
}

#[derive(Clone, Debug)]
pub struct GsharePredictor {
    pht: Vec<u8>,
    ghr: u64,
    history_mask: u64,
    index_mask: u64,
    ras: ReturnStack,
    pending: Option<Pending>,
    stats: PredictorStats,
}

fn is_return(i: &Instruction) -> bool {
    i.op == Opcode::Jalr && i.rs1 == 1 && i.rd == 0
}

fn is_call(i: &Instruction) -> bool {
    matches!(i.op, Opcode::Jal | Opcode::Jalr) && i.rd == 1
}

impl GsharePredictor {
    /// `config` must have passed [`PredictorConfig::validate`].
    pub fn new(config: PredictorConfig) -> Self {
        GsharePredictor {
            pht: vec![config.counter_init; config.pht_entries],
            ghr: 0,
            history_mask: (1u64 << config.history_bits) - 1,
            index_mask: config.pht_entries as u64 - 1,
            ras: ReturnStack::new(config.ras_entries),
            pending: None,
            stats: PredictorStats::default(),
        }
    }

    #[inline]
    pub fn index(&self, pc: u64) -> usize {
        (((pc >> 2) ^ self.ghr) & self.index_mask) as usize
    }

    pub fn counter(&self, pc: u64) -> u8 {
        self.pht[self.index(pc)]
    }

    pub fn history(&self) -> u64 {
        self.ghr
    }

    pub fn stats(&self) -> PredictorStats {
        self.stats
    }

    pub fn ras(&self) -> &ReturnStack {
        &self.ras
    }

    /// Predicts a branch or jump at `pc`. The RAS is updated speculatively
    /// (push on call, pop on return).
    pub fn predict(&mut self, pc: u64, instr: &Instruction) -> Prediction {
        debug_assert!(instr.class().is_control());
        let fall = pc.wrapping_add(4);
        let mut pht_index = None;
        let pred = match instr.class() {
            InstrClass::Branch => {
                let idx = self.index(pc);
                pht_index = Some(idx);
                let taken = self.pht[idx] >= 2;
                let target = if taken { pc.wrapping_add(instr.imm as u64) } else { fall };
                Prediction { taken, target }
            }
            _ if instr.op == Opcode::Jal => {
                Prediction { taken: true, target: pc.wrapping_add(instr.imm as u64) }
            }
            _ if is_return(instr) => match self.ras.pop() {
                Some(t) => Prediction { taken: true, target: t },
                None => Prediction { taken: false, target: fall },
            },
            // other indirect jumps have no target predictor
            _ => Prediction { taken: false, target: fall },
        };
        if is_call(instr) {
            self.ras.push(fall);
        }
        self.pending = Some(Pending { pc, pred, pht_index, is_return: is_return(instr) });
        pred
    }

    /// Resolves the prediction made for `pc`; returns true on a mispredict.
    pub fn update(&mut self, pc: u64, taken: bool, target: u64) -> bool {
        let p = self.pending.take().filter(|p| p.pc == pc).expect("update without predict");
        let actual = if taken { target } else { pc.wrapping_add(4) };
        let miss = p.pred.target != actual;
        self.stats.predictions += 1;
        self.stats.mispredictions += miss as u64;
        if let Some(idx) = p.pht_index {
            let c = &mut self.pht[idx];
            *c = if taken { (*c + 1).min(3) } else { c.saturating_sub(1) };
            self.ghr = ((self.ghr << 1) | taken as u64) & self.history_mask;
            self.stats.branches += 1;
            self.stats.branch_mispredictions += miss as u64;
        }
        if p.is_return {
            self.stats.returns += 1;
            self.stats.ras_hits += !miss as u64;
        }
        miss
    }

    /// Predict + update for a committed control instruction.
    #[inline]
    pub fn observe(&mut self, pc: u64, instr: &Instruction, next_pc: u64) -> bool {
        self.predict(pc, instr);
        self.update(pc, next_pc != pc.wrapping_add(4), next_pc)
    }
}

impl Default for GsharePredictor {
    fn default() -> Self {
        GsharePredictor::new(PredictorConfig::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beq(off: i64) -> Instruction {
        Instruction::b(Opcode::Beq, 1, 2, off).unwrap()
    }

    #[test]
    fn fresh_counter_predicts_not_taken() {
        let mut p = GsharePredictor::default();
        let pred = p.predict(0x1000, &beq(-16));
        assert!(!pred.taken);
        assert_eq!(pred.target, 0x1004);
        assert!(p.update(0x1000, true, 0xff0));
    }

    #[test]
    fn two_taken_updates_flip_prediction() {
        let mut p = GsharePredictor::new(PredictorConfig { history_bits: 0, ..Default::default() });
        for _ in 0..2 {
            p.observe(0x1000, &beq(-16), 0xff0);
        }
        assert_eq!(p.counter(0x1000), 3);
        assert!(p.predict(0x1000, &beq(-16)).taken);
        p.update(0x1000, false, 0x1004);
        assert_eq!(p.counter(0x1000), 2);
    }

    #[test]
    fn counter_saturates() {
        let mut p = GsharePredictor::new(PredictorConfig { history_bits: 0, ..Default::default() });
        for _ in 0..5 {
            p.observe(0x40, &beq(8), 0x48);
        }
        assert_eq!(p.counter(0x40), 3);
        for _ in 0..5 {
            p.observe(0x40, &beq(8), 0x44);
        }
        assert_eq!(p.counter(0x40), 0);
    }

    #[test]
    fn index_hashes_pc_with_history() {
        let mut p = GsharePredictor::default();
        p.observe(0x100, &beq(8), 0x108); // ghr = 1
        assert_eq!(p.history(), 1);
        assert_eq!(p.index(0x2000), (0x800 ^ 1) & 0xfff);
    }

    #[test]
    fn ras_wraps_and_loses_oldest() {
        let mut r = ReturnStack::new(4);
        for v in 1..=6 {
            r.push(v);
        }
        assert_eq!(r.len(), 4);
        assert_eq!([r.pop(), r.pop(), r.pop(), r.pop(), r.pop()], [Some(6), Some(5), Some(4), Some(3), None]);
    }

    #[test]
    fn nested_calls_return_through_ras() {
        let call = Instruction::j(1, 0x100).unwrap();
        let ret = Instruction::i(Opcode::Jalr, 0, 1, 0).unwrap();
        for depth in [32u64, 33] {
            let mut p = GsharePredictor::default();
            let sites: Vec<u64> = (0..depth).map(|k| 0x1000 + 0x200 * k).collect();
            for &pc in &sites {
                assert!(!p.observe(pc, &call, pc + 0x100));
            }
            let mut hits = 0;
            for &pc in sites.iter().rev() {
                hits += !p.observe(0x9000, &ret, pc + 4) as u64;
            }
            assert_eq!(hits, 32, "depth {depth}");
            assert_eq!(p.stats().ras_hits, 32);
        }
    }

    #[test]
    fn indirect_jump_and_underflow_mispredict() {
        let mut p = GsharePredictor::default();
        let ret = Instruction::i(Opcode::Jalr, 0, 1, 0).unwrap();
        assert!(p.observe(0x10, &ret, 0x500));
        let jr = Instruction::i(Opcode::Jalr, 0, 5, 0).unwrap();
        assert!(p.observe(0x20, &jr, 0x600));
        let s = p.stats();
        assert_eq!((s.predictions, s.mispredictions, s.returns, s.ras_hits), (2, 2, 1, 0));
    }
}
