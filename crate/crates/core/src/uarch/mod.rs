//! Trace-driven timing models.
//!
//! The functional [`Machine`] commits instructions; each committed record is
//! fed to a timing model, which evaluates a closed-form recurrence over the
//! committed stream. Architectural results therefore never depend on the
//! timing model, and caches see exactly the committed access stream:
//! instruction fetches on every change of I-cache line, then the data access
//! of loads and stores, in program order.

mod latency;
mod minor;
mod o3;
mod predictor;

pub use latency::{FuLatency, LatencyTable};
pub use minor::{IssueRecord, MinorConfig, MinorModel};
pub use o3::{FuPool, FuUnits, O3Config, O3Model};
pub use predictor::{GsharePredictor, Prediction, PredictorConfig, PredictorStats, ReturnStack};

use crate::isa::{FunctionalResult, Machine, Retired, SimError, TraceSink};
use crate::isa::Fault;
use crate::loader::MemoryImage;
use crate::memhier::{AccessKind, CacheStats, MemoryHierarchy};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stall cycles by cause.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StallBreakdown {
    pub raw_hazard: u64,
    pub structural: u64,
    pub icache: u64,
    pub dcache: u64,
    pub branch: u64,
}

impl StallBreakdown {
    pub fn total(&self) -> u64 {
        self.raw_hazard + self.structural + self.icache + self.dcache + self.branch
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingResult {
    pub cycles: u64,
    pub committed: u64,
    pub cpi: f64,
    pub stalls: StallBreakdown,
    /// `None` for models without a front-end predictor.
    pub predictor: Option<PredictorStats>,
    pub cache: CacheStats,
}

impl TimingResult {
    fn new(cycles: u64, committed: u64, stalls: StallBreakdown, predictor: Option<PredictorStats>, cache: CacheStats) -> Self {
        let cpi = if committed == 0 { 0.0 } else { cycles as f64 / committed as f64 };
        TimingResult { cycles, committed, cpi, stalls, predictor, cache }
    }

    pub fn branch_accuracy(&self) -> Option<f64> {
        self.predictor.and_then(|p| p.accuracy())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpeedupError {
    #[error("runs committed different instruction counts ({minor} vs {o3})")]
    MismatchedRuns { minor: u64, o3: u64 },
    #[error("zero-cycle run")]
    ZeroCycles,
}

/// `cycles_minor / cycles_o3`.
pub fn speedup(minor: &TimingResult, o3: &TimingResult) -> Result<f64, SpeedupError> {
    if minor.committed != o3.committed {
        return Err(SpeedupError::MismatchedRuns { minor: minor.committed, o3: o3.committed });
    }
    if o3.cycles == 0 {
        return Err(SpeedupError::ZeroCycles);
    }
    Ok(minor.cycles as f64 / o3.cycles as f64)
}

/// A timing model consuming the committed instruction stream.
pub trait TimingModel: TraceSink {
    fn finish(self) -> TimingResult;
}

/// Instruction fetch and branch resolution shared by all models.
#[derive(Clone, Debug)]
struct Frontend {
    predictor: Option<GsharePredictor>,
    line: Option<u64>,
    line_shift: u32,
    perfect_icache: bool,
}

impl Frontend {
    fn new(mem: &MemoryHierarchy, predictor: Option<GsharePredictor>, perfect_icache: bool) -> Self {
        Frontend {
            predictor,
            line: None,
            line_shift: mem.line_size().trailing_zeros(),
            perfect_icache,
        }
    }

    /// Fetch cycles beyond an L1I hit for the instruction at `pc`; the
    /// I-cache is accessed only when `pc` enters a different line.
    #[inline]
    fn fetch(&mut self, mem: &mut MemoryHierarchy, pc: u64) -> u64 {
        if self.perfect_icache {
            return 0;
        }
        let line = pc >> self.line_shift;
        if self.line == Some(line) {
            return 0;
        }
        self.line = Some(line);
        let lat = mem.access(pc, AccessKind::IFetch);
        (lat - mem.l1_hit_latency(AccessKind::IFetch)) as u64
    }

    /// True if `r` is a control instruction whose outcome was mispredicted.
    #[inline]
    fn mispredicted(&mut self, r: &Retired) -> bool {
        match &mut self.predictor {
            Some(p) if r.class().is_control() => p.observe(r.pc, &r.instr, r.next_pc),
            _ => false,
        }
    }

    fn stats(&self) -> Option<PredictorStats> {
        self.predictor.as_ref().map(|p| p.stats())
    }
}

/// Data access of a committed load/store: (latency, missed L1).
#[inline]
fn data_access(mem: &mut MemoryHierarchy, r: &Retired) -> Option<(u64, bool)> {
    r.mem.map(|m| {
        let kind = if m.is_write { AccessKind::Write } else { AccessKind::Read };
        let lat = mem.access(m.addr, kind);
        (lat as u64, lat > mem.l1_hit_latency(kind))
    })
}

/// Untimed model: one cycle per instruction. It still drives the cache
/// hierarchy with the same access stream as the timed models, so MPKI is
/// reported for it as well.
pub struct AtomicModel {
    mem: MemoryHierarchy,
    fe: Frontend,
    committed: u64,
}

impl AtomicModel {
    pub fn new(mem: MemoryHierarchy) -> Self {
        let fe = Frontend::new(&mem, None, false);
        AtomicModel { mem, fe, committed: 0 }
    }
}

impl TraceSink for AtomicModel {
    #[inline]
    fn record(&mut self, r: &Retired) {
        self.fe.fetch(&mut self.mem, r.pc);
        data_access(&mut self.mem, r);
        self.committed += 1;
    }
}

impl TimingModel for AtomicModel {
    fn finish(self) -> TimingResult {
        TimingResult::new(self.committed, self.committed, StallBreakdown::default(), None, self.mem.snapshot())
    }
}

/// Runs `image` on the functional model, feeding every committed
/// instruction to `model`.
pub fn simulate<M: TimingModel>(
    image: &MemoryImage,
    entry: u64,
    mut model: M,
    limit: u64,
    fault: Option<Fault>,
) -> Result<(TimingResult, FunctionalResult), SimError> {
    let mut m = Machine::new(image, entry)?.with_fault(fault);
    m.run(limit, &mut model)?;
    let functional = m.finish(None)?;
    Ok((model.finish(), functional))
}

pub fn simulate_atomic(
    image: &MemoryImage,
    entry: u64,
    mem: MemoryHierarchy,
    limit: u64,
) -> Result<(TimingResult, FunctionalResult), SimError> {
    simulate(image, entry, AtomicModel::new(mem), limit, None)
}

pub fn simulate_minor(
    image: &MemoryImage,
    entry: u64,
    config: &MinorConfig,
    mem: MemoryHierarchy,
    limit: u64,
) -> Result<(TimingResult, FunctionalResult), SimError> {
    simulate(image, entry, MinorModel::new(config.clone(), mem), limit, None)
}

pub fn simulate_o3(
    image: &MemoryImage,
    entry: u64,
    config: &O3Config,
    mem: MemoryHierarchy,
    limit: u64,
) -> Result<(TimingResult, FunctionalResult), SimError> {
    simulate(image, entry, O3Model::new(config.clone(), mem), limit, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(cycles: u64, committed: u64) -> TimingResult {
        TimingResult::new(cycles, committed, StallBreakdown::default(), None, CacheStats::default())
    }

    #[test]
    fn speedup_ratio() {
        assert_eq!(speedup(&result(10_000, 50), &result(2_500, 50)), Ok(4.0));
        assert_eq!(speedup(&result(7, 5), &result(7, 5)), Ok(1.0));
        assert_eq!(
            speedup(&result(7, 5), &result(7, 6)),
            Err(SpeedupError::MismatchedRuns { minor: 5, o3: 6 })
        );
    }
}
