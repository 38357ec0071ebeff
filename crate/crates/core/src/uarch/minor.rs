//! Scalar in-order core.
//!
//! Per committed instruction `i`:
//!
//! ```text
//! issue[i] = max(issue[i-1] + 1,          program order, width 1
//!                redirect,                 mispredicted branch: done[b] + penalty
//!                ... + icache extra,       cycles beyond an L1I hit, on line change
//!                ready[src] for each src,  RAW
//!                fu_free[class])           unpipelined units
//! done[i]  = issue[i] + latency            (+ memory latency for loads/stores)
//! cycles   = max_i done[i] + depth - 1
//! ```
//!
//! The constraints are applied one after another and each increment is
//! charged to its cause, so `cycles == committed + stalls + depth - 1`
//! holds exactly; the tail after the last issue is charged to the unit that
//! completes last (dcache for memory operations, raw_hazard otherwise).
//! L1D misses are serialized through a single miss port.

use super::{data_access, Frontend, GsharePredictor, LatencyTable, PredictorConfig, StallBreakdown, TimingModel, TimingResult};
use crate::isa::{InstrClass, Retired, TraceSink};
use crate::memhier::MemoryHierarchy;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinorConfig {
    pub pipeline_depth: u32,
    pub issue_width: u32,
    pub mispredict_penalty: u32,
    pub latencies: LatencyTable,
    pub predictor: PredictorConfig,
    /// Skip instruction fetch through the cache hierarchy.
    pub perfect_icache: bool,
}

impl Default for MinorConfig {
    fn default() -> Self {
        MinorConfig {
            pipeline_depth: 5,
            issue_width: 1,
            mispredict_penalty: 3,
            latencies: LatencyTable::default(),
            predictor: PredictorConfig::default(),
            perfect_icache: false,
        }
    }
}

impl MinorConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.issue_width != 1 {
            return Err("minor: issue_width must be 1".into());
        }
        if self.pipeline_depth < 2 {
            return Err("minor: pipeline_depth must be at least 2".into());
        }
        if self.mispredict_penalty != self.pipeline_depth - 2 {
            return Err("minor: mispredict_penalty must equal pipeline_depth - 2".into());
        }
        self.latencies
            .validate()
            .map_err(|c| format!("minor: latency of {c} must be at least 1"))?;
        self.predictor.validate().map_err(|e| format!("minor: {e}"))
    }
}

/// Per-instruction schedule, recorded on request.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IssueRecord {
    pub seq: u64,
    pub issue: u64,
    pub done: u64,
}

pub struct MinorModel {
    cfg: MinorConfig,
    mem: MemoryHierarchy,
    fe: Frontend,
    committed: u64,
    next_issue: u64,
    redirect: u64,
    ready: [u64; 64],
    ready_from_mem: [bool; 64],
    fu_free: [u64; InstrClass::COUNT],
    miss_port_free: u64,
    max_done: u64,
    max_done_mem: bool,
    stalls: StallBreakdown,
    log: Option<Vec<IssueRecord>>,
}

impl MinorModel {
    pub fn new(cfg: MinorConfig, mem: MemoryHierarchy) -> Self {
        let fe = Frontend::new(&mem, Some(GsharePredictor::new(cfg.predictor)), cfg.perfect_icache);
        MinorModel {
            cfg,
            mem,
            fe,
            committed: 0,
            next_issue: 0,
            redirect: 0,
            ready: [0; 64],
            ready_from_mem: [false; 64],
            fu_free: [0; InstrClass::COUNT],
            miss_port_free: 0,
            max_done: 0,
            max_done_mem: false,
            stalls: StallBreakdown::default(),
            log: None,
        }
    }

    /// Records issue and completion cycles of every instruction.
    pub fn with_issue_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn issue_log(&self) -> &[IssueRecord] {
        self.log.as_deref().unwrap_or(&[])
    }

    pub fn memory(&self) -> &MemoryHierarchy {
        &self.mem
    }

    fn finish_ref(&self) -> TimingResult {
        let mut stalls = self.stalls;
        let depth = self.cfg.pipeline_depth as u64;
        let cycles = if self.committed == 0 {
            0
        } else {
            // next_issue == issue[N-1] + 1 <= done[N-1] <= max_done
            let drain = self.max_done - self.next_issue;
            if self.max_done_mem {
                stalls.dcache += drain;
            } else {
                stalls.raw_hazard += drain;
            }
            self.max_done + depth - 1
        };
        TimingResult::new(cycles, self.committed, stalls, self.fe.stats(), self.mem.snapshot())
    }
}

impl TraceSink for MinorModel {
    #[inline]
    fn record(&mut self, r: &Retired) {
        let class = r.class();
        let fu = self.cfg.latencies[class];
        let base = self.next_issue;

        let t = base.max(self.redirect);
        self.stalls.branch += t - base;

        let extra = self.fe.fetch(&mut self.mem, r.pc);
        let t = t + extra;
        self.stalls.icache += extra;

        let mut src_ready = 0;
        let mut src_mem = false;
        for s in r.instr.sources() {
            let s = s as usize;
            if self.ready[s] > src_ready {
                src_ready = self.ready[s];
                src_mem = self.ready_from_mem[s];
            }
        }
        let t2 = t.max(src_ready);
        if src_mem {
            self.stalls.dcache += t2 - t;
        } else {
            self.stalls.raw_hazard += t2 - t;
        }

        let issue = t2.max(self.fu_free[class.index()]);
        self.stalls.structural += issue - t2;

        let mut done = issue + fu.latency as u64;
        if let Some((lat, miss)) = data_access(&mut self.mem, r) {
            let start = if miss { done.max(self.miss_port_free) } else { done };
            done = start + lat;
            if miss {
                self.miss_port_free = done;
            }
        }
        self.fu_free[class.index()] = if fu.pipelined { issue + 1 } else { done };

        if let Some(d) = r.instr.dest() {
            self.ready[d as usize] = done;
            self.ready_from_mem[d as usize] = class == InstrClass::MemRead;
        }
        if self.fe.mispredicted(r) {
            self.redirect = done + self.cfg.mispredict_penalty as u64;
        }
        if done >= self.max_done {
            self.max_done = done;
            self.max_done_mem = class.is_mem();
        }
        if let Some(log) = &mut self.log {
            log.push(IssueRecord { seq: r.seq, issue, done });
        }
        self.next_issue = issue + 1;
        self.committed += 1;
    }
}

impl TimingModel for MinorModel {
    fn finish(self) -> TimingResult {
        self.finish_ref()
    }
}
