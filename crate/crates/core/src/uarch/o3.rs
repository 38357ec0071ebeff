//! Out-of-order core: list scheduling of the committed stream inside a
//! reorder-buffer window.
//!
//! * dispatch is in order, at most `dispatch_width` per cycle, and waits for
//!   a free ROB entry (`dispatch[i] >= commit[i - rob_size]`) and a free
//!   load/store queue entry;
//! * an instruction starts once its sources are ready, an issue slot and a
//!   unit of its pool are free (unpipelined operations hold their unit for
//!   their whole latency), and, for loads, every older overlapping store in
//!   flight has completed;
//! * commit is in order, at most `commit_width` per cycle, no earlier than
//!   completion;
//! * a mispredicted control instruction holds back dispatch of younger
//!   instructions until its completion plus the penalty.
//!
//! Total cycles are the commit time of the last instruction. Stall counters
//! record dispatch (front-end) delays only.

use super::{data_access, Frontend, GsharePredictor, LatencyTable, PredictorConfig, StallBreakdown, TimingModel, TimingResult};
use crate::isa::{InstrClass, Retired, TraceSink};
use crate::memhier::MemoryHierarchy;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FuPool {
    IntAlu = 0,
    IntMulDiv = 1,
    FpFma = 2,
    MemPort = 3,
}

impl FuPool {
    pub fn of(class: InstrClass) -> FuPool {
        use InstrClass::*;
        match class {
            IntAlu | Branch | Jump | Other => FuPool::IntAlu,
            IntMult | IntDiv => FuPool::IntMulDiv,
            FloatAdd | FloatMult | FloatMultAcc | FloatDiv | FloatMisc => FuPool::FpFma,
            MemRead | MemWrite => FuPool::MemPort,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuUnits {
    pub int_alu: u32,
    pub int_muldiv: u32,
    pub fp_fma: u32,
    pub mem_port: u32,
}

impl Default for FuUnits {
    fn default() -> Self {
        FuUnits { int_alu: 2, int_muldiv: 1, fp_fma: 2, mem_port: 2 }
    }
}

impl FuUnits {
    fn as_array(&self) -> [u32; 4] {
        [self.int_alu, self.int_muldiv, self.fp_fma, self.mem_port]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct O3Config {
    pub rob_size: u32,
    pub dispatch_width: u32,
    pub issue_width: u32,
    pub commit_width: u32,
    pub units: FuUnits,
    pub load_queue: u32,
    pub store_queue: u32,
    pub mispredict_penalty: u32,
    pub latencies: LatencyTable,
    pub predictor: PredictorConfig,
    pub perfect_icache: bool,
}

impl Default for O3Config {
    fn default() -> Self {
        O3Config {
            rob_size: 128,
            dispatch_width: 4,
            issue_width: 4,
            commit_width: 4,
            units: FuUnits::default(),
            load_queue: 32,
            store_queue: 32,
            mispredict_penalty: 8,
            latencies: LatencyTable::default(),
            predictor: PredictorConfig::default(),
            perfect_icache: false,
        }
    }
}

impl O3Config {
    pub fn validate(&self) -> Result<(), String> {
        let counts = [
            ("rob_size", self.rob_size),
            ("dispatch_width", self.dispatch_width),
            ("issue_width", self.issue_width),
            ("commit_width", self.commit_width),
            ("units.int_alu", self.units.int_alu),
            ("units.int_muldiv", self.units.int_muldiv),
            ("units.fp_fma", self.units.fp_fma),
            ("units.mem_port", self.units.mem_port),
            ("load_queue", self.load_queue),
            ("store_queue", self.store_queue),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(format!("o3: {name} must be at least 1"));
        }
        if self.issue_width > 255 || self.units.as_array().iter().any(|&u| u > 255) {
            return Err("o3: widths and unit counts must be at most 255".into());
        }
        self.latencies
            .validate()
            .map_err(|c| format!("o3: latency of {c} must be at least 1"))?;
        self.predictor.validate().map_err(|e| format!("o3: {e}"))
    }
}

/// Ring of the last `n` values of a per-instruction time series.
struct History {
    buf: Vec<u64>,
    pos: usize,
    filled: bool,
}

impl History {
    fn new(n: usize) -> Self {
        History { buf: vec![0; n], pos: 0, filled: false }
    }

    /// Value pushed `n` pushes ago, if there is one.
    #[inline]
    fn nth_back(&self) -> Option<u64> {
        self.filled.then(|| self.buf[self.pos])
    }

    #[inline]
    fn push(&mut self, v: u64) {
        self.buf[self.pos] = v;
        self.pos += 1;
        if self.pos == self.buf.len() {
            self.pos = 0;
            self.filled = true;
        }
    }
}

/// Per-cycle issue-slot and unit occupancy from `base` onwards.
struct SlotTable {
    base: u64,
    width: u8,
    units: [u8; 4],
    // [issued, pool0, pool1, pool2, pool3]
    cycles: VecDeque<[u8; 5]>,
}

impl SlotTable {
    fn new(width: u32, units: [u32; 4]) -> Self {
        SlotTable {
            base: 0,
            width: width.min(255) as u8,
            units: units.map(|u| u.min(255) as u8),
            cycles: VecDeque::new(),
        }
    }

    /// Forgets cycles before `t`; nothing will be scheduled there again.
    fn advance(&mut self, t: u64) {
        while self.base < t {
            if self.cycles.pop_front().is_none() {
                self.base = t;
                return;
            }
            self.base += 1;
        }
    }

    /// Earliest cycle >= `earliest` with a free issue slot and a unit of
    /// `pool` free for `occupancy` consecutive cycles; reserves it.
    fn reserve(&mut self, earliest: u64, pool: FuPool, occupancy: u64) -> u64 {
        let p = pool as usize + 1;
        let cap = self.units[pool as usize];
        let mut t = earliest.max(self.base);
        loop {
            let off = (t - self.base) as usize;
            let need = off + occupancy as usize;
            if self.cycles.len() < need {
                self.cycles.resize(need, [0; 5]);
            }
            if self.cycles[off][0] < self.width {
                match (off..need).find(|&k| self.cycles[k][p] >= cap) {
                    None => {
                        self.cycles[off][0] += 1;
                        for k in off..need {
                            self.cycles[k][p] += 1;
                        }
                        return t;
                    }
                    Some(busy) if busy > off => t += (busy - off) as u64,
                    Some(_) => t += 1,
                }
            } else {
                t += 1;
            }
        }
    }
}

#[derive(Clone, Copy)]
struct InflightStore {
    seq: u64,
    addr: u64,
    end: u64,
    done: u64,
}

pub struct O3Model {
    cfg: O3Config,
    mem: MemoryHierarchy,
    fe: Frontend,
    committed: u64,
    last_dispatch: u64,
    dispatches: History,
    commits_rob: History,
    commits_width: History,
    load_commits: History,
    store_commits: History,
    last_commit: u64,
    redirect: u64,
    ready: [u64; 64],
    slots: SlotTable,
    stores: VecDeque<InflightStore>,
    miss_port_free: u64,
    stalls: StallBreakdown,
}

impl O3Model {
    pub fn new(cfg: O3Config, mem: MemoryHierarchy) -> Self {
        let fe = Frontend::new(&mem, Some(GsharePredictor::new(cfg.predictor)), cfg.perfect_icache);
        O3Model {
            dispatches: History::new(cfg.dispatch_width as usize),
            commits_rob: History::new(cfg.rob_size as usize),
            commits_width: History::new(cfg.commit_width as usize),
            load_commits: History::new(cfg.load_queue as usize),
            store_commits: History::new(cfg.store_queue as usize),
            slots: SlotTable::new(cfg.issue_width, cfg.units.as_array()),
            cfg,
            mem,
            fe,
            committed: 0,
            last_dispatch: 0,
            last_commit: 0,
            redirect: 0,
            ready: [0; 64],
            stores: VecDeque::new(),
            miss_port_free: 0,
            stalls: StallBreakdown::default(),
        }
    }
}

impl TraceSink for O3Model {
    fn record(&mut self, r: &Retired) {
        let class = r.class();
        let fu = self.cfg.latencies[class];
        let seq = self.committed;

        // dispatch
        let base = self.last_dispatch.max(self.dispatches.nth_back().map_or(0, |d| d + 1));
        let t = base.max(self.redirect);
        self.stalls.branch += t - base;
        let extra = self.fe.fetch(&mut self.mem, r.pc);
        let t = t + extra;
        self.stalls.icache += extra;
        let mut dispatch = t.max(self.commits_rob.nth_back().unwrap_or(0));
        match class {
            InstrClass::MemRead => dispatch = dispatch.max(self.load_commits.nth_back().unwrap_or(0)),
            InstrClass::MemWrite => dispatch = dispatch.max(self.store_commits.nth_back().unwrap_or(0)),
            _ => {}
        }
        self.stalls.structural += dispatch - t;
        self.slots.advance(dispatch);

        // issue
        let mut earliest = dispatch;
        for s in r.instr.sources() {
            earliest = earliest.max(self.ready[s as usize]);
        }
        let window_start = seq.saturating_sub(self.cfg.rob_size as u64);
        while self.stores.front().is_some_and(|s| s.seq < window_start) {
            self.stores.pop_front();
        }
        if let (InstrClass::MemRead, Some(m)) = (class, r.mem) {
            let end = m.addr + m.size as u64;
            for st in &self.stores {
                if st.addr < end && m.addr < st.end {
                    earliest = earliest.max(st.done);
                }
            }
        }
        let occupancy = if fu.pipelined { 1 } else { fu.latency as u64 };
        let start = self.slots.reserve(earliest, FuPool::of(class), occupancy);

        let mut done = start + fu.latency as u64;
        if let Some((lat, miss)) = data_access(&mut self.mem, r) {
            let begin = if miss { done.max(self.miss_port_free) } else { done };
            done = begin + lat;
            if miss {
                self.miss_port_free = done;
            }
        }
        if let Some(d) = r.instr.dest() {
            self.ready[d as usize] = done;
        }
        if let (InstrClass::MemWrite, Some(m)) = (class, r.mem) {
            self.stores.push_back(InflightStore { seq, addr: m.addr, end: m.addr + m.size as u64, done });
        }
        if self.fe.mispredicted(r) {
            self.redirect = done + self.cfg.mispredict_penalty as u64;
        }

        // commit
        let commit = done
            .max(self.last_commit)
            .max(self.commits_width.nth_back().map_or(0, |c| c + 1));
        self.last_commit = commit;
        self.last_dispatch = dispatch;
        self.dispatches.push(dispatch);
        self.commits_rob.push(commit);
        self.commits_width.push(commit);
        match class {
            InstrClass::MemRead => self.load_commits.push(commit),
            InstrClass::MemWrite => self.store_commits.push(commit),
            _ => {}
        }
        self.committed += 1;
    }
}

impl TimingModel for O3Model {
    fn finish(self) -> TimingResult {
        TimingResult::new(self.last_commit, self.committed, self.stalls, self.fe.stats(), self.mem.snapshot())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::{Instruction, MemAccess, Opcode};

    fn retired(seq: u64, instr: Instruction) -> Retired {
        let pc = 0x1000 + 4 * seq;
        Retired { seq, pc, instr, next_pc: pc + 4, mem: None }
    }

    fn model(cfg: O3Config) -> O3Model {
        O3Model::new(O3Config { perfect_icache: true, ..cfg }, MemoryHierarchy::default())
    }

    #[test]
    fn eight_independent_adds() {
        let mut m = model(O3Config::default());
        for i in 0..8u64 {
            let rd = 5 + i as u8;
            m.record(&retired(i, Instruction::r(Opcode::Add, rd, 1, 2).unwrap()));
        }
        // two ALUs: starts 0,0,1,1,2,2,3,3; last completes and commits at 4
        assert_eq!(m.finish().cycles, 4);
    }

    #[test]
    fn dependent_chain_is_serial() {
        let mut m = model(O3Config::default());
        let add = Instruction::r(Opcode::Add, 5, 5, 6).unwrap();
        for i in 0..100 {
            m.record(&retired(i, add));
        }
        assert_eq!(m.finish().cycles, 100);
    }

    #[test]
    fn rob_of_one_serializes() {
        let run = |rob| {
            let mut m = model(O3Config { rob_size: rob, ..Default::default() });
            for i in 0..64u64 {
                let rd = 5 + (i % 8) as u8;
                m.record(&retired(i, Instruction::r(Opcode::Mul, rd, 1, 2).unwrap()));
                m.record(&retired(i, Instruction::r(Opcode::Add, 20, 1, 2).unwrap()));
            }
            m.finish().cycles
        };
        assert!(run(1) > run(128));
    }

    #[test]
    fn unpipelined_divider_occupies_unit() {
        let mut m = model(O3Config::default());
        m.record(&retired(0, Instruction::r(Opcode::Div, 5, 1, 2).unwrap()));
        m.record(&retired(1, Instruction::r(Opcode::Div, 6, 1, 2).unwrap()));
        assert_eq!(m.finish().cycles, 40);
    }

    #[test]
    fn load_waits_for_overlapping_store() {
        let sd = Instruction::s(Opcode::Sd, 2, 1, 0).unwrap();
        let lw = Instruction::i(Opcode::Lw, 5, 1, 4).unwrap();
        let run = |load_addr: u64| {
            // warm the line so both accesses hit
            let mut mem = MemoryHierarchy::default();
            mem.access(0x8000, crate::memhier::AccessKind::Read);
            let cfg = O3Config { perfect_icache: true, ..Default::default() };
            let mut m = O3Model::new(cfg, mem);
            let mul = Instruction::r(Opcode::Mul, 2, 3, 3).unwrap();
            m.record(&retired(1, mul));
            let st = MemAccess { addr: 0x8000, size: 8, is_write: true };
            m.record(&Retired { seq: 2, pc: 0x1008, instr: sd, next_pc: 0x100c, mem: Some(st) });
            let ld = MemAccess { addr: load_addr, size: 4, is_write: false };
            m.record(&Retired { seq: 3, pc: 0x100c, instr: lw, next_pc: 0x1010, mem: Some(ld) });
            m.finish().cycles
        };
        // the store waits on the multiply; an aliasing load waits on the store
        let alias = run(0x8004);
        let disjoint = run(0x8008);
        assert!(alias > disjoint, "{alias} vs {disjoint}");
    }
}
