//! Brute-force cache model: each set is a list ordered LRU-first.
//! Deliberately shares no code with `rvmb_core::memhier`.

use std::collections::HashMap;

#[derive(Default, Debug, Clone, Copy, PartialEq, Eq)]
pub struct Counts {
    pub accesses: u64,
    pub misses: u64,
    pub writebacks: u64,
}

pub struct OracleLevel {
    sets: u64,
    ways: usize,
    line: u64,
    lists: HashMap<u64, Vec<(u64, bool)>>,
    pub counts: Counts,
}

impl OracleLevel {
    pub fn new(size: u64, ways: usize, line: u64) -> Self {
        OracleLevel { sets: size / (ways as u64 * line), ways, line, lists: HashMap::new(), counts: Counts::default() }
    }

    /// Returns (hit, dirty victim line address).
    pub fn access(&mut self, addr: u64, write: bool) -> (bool, Option<u64>) {
        let tag = addr / self.line;
        let list = self.lists.entry(tag % self.sets).or_default();
        self.counts.accesses += 1;
        if let Some(pos) = list.iter().position(|(t, _)| *t == tag) {
            let (t, d) = list.remove(pos);
            list.push((t, d || write));
            return (true, None);
        }
        self.counts.misses += 1;
        let mut victim = None;
        if list.len() == self.ways {
            let (t, d) = list.remove(0);
            if d {
                self.counts.writebacks += 1;
                victim = Some(t * self.line);
            }
        }
        list.push((tag, write));
        (false, victim)
    }

    pub fn mark_dirty(&mut self, addr: u64) {
        let tag = addr / self.line;
        if let Some(list) = self.lists.get_mut(&(tag % self.sets)) {
            if let Some(e) = list.iter_mut().find(|(t, _)| *t == tag) {
                e.1 = true;
            }
        }
    }
}

pub struct OracleHierarchy {
    pub l1i: OracleLevel,
    pub l1d: OracleLevel,
    pub l2: OracleLevel,
}

pub const IFETCH: u8 = 0;
pub const READ: u8 = 1;
pub const WRITE: u8 = 2;

impl OracleHierarchy {
    /// 64 KiB 4-way split L1, 8 MiB 4-way L2, 64-byte lines.
    pub fn default_geometry() -> Self {
        OracleHierarchy {
            l1i: OracleLevel::new(64 * 1024, 4, 64),
            l1d: OracleLevel::new(64 * 1024, 4, 64),
            l2: OracleLevel::new(8 * 1024 * 1024, 4, 64),
        }
    }

    pub fn access(&mut self, addr: u64, kind: u8) {
        let l1 = if kind == IFETCH { &mut self.l1i } else { &mut self.l1d };
        let (hit, victim) = l1.access(addr, kind == WRITE);
        if hit {
            return;
        }
        if let Some(v) = victim {
            self.l2.mark_dirty(v);
        }
        self.l2.access(addr, false);
    }
}
