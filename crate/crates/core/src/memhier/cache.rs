use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CacheConfigError {
    #[error("{0}: size, ways, line and hit latency must be nonzero")]
    Zero(&'static str),
    #[error("{0}: size is not a multiple of ways x line")]
    Indivisible(&'static str),
    #[error("{0}: set count {1} is not a power of two")]
    SetsNotPow2(&'static str, u64),
    #[error("{0}: line size {1} is not a power of two")]
    LineNotPow2(&'static str, u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheConfig {
    pub size: u64,
    pub ways: u32,
    pub line: u64,
    pub hit_latency: u32,
}

impl CacheConfig {
    pub const fn new(size: u64, ways: u32, hit_latency: u32) -> Self {
        CacheConfig { size, ways, line: 64, hit_latency }
    }

    pub fn sets(&self) -> u64 {
        self.size / (self.ways as u64 * self.line)
    }

    pub fn validate(&self, name: &'static str) -> Result<(), CacheConfigError> {
        if self.size == 0 || self.ways == 0 || self.line == 0 || self.hit_latency == 0 {
            return Err(CacheConfigError::Zero(name));
        }
        if !self.line.is_power_of_two() {
            return Err(CacheConfigError::LineNotPow2(name, self.line));
        }
        if self.size % (self.ways as u64 * self.line) != 0 {
            return Err(CacheConfigError::Indivisible(name));
        }
        let sets = self.sets();
        if !sets.is_power_of_two() {
            return Err(CacheConfigError::SetsNotPow2(name, sets));
        }
        Ok(())
    }
}

/// Counters of one cache level.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LevelStats {
    pub accesses: u64,
    pub misses: u64,
    pub evictions: u64,
    pub writebacks: u64,
}

impl LevelStats {
    pub fn hits(&self) -> u64 {
        self.accesses - self.misses
    }

    pub fn miss_rate(&self) -> f64 {
        if self.accesses == 0 {
            0.0
        } else {
            self.misses as f64 / self.accesses as f64
        }
    }
}

/// Result of a single-level lookup.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Lookup {
    pub hit: bool,
    /// Line address of a dirty victim that must be written back.
    pub writeback: Option<u64>,
}

const INVALID: u64 = u64::MAX;

/// One set-associative, write-allocate, write-back level with strict LRU.
#[derive(Clone, Debug)]
pub struct Cache {
    config: CacheConfig,
    line_shift: u32,
    set_mask: u64,
    ways: usize,
    // per (set, way): line address (addr >> line_shift) or INVALID
    tags: Vec<u64>,
    stamps: Vec<u64>,
    dirty: Vec<bool>,
    clock: u64,
    stats: LevelStats,
}

impl Cache {
    /// `config` must have passed [`CacheConfig::validate`].
    pub fn new(config: CacheConfig) -> Self {
        let sets = config.sets();
        let n = (sets * config.ways as u64) as usize;
        Cache {
            config,
            line_shift: config.line.trailing_zeros(),
            set_mask: sets - 1,
            ways: config.ways as usize,
            tags: vec![INVALID; n],
            stamps: vec![0; n],
            dirty: vec![false; n],
            clock: 0,
            stats: LevelStats::default(),
        }
    }

    pub fn config(&self) -> &CacheConfig {
        &self.config
    }

    pub fn stats(&self) -> LevelStats {
        self.stats
    }

    #[inline]
    pub fn line_of(&self, addr: u64) -> u64 {
        addr >> self.line_shift
    }

    #[inline]
    fn set_range(&self, line: u64) -> std::ops::Range<usize> {
        let set = (line & self.set_mask) as usize;
        set * self.ways..(set + 1) * self.ways
    }

    /// Accesses the line holding `addr`, allocating it on a miss.
    #[inline]
    pub fn access(&mut self, addr: u64, write: bool) -> Lookup {
        let line = self.line_of(addr);
        let range = self.set_range(line);
        self.clock += 1;
        self.stats.accesses += 1;

        let set = &self.tags[range.clone()];
        if let Some(w) = set.iter().position(|&t| t == line) {
            let i = range.start + w;
            self.stamps[i] = self.clock;
            self.dirty[i] |= write;
            return Lookup { hit: true, writeback: None };
        }

        self.stats.misses += 1;
        let victim = match set.iter().position(|&t| t == INVALID) {
            Some(w) => range.start + w,
            None => {
                let stamps = &self.stamps[range.clone()];
                let w = (0..self.ways).min_by_key(|&w| stamps[w]).unwrap();
                range.start + w
            }
        };
        let mut writeback = None;
        if self.tags[victim] != INVALID {
            self.stats.evictions += 1;
            if self.dirty[victim] {
                self.stats.writebacks += 1;
                writeback = Some(self.tags[victim] << self.line_shift);
            }
        }
        self.tags[victim] = line;
        self.stamps[victim] = self.clock;
        self.dirty[victim] = write;
        Lookup { hit: false, writeback }
    }

    /// Marks a resident line dirty without touching LRU state or counters.
    /// Returns whether the line was present.
    pub fn absorb_writeback(&mut self, addr: u64) -> bool {
        let line = self.line_of(addr);
        let range = self.set_range(line);
        match self.tags[range.clone()].iter().position(|&t| t == line) {
            Some(w) => {
                self.dirty[range.start + w] = true;
                true
            }
            None => false,
        }
    }

    pub fn contains(&self, addr: u64) -> bool {
        let line = self.line_of(addr);
        self.tags[self.set_range(line)].contains(&line)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_validation() {
        assert!(CacheConfig::new(64 * 1024, 4, 2).validate("l1").is_ok());
        assert_eq!(CacheConfig::new(64 * 1024, 4, 2).sets(), 256);
        assert_eq!(CacheConfig::new(8 << 20, 4, 12).sets(), 32768);
        assert!(matches!(
            CacheConfig::new(3 * 4 * 64, 4, 2).validate("x"),
            Err(CacheConfigError::SetsNotPow2("x", 3))
        ));
        assert!(CacheConfig::new(1000, 4, 2).validate("x").is_err());
        assert!(CacheConfig::new(1024, 0, 2).validate("x").is_err());
    }

    #[test]
    fn lru_thrash_with_five_lines_in_four_ways() {
        let cfg = CacheConfig::new(4 * 64 * 4, 4, 1); // 4 sets
        let mut c = Cache::new(cfg);
        let stride = cfg.sets() * cfg.line;
        for _ in 0..2 {
            for k in 0..5 {
                c.access(k * stride, false);
            }
        }
        assert_eq!(c.stats().misses, 10);
    }

    #[test]
    fn lru_keeps_recently_used() {
        let cfg = CacheConfig::new(4 * 64, 4, 1); // one set
        let mut c = Cache::new(cfg);
        for k in 0..4 {
            c.access(k * 64, false);
        }
        c.access(0, false); // 0 becomes MRU; 64 is LRU
        c.access(4 * 64, false);
        assert!(c.contains(0));
        assert!(!c.contains(64));
    }

    #[test]
    fn dirty_victim_reports_writeback() {
        let mut c = Cache::new(CacheConfig::new(64, 1, 1));
        c.access(0x100, true);
        let l = c.access(0x200, false);
        assert_eq!(l.writeback, Some(0x100));
        let l = c.access(0x300, false);
        assert_eq!(l.writeback, None);
        let s = c.stats();
        assert_eq!((s.accesses, s.misses, s.evictions, s.writebacks), (3, 3, 2, 1));
    }
}
