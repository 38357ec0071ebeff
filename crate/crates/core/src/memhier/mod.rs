//! Two-level write-back cache hierarchy over fixed-latency DRAM.

mod cache;

pub use cache::{Cache, CacheConfig, CacheConfigError, LevelStats, Lookup};

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessKind {
    IFetch,
    Read,
    Write,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    L1I,
    L1D,
    L2,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::L1I => "l1i",
            Level::L1D => "l1d",
            Level::L2 => "l2",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HierarchyConfig {
    pub l1i: CacheConfig,
    pub l1d: CacheConfig,
    pub l2: CacheConfig,
    pub dram_latency: u32,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        HierarchyConfig {
            l1i: CacheConfig::new(64 << 10, 4, 2),
            l1d: CacheConfig::new(64 << 10, 4, 2),
            l2: CacheConfig::new(8 << 20, 4, 12),
            dram_latency: 100,
        }
    }
}

impl HierarchyConfig {
    pub fn validate(&self) -> Result<(), CacheConfigError> {
        self.l1i.validate("l1i")?;
        self.l1d.validate("l1d")?;
        self.l2.validate("l2")?;
        if self.l1i.line != self.l2.line || self.l1d.line != self.l2.line {
            return Err(CacheConfigError::Indivisible("line sizes differ between levels"));
        }
        if self.dram_latency == 0 {
            return Err(CacheConfigError::Zero("dram"));
        }
        Ok(())
    }
}

/// Immutable copy of all counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CacheStats {
    pub l1i: LevelStats,
    pub l1d: LevelStats,
    pub l2: LevelStats,
}

impl CacheStats {
    pub fn level(&self, level: Level) -> &LevelStats {
        match level {
            Level::L1I => &self.l1i,
            Level::L1D => &self.l1d,
            Level::L2 => &self.l2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MpkiError {
    #[error("MPKI over zero committed instructions")]
    ZeroInstructions,
}

/// Misses per thousand committed instructions at `level`.
pub fn mpki(stats: &CacheStats, level: Level, committed: u64) -> Result<f64, MpkiError> {
    if committed == 0 {
        return Err(MpkiError::ZeroInstructions);
    }
    Ok(stats.level(level).misses as f64 * 1000.0 / committed as f64)
}

/// Split L1 over a shared L2. Every L1 miss is one L2 access; dirty L1
/// victims are absorbed into L2 without counting as accesses.
#[derive(Clone, Debug)]
pub struct MemoryHierarchy {
    config: HierarchyConfig,
    l1i: Cache,
    l1d: Cache,
    l2: Cache,
}

impl MemoryHierarchy {
    pub fn new(config: HierarchyConfig) -> Result<Self, CacheConfigError> {
        config.validate()?;
        Ok(MemoryHierarchy {
            config,
            l1i: Cache::new(config.l1i),
            l1d: Cache::new(config.l1d),
            l2: Cache::new(config.l2),
        })
    }

    pub fn config(&self) -> &HierarchyConfig {
        &self.config
    }

    /// Performs one access and returns its latency in core cycles.
    #[inline]
    pub fn access(&mut self, addr: u64, kind: AccessKind) -> u32 {
        let (l1, write) = match kind {
            AccessKind::IFetch => (&mut self.l1i, false),
            AccessKind::Read => (&mut self.l1d, false),
            AccessKind::Write => (&mut self.l1d, true),
        };
        let mut latency = l1.config().hit_latency;
        let r1 = l1.access(addr, write);
        if r1.hit {
            return latency;
        }
        if let Some(victim) = r1.writeback {
            self.l2.absorb_writeback(victim);
        }
        latency += self.config.l2.hit_latency;
        if !self.l2.access(addr, false).hit {
            latency += self.config.dram_latency;
        }
        latency
    }

    /// Latency of an L1 hit for `kind`.
    pub fn l1_hit_latency(&self, kind: AccessKind) -> u32 {
        match kind {
            AccessKind::IFetch => self.config.l1i.hit_latency,
            _ => self.config.l1d.hit_latency,
        }
    }

    pub fn line_size(&self) -> u64 {
        self.config.l2.line
    }

    pub fn snapshot(&self) -> CacheStats {
        CacheStats { l1i: self.l1i.stats(), l1d: self.l1d.stats(), l2: self.l2.stats() }
    }
}

impl Default for MemoryHierarchy {
    fn default() -> Self {
        MemoryHierarchy::new(HierarchyConfig::default()).expect("default geometry is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cold_then_warm_read() {
        let mut h = MemoryHierarchy::default();
        assert_eq!(h.access(0x8000, AccessKind::Read), 114);
        assert_eq!(h.access(0x8008, AccessKind::Read), 2);
        assert_eq!(h.access(0x8000, AccessKind::IFetch), 14); // L2 now has it
    }

    #[test]
    fn l2_accesses_equal_l1_misses() {
        let mut h = MemoryHierarchy::default();
        for i in 0..100_000u64 {
            let a = i.wrapping_mul(0x9e37_79b9) % (1 << 24);
            let kind = [AccessKind::Read, AccessKind::Write, AccessKind::IFetch][(i % 3) as usize];
            h.access(a & !7, kind);
        }
        let s = h.snapshot();
        assert_eq!(s.l2.accesses, s.l1i.misses + s.l1d.misses);
        assert!(s.l1d.writebacks > 0);
    }

    #[test]
    fn snapshot_is_a_copy() {
        let mut h = MemoryHierarchy::default();
        let before = h.snapshot();
        assert_eq!(before, CacheStats::default());
        h.access(0, AccessKind::Read);
        assert_eq!(before, CacheStats::default());
        assert_eq!(h.snapshot().l1d.accesses, 1);
    }

    #[test]
    fn mpki_definition() {
        let mut s = CacheStats::default();
        s.l2.misses = 50;
        assert_eq!(mpki(&s, Level::L2, 100_000), Ok(0.5));
        assert_eq!(mpki(&s, Level::L2, 0), Err(MpkiError::ZeroInstructions));
    }

    #[test]
    fn config_round_trips_through_json() {
        let c = HierarchyConfig::default();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<HierarchyConfig>(&s).unwrap(), c);
        let partial: HierarchyConfig = serde_json::from_str(r#"{"dram_latency": 50}"#).unwrap();
        assert_eq!(partial.l2, c.l2);
        assert_eq!(partial.dram_latency, 50);
    }
}
