use crate::isa::InstrClass;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::ops::Index;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuLatency {
    pub latency: u32,
    pub pipelined: bool,
}

const fn fu(latency: u32, pipelined: bool) -> FuLatency {
    FuLatency { latency, pipelined }
}

/// Execution latency per instruction class. For loads and stores the entry
/// is the address-generation cycle; the memory hierarchy's latency is added
/// on top.
///
/// Serialized as a map keyed by class name; missing classes keep their
/// defaults, so configs can override single entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "BTreeMap<InstrClass, FuLatency>", into = "BTreeMap<InstrClass, FuLatency>")]
pub struct LatencyTable(pub [FuLatency; InstrClass::COUNT]);

impl Default for LatencyTable {
    fn default() -> Self {
        use InstrClass::*;
        let mut t = [fu(1, true); InstrClass::COUNT];
        for (c, e) in [
            (IntAlu, fu(1, true)),
            (IntMult, fu(10, false)),
            (IntDiv, fu(20, false)),
            (MemRead, fu(1, true)),
            (MemWrite, fu(1, true)),
            (FloatAdd, fu(4, true)),
            (FloatMult, fu(4, true)),
            (FloatMultAcc, fu(5, true)),
            (FloatDiv, fu(12, false)),
            (FloatMisc, fu(2, true)),
            (Branch, fu(1, true)),
            (Jump, fu(1, true)),
            (Other, fu(1, true)),
        ] {
            t[c.index()] = e;
        }
        LatencyTable(t)
    }
}

impl LatencyTable {
    pub fn set(&mut self, class: InstrClass, entry: FuLatency) {
        self.0[class.index()] = entry;
    }

    pub fn validate(&self) -> Result<(), InstrClass> {
        match InstrClass::ALL.iter().find(|c| self.0[c.index()].latency == 0) {
            Some(c) => Err(*c),
            None => Ok(()),
        }
    }
}

impl Index<InstrClass> for LatencyTable {
    type Output = FuLatency;
    #[inline]
    fn index(&self, c: InstrClass) -> &FuLatency {
        &self.0[c.index()]
    }
}

impl From<BTreeMap<InstrClass, FuLatency>> for LatencyTable {
    fn from(m: BTreeMap<InstrClass, FuLatency>) -> Self {
        let mut t = LatencyTable::default();
        for (c, e) in m {
            t.set(c, e);
        }
        t
    }
}

impl From<LatencyTable> for BTreeMap<InstrClass, FuLatency> {
    fn from(t: LatencyTable) -> Self {
        InstrClass::ALL.iter().map(|c| (*c, t[*c])).collect()
    }
}
