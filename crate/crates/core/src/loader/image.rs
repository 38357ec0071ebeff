use crate::isa::Memory;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Symbol the HTIF exit convention writes to.
pub const TOHOST: &str = "tohost";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub base: u64,
    pub bytes: Vec<u8>,
    /// Mapped size; bytes past `bytes.len()` are zero-filled.
    pub mem_size: u64,
    pub writable: bool,
    pub executable: bool,
}

impl Segment {
    pub fn end(&self) -> u64 {
        self.base + self.mem_size
    }

    pub fn contains(&self, addr: u64) -> bool {
        (self.base..self.end()).contains(&addr)
    }
}

/// Contiguous address range, e.g. the output tensor of a lowered program.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub addr: u64,
    pub len: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ImageError {
    #[error("segment at {new:#x} overlaps segment at {existing:#x}")]
    OverlappingSegments { existing: u64, new: u64 },
    #[error("entry {0:#x} is not inside an executable segment")]
    EntryNotExecutable(u64),
    #[error("segment at {0:#x} has mem_size smaller than its contents")]
    BadSegment(u64),
}

/// Initial memory contents and metadata of a program.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryImage {
    pub segments: Vec<Segment>,
    pub entry: u64,
    pub symbols: BTreeMap<String, u64>,
    /// Region whose final contents make up the functional result.
    pub output: Option<Region>,
}

impl MemoryImage {
    pub fn new(entry: u64) -> Self {
        MemoryImage { entry, ..Default::default() }
    }

    pub fn add_segment(&mut self, seg: Segment) -> Result<(), ImageError> {
        if seg.mem_size < seg.bytes.len() as u64 {
            return Err(ImageError::BadSegment(seg.base));
        }
        if seg.mem_size == 0 {
            return Ok(());
        }
        if let Some(existing) =
            self.segments.iter().find(|s| seg.base < s.end() && s.base < seg.end())
        {
            return Err(ImageError::OverlappingSegments { existing: existing.base, new: seg.base });
        }
        self.segments.push(seg);
        Ok(())
    }

    pub fn add_code(&mut self, base: u64, bytes: Vec<u8>) -> Result<(), ImageError> {
        let mem_size = bytes.len() as u64;
        self.add_segment(Segment { base, bytes, mem_size, writable: false, executable: true })
    }

    pub fn add_data(&mut self, base: u64, bytes: Vec<u8>, mem_size: u64) -> Result<(), ImageError> {
        self.add_segment(Segment { base, bytes, mem_size, writable: true, executable: false })
    }

    pub fn tohost(&self) -> Option<u64> {
        self.symbols.get(TOHOST).copied()
    }

    pub fn validate(&self) -> Result<(), ImageError> {
        if !self.segments.iter().any(|s| s.executable && s.contains(self.entry)) {
            return Err(ImageError::EntryNotExecutable(self.entry));
        }
        Ok(())
    }

    /// Builds the initial sparse memory.
    pub fn to_memory(&self) -> Memory {
        let mut mem = Memory::new();
        for seg in &self.segments {
            mem.map(seg.base, seg.mem_size);
            mem.write_bytes(seg.base, &seg.bytes);
        }
        mem
    }

    /// Overwrites bytes inside existing segments (e.g. to bind an input tensor).
    pub fn patch(&mut self, addr: u64, data: &[u8]) -> bool {
        for seg in &mut self.segments {
            if seg.contains(addr) && addr + data.len() as u64 <= seg.end() {
                let off = (addr - seg.base) as usize;
                let need = off + data.len();
                if seg.bytes.len() < need {
                    seg.bytes.resize(need, 0);
                }
                seg.bytes[off..need].copy_from_slice(data);
                return true;
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlapping_segments_rejected() {
        let mut img = MemoryImage::new(0x1000);
        img.add_code(0x1000, vec![0; 0x100]).unwrap();
        let err = img.add_data(0x10f0, vec![], 0x20).unwrap_err();
        assert_eq!(err, ImageError::OverlappingSegments { existing: 0x1000, new: 0x10f0 });
        img.add_data(0x1100, vec![], 0x20).unwrap();
    }

    #[test]
    fn entry_must_be_executable() {
        let mut img = MemoryImage::new(0x2000);
        img.add_code(0x1000, vec![0; 16]).unwrap();
        assert!(img.validate().is_err());
        img.entry = 0x1004;
        assert!(img.validate().is_ok());
    }

    #[test]
    fn patch_writes_inside_segment() {
        let mut img = MemoryImage::new(0);
        img.add_data(0x100, vec![], 64).unwrap();
        assert!(img.patch(0x110, &[1, 2, 3]));
        assert!(!img.patch(0x13f, &[1, 2]));
        let mem = img.to_memory();
        assert_eq!(mem.load(0x111, 1).unwrap(), 2);
    }
}
