use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};
use thiserror::Error;

pub const PAGE_SIZE: u64 = 4096;
const PAGE_SHIFT: u32 = 12;

/// Byte-write console; stores here are recorded, not backed by memory.
pub const CONSOLE_ADDR: u64 = 0x1000_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MemError {
    #[error("unaligned {size}-byte access at {addr:#x}")]
    Unaligned { addr: u64, size: u8 },
    #[error("access to unmapped address {addr:#x}")]
    OutOfBounds { addr: u64 },
}

type Page = Box<[u8; PAGE_SIZE as usize]>;

/// Fibonacci hashing for page numbers; the default SipHash dominates the
/// cost of every simulated memory access.
#[derive(Default)]
struct PageHasher(u64);

impl Hasher for PageHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 = (self.0.rotate_left(8) ^ *b as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        }
    }

    fn write_u64(&mut self, v: u64) {
        self.0 = v.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    }
}

/// Sparse little-endian memory allocated in 4 KiB pages. Only pages that
/// were explicitly mapped are accessible.
#[derive(Clone, Default)]
pub struct Memory {
    index: HashMap<u64, usize, BuildHasherDefault<PageHasher>>,
    pages: Vec<Page>,
    page_numbers: Vec<u64>,
    console: Vec<u8>,
}

impl std::fmt::Debug for Memory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Memory").field("pages", &self.pages.len()).finish()
    }
}

impl Memory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Maps (zero-filled) every page overlapping `[base, base + len)`.
    pub fn map(&mut self, base: u64, len: u64) {
        if len == 0 {
            return;
        }
        let first = base >> PAGE_SHIFT;
        let last = (base + len - 1) >> PAGE_SHIFT;
        for pn in first..=last {
            if !self.index.contains_key(&pn) {
                self.index.insert(pn, self.pages.len());
                self.pages.push(Box::new([0; PAGE_SIZE as usize]));
                self.page_numbers.push(pn);
            }
        }
    }

    pub fn is_mapped(&self, addr: u64) -> bool {
        self.index.contains_key(&(addr >> PAGE_SHIFT))
    }

    pub fn mapped_bytes(&self) -> u64 {
        self.pages.len() as u64 * PAGE_SIZE
    }

    /// Copies bytes in, mapping pages as needed.
    pub fn write_bytes(&mut self, addr: u64, bytes: &[u8]) {
        self.map(addr, bytes.len() as u64);
        let mut a = addr;
        for chunk in split_pages(addr, bytes.len() as u64) {
            let page = self.page_mut(a).expect("just mapped");
            let off = (a % PAGE_SIZE) as usize;
            let start = (a - addr) as usize;
            page[off..off + chunk].copy_from_slice(&bytes[start..start + chunk]);
            a += chunk as u64;
        }
    }

    pub fn read_bytes(&self, addr: u64, len: u64) -> Result<Vec<u8>, MemError> {
        let mut out = Vec::with_capacity(len as usize);
        let mut a = addr;
        for chunk in split_pages(addr, len) {
            let page = self.page(a).ok_or(MemError::OutOfBounds { addr: a })?;
            let off = (a % PAGE_SIZE) as usize;
            out.extend_from_slice(&page[off..off + chunk]);
            a += chunk as u64;
        }
        Ok(out)
    }

    #[inline]
    fn page(&self, addr: u64) -> Option<&Page> {
        self.index.get(&(addr >> PAGE_SHIFT)).map(|&i| &self.pages[i])
    }

    #[inline]
    fn page_mut(&mut self, addr: u64) -> Option<&mut Page> {
        match self.index.get(&(addr >> PAGE_SHIFT)) {
            Some(&i) => Some(&mut self.pages[i]),
            None => None,
        }
    }

    /// Naturally aligned load of `size` ∈ {1, 2, 4, 8} bytes, zero-extended.
    #[inline]
    pub fn load(&self, addr: u64, size: u8) -> Result<u64, MemError> {
        if addr & (size as u64 - 1) != 0 {
            return Err(MemError::Unaligned { addr, size });
        }
        let page = self.page(addr).ok_or(MemError::OutOfBounds { addr })?;
        let off = (addr % PAGE_SIZE) as usize;
        let v = match size {
            1 => page[off] as u64,
            2 => u16::from_le_bytes([page[off], page[off + 1]]) as u64,
            4 => u32::from_le_bytes(page[off..off + 4].try_into().unwrap()) as u64,
            _ => u64::from_le_bytes(page[off..off + 8].try_into().unwrap()),
        };
        Ok(v)
    }

    #[inline]
    pub fn store(&mut self, addr: u64, size: u8, value: u64) -> Result<(), MemError> {
        if addr & (size as u64 - 1) != 0 {
            return Err(MemError::Unaligned { addr, size });
        }
        if addr == CONSOLE_ADDR && !self.is_mapped(addr) {
            self.console.push(value as u8);
            return Ok(());
        }
        let page = self.page_mut(addr).ok_or(MemError::OutOfBounds { addr })?;
        let off = (addr % PAGE_SIZE) as usize;
        let bytes = value.to_le_bytes();
        page[off..off + size as usize].copy_from_slice(&bytes[..size as usize]);
        Ok(())
    }

    pub fn load_u32(&self, addr: u64) -> Result<u32, MemError> {
        self.load(addr, 4).map(|v| v as u32)
    }

    /// Bytes written to the console address, in order.
    pub fn console(&self) -> &[u8] {
        &self.console
    }

    /// SHA-256 over all mapped pages in address order.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut order: Vec<usize> = (0..self.pages.len()).collect();
        order.sort_by_key(|&i| self.page_numbers[i]);
        let mut h = Sha256::new();
        for i in order {
            h.update(self.page_numbers[i].to_le_bytes());
            h.update(&self.pages[i][..]);
        }
        h.finalize().into()
    }
}

fn split_pages(addr: u64, len: u64) -> impl Iterator<Item = usize> {
    let mut a = addr;
    let end = addr + len;
    std::iter::from_fn(move || {
        if a >= end {
            return None;
        }
        let page_end = (a / PAGE_SIZE + 1) * PAGE_SIZE;
        let n = page_end.min(end) - a;
        a += n;
        Some(n as usize)
    })
}

/// Architectural state: registers, pc and memory. The dynamic rounding mode
/// is fixed to round-to-nearest-even and floating-point flags are not
/// modeled.
#[derive(Clone, Debug)]
pub struct ArchState {
    pub pc: u64,
    x: [u64; 32],
    /// FP registers as raw 64-bit patterns; singles are NaN-boxed.
    pub f: [u64; 32],
    pub mem: Memory,
}

impl ArchState {
    pub fn new(pc: u64, mem: Memory) -> Self {
        ArchState { pc, x: [0; 32], f: [0; 32], mem }
    }

    #[inline]
    pub fn x(&self, r: u8) -> u64 {
        self.x[r as usize]
    }

    /// Writes to x0 are discarded.
    #[inline]
    pub fn set_x(&mut self, r: u8, v: u64) {
        if r != 0 {
            self.x[r as usize] = v;
        }
    }

    pub fn xregs(&self) -> &[u64; 32] {
        &self.x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unmapped_reads_fail() {
        let mem = Memory::new();
        assert_eq!(mem.load(0x1000, 4), Err(MemError::OutOfBounds { addr: 0x1000 }));
    }

    #[test]
    fn alignment_is_enforced() {
        let mut mem = Memory::new();
        mem.map(0x1000, 16);
        assert_eq!(mem.load(0x1002, 4), Err(MemError::Unaligned { addr: 0x1002, size: 4 }));
        assert!(mem.store(0x1001, 2, 0).is_err());
        assert!(mem.load(0x1003, 1).is_ok());
    }

    #[test]
    fn little_endian_round_trip_across_pages() {
        let mut mem = Memory::new();
        let data: Vec<u8> = (0..10_000u32).map(|i| i as u8).collect();
        mem.write_bytes(0x1ff0, &data);
        assert_eq!(mem.read_bytes(0x1ff0, 10_000).unwrap(), data);
        mem.store(0x2000, 8, 0x0102_0304_0506_0708).unwrap();
        assert_eq!(mem.load(0x2000, 1).unwrap(), 0x08);
        assert_eq!(mem.load(0x2000, 4).unwrap(), 0x0506_0708);
    }

    #[test]
    fn console_records_bytes() {
        let mut mem = Memory::new();
        mem.store(CONSOLE_ADDR, 1, b'h' as u64).unwrap();
        mem.store(CONSOLE_ADDR, 1, b'i' as u64).unwrap();
        assert_eq!(mem.console(), b"hi");
        assert!(mem.load(CONSOLE_ADDR, 1).is_err());
    }

    #[test]
    fn x0_discards_writes() {
        let mut st = ArchState::new(0, Memory::new());
        st.set_x(0, 7);
        assert_eq!(st.x(0), 0);
    }
}
