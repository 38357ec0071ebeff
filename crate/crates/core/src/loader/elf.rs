//! Minimal ELF64 ingestion (static little-endian RISC-V executables only).

use super::image::{ImageError, MemoryImage, Segment};
use thiserror::Error;

pub const EM_RISCV: u16 = 243;
const ET_EXEC: u16 = 2;
const PT_LOAD: u32 = 1;
const SHT_SYMTAB: u32 = 2;
const PF_X: u32 = 1;
const PF_W: u32 = 2;
const EHDR_SIZE: usize = 64;
const PHDR_SIZE: usize = 56;
const SHDR_SIZE: usize = 64;
const SYM_SIZE: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ElfError {
    #[error("not an ELF file")]
    BadMagic,
    #[error("not a 64-bit little-endian ELF")]
    WrongClass,
    #[error("machine {0} is not RISC-V (243)")]
    WrongMachine(u16),
    #[error("ELF type {0} is not a static executable")]
    UnsupportedType(u16),
    #[error("file truncated: {what} at offset {offset:#x}")]
    Truncated { what: &'static str, offset: u64 },
    #[error(transparent)]
    Image(#[from] ImageError),
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn bytes(&self, off: u64, len: u64, what: &'static str) -> Result<&[u8], ElfError> {
        let end = off.checked_add(len).filter(|&e| e <= self.0.len() as u64);
        match end {
            Some(end) => Ok(&self.0[off as usize..end as usize]),
            None => Err(ElfError::Truncated { what, offset: off }),
        }
    }
    fn u16(&self, off: u64) -> u16 {
        u16::from_le_bytes(self.0[off as usize..off as usize + 2].try_into().unwrap())
    }
    fn u32(&self, off: u64) -> u32 {
        u32::from_le_bytes(self.0[off as usize..off as usize + 4].try_into().unwrap())
    }
    fn u64(&self, off: u64) -> u64 {
        u64::from_le_bytes(self.0[off as usize..off as usize + 8].try_into().unwrap())
    }
}

/// Parses a static RV64 executable into a memory image.
///
/// All `PT_LOAD` segments are mapped; named symbols from `.symtab` (if
/// present) are recorded, which is where `tohost` is picked up.
pub fn load_elf(bytes: &[u8]) -> Result<MemoryImage, ElfError> {
    if bytes.len() < 4 || bytes[..4] != [0x7f, b'E', b'L', b'F'] {
        return Err(ElfError::BadMagic);
    }
    let r = Reader(bytes);
    r.bytes(0, EHDR_SIZE as u64, "ELF header")?;
    if bytes[4] != 2 || bytes[5] != 1 {
        return Err(ElfError::WrongClass);
    }
    let machine = r.u16(18);
    if machine != EM_RISCV {
        return Err(ElfError::WrongMachine(machine));
    }
    let etype = r.u16(16);
    if etype != ET_EXEC {
        return Err(ElfError::UnsupportedType(etype));
    }
    let entry = r.u64(24);
    let phoff = r.u64(32);
    let shoff = r.u64(40);
    let phentsize = r.u16(54) as u64;
    let phnum = r.u16(56) as u64;
    let shentsize = r.u16(58) as u64;
    let shnum = r.u16(60) as u64;

    let mut image = MemoryImage::new(entry);
    for i in 0..phnum {
        let ph = phoff + i * phentsize;
        r.bytes(ph, PHDR_SIZE as u64, "program header")?;
        if r.u32(ph) != PT_LOAD {
            continue;
        }
        let flags = r.u32(ph + 4);
        let offset = r.u64(ph + 8);
        let vaddr = r.u64(ph + 16);
        let filesz = r.u64(ph + 32);
        let memsz = r.u64(ph + 40);
        let data = r.bytes(offset, filesz, "segment contents")?.to_vec();
        image.add_segment(Segment {
            base: vaddr,
            bytes: data,
            mem_size: memsz.max(filesz),
            writable: flags & PF_W != 0,
            executable: flags & PF_X != 0,
        })?;
    }

    if shoff != 0 && shentsize as usize == SHDR_SIZE {
        r.bytes(shoff, shnum * shentsize, "section headers")?;
        for i in 0..shnum {
            let sh = shoff + i * shentsize;
            if r.u32(sh + 4) != SHT_SYMTAB {
                continue;
            }
            let off = r.u64(sh + 24);
            let size = r.u64(sh + 32);
            let link = r.u32(sh + 40) as u64;
            if link >= shnum {
                continue;
            }
            let strsh = shoff + link * shentsize;
            let strtab = r.bytes(r.u64(strsh + 24), r.u64(strsh + 32), "string table")?;
            r.bytes(off, size, "symbol table")?;
            for s in 0..size / SYM_SIZE as u64 {
                let sym = off + s * SYM_SIZE as u64;
                let name = r.u32(sym) as usize;
                let value = r.u64(sym + 8);
                if name == 0 || name >= strtab.len() {
                    continue;
                }
                let end = strtab[name..].iter().position(|&b| b == 0).map_or(strtab.len(), |p| name + p);
                if let Ok(n) = std::str::from_utf8(&strtab[name..end]) {
                    if !n.is_empty() {
                        image.symbols.entry(n.to_string()).or_insert(value);
                    }
                }
            }
        }
    }
    Ok(image)
}

/// Serializes an image as a static RV64 executable with one `PT_LOAD` per
/// segment and a symbol table carrying `image.symbols`.
pub fn write_elf(image: &MemoryImage) -> Vec<u8> {
    let phnum = image.segments.len();
    let mut out = vec![0u8; EHDR_SIZE + phnum * PHDR_SIZE];
    let mut offsets = Vec::with_capacity(phnum);
    for seg in &image.segments {
        // keep file offset congruent to vaddr modulo the page size
        let want = (seg.base % 4096) as usize;
        let pad = (want + 4096 - out.len() % 4096) % 4096;
        out.resize(out.len() + pad, 0);
        offsets.push(out.len() as u64);
        out.extend_from_slice(&seg.bytes);
    }

    // symbol table: null symbol, then one global per entry
    let mut strtab = vec![0u8];
    let mut symtab = vec![0u8; SYM_SIZE];
    for (name, &value) in &image.symbols {
        let mut sym = [0u8; SYM_SIZE];
        sym[..4].copy_from_slice(&(strtab.len() as u32).to_le_bytes());
        sym[4] = 0x10; // STB_GLOBAL, STT_NOTYPE
        sym[6..8].copy_from_slice(&0xfff1u16.to_le_bytes()); // SHN_ABS
        sym[8..16].copy_from_slice(&value.to_le_bytes());
        symtab.extend_from_slice(&sym);
        strtab.extend_from_slice(name.as_bytes());
        strtab.push(0);
    }
    let shstrtab = b"\0.symtab\0.strtab\0.shstrtab\0";
    out.resize(out.len().next_multiple_of(8), 0);
    let symtab_off = out.len() as u64;
    out.extend_from_slice(&symtab);
    let strtab_off = out.len() as u64;
    out.extend_from_slice(&strtab);
    let shstr_off = out.len() as u64;
    out.extend_from_slice(shstrtab);
    out.resize(out.len().next_multiple_of(8), 0);
    let shoff = out.len() as u64;

    let mut shdr = |name: u32, ty: u32, off: u64, size: u64, link: u32, entsize: u64| {
        let mut h = [0u8; SHDR_SIZE];
        h[..4].copy_from_slice(&name.to_le_bytes());
        h[4..8].copy_from_slice(&ty.to_le_bytes());
        h[24..32].copy_from_slice(&off.to_le_bytes());
        h[32..40].copy_from_slice(&size.to_le_bytes());
        h[40..44].copy_from_slice(&link.to_le_bytes());
        if ty == SHT_SYMTAB {
            h[44..48].copy_from_slice(&1u32.to_le_bytes()); // first global
        }
        h[48..56].copy_from_slice(&1u64.to_le_bytes());
        h[56..64].copy_from_slice(&entsize.to_le_bytes());
        out.extend_from_slice(&h);
    };
    shdr(0, 0, 0, 0, 0, 0);
    shdr(1, SHT_SYMTAB, symtab_off, symtab.len() as u64, 2, SYM_SIZE as u64);
    shdr(9, 3, strtab_off, strtab.len() as u64, 0, 0);
    shdr(17, 3, shstr_off, shstrtab.len() as u64, 0, 0);

    let h = &mut out[..EHDR_SIZE];
    h[..4].copy_from_slice(&[0x7f, b'E', b'L', b'F']);
    h[4] = 2; // ELFCLASS64
    h[5] = 1; // little-endian
    h[6] = 1; // EV_CURRENT
    h[16..18].copy_from_slice(&ET_EXEC.to_le_bytes());
    h[18..20].copy_from_slice(&EM_RISCV.to_le_bytes());
    h[20..24].copy_from_slice(&1u32.to_le_bytes());
    h[24..32].copy_from_slice(&image.entry.to_le_bytes());
    h[32..40].copy_from_slice(&(EHDR_SIZE as u64).to_le_bytes());
    h[40..48].copy_from_slice(&shoff.to_le_bytes());
    h[48..52].copy_from_slice(&4u32.to_le_bytes()); // EF_RISCV_FLOAT_ABI_DOUBLE
    h[52..54].copy_from_slice(&(EHDR_SIZE as u16).to_le_bytes());
    h[54..56].copy_from_slice(&(PHDR_SIZE as u16).to_le_bytes());
    h[56..58].copy_from_slice(&(phnum as u16).to_le_bytes());
    h[58..60].copy_from_slice(&(SHDR_SIZE as u16).to_le_bytes());
    h[60..62].copy_from_slice(&4u16.to_le_bytes());
    h[62..64].copy_from_slice(&3u16.to_le_bytes());

    for (i, (seg, off)) in image.segments.iter().zip(offsets).enumerate() {
        let p = &mut out[EHDR_SIZE + i * PHDR_SIZE..EHDR_SIZE + (i + 1) * PHDR_SIZE];
        let flags = 4 | if seg.writable { PF_W } else { 0 } | if seg.executable { PF_X } else { 0 };
        p[..4].copy_from_slice(&PT_LOAD.to_le_bytes());
        p[4..8].copy_from_slice(&flags.to_le_bytes());
        p[8..16].copy_from_slice(&off.to_le_bytes());
        p[16..24].copy_from_slice(&seg.base.to_le_bytes());
        p[24..32].copy_from_slice(&seg.base.to_le_bytes());
        p[32..40].copy_from_slice(&(seg.bytes.len() as u64).to_le_bytes());
        p[40..48].copy_from_slice(&seg.mem_size.to_le_bytes());
        p[48..56].copy_from_slice(&4096u64.to_le_bytes());
    }
    out
}
