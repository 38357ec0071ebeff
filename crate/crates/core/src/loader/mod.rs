//! Memory images, ELF ingestion, the assembler, and exit conventions.

pub mod asm;
mod elf;
mod exit;
mod image;

pub use asm::{assemble, assemble_at, AsmError, AsmErrorKind, Assembled};
pub use elf::{load_elf, write_elf, ElfError, EM_RISCV};
pub use exit::{exit_check, ExitMonitor, EXIT_SYSCALL};
pub use image::{ImageError, MemoryImage, Region, Segment, TOHOST};
