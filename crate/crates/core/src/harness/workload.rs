use super::CellError;
use crate::loader::{assemble_at, load_elf, MemoryImage, Region, Segment, TOHOST};
use crate::tensorc::{find_benchmark, input_seed, lower, parse_program, uniform, Tensor};
use std::path::Path;

/// Load address for assembly-source benchmarks.
pub const ASM_BASE: u64 = 0x1_0000;
/// Zeroed scratch mapped after assembled code.
const ASM_SCRATCH: u64 = 1 << 20;

/// A ready-to-run memory image.
#[derive(Clone, Debug)]
pub struct Workload {
    pub name: String,
    pub image: MemoryImage,
    pub entry: u64,
}

fn compile_err(e: impl std::fmt::Display) -> CellError {
    CellError::CompileFailure { message: e.to_string() }
}

/// Resolves a suite name or a file path. Files are dispatched on their
/// extension: `.elf` (or ELF magic), `.s`/`.S`/`.asm`, `.tg` graph text.
/// Tensor inputs are drawn from a stream keyed by `(seed, name)`.
pub fn resolve(spec: &str, seed: u64) -> Result<Workload, CellError> {
    if let Some(b) = find_benchmark(spec) {
        let low = lower(&b.program).map_err(compile_err)?;
        let image = low.bind(&b.inputs(seed)).map_err(compile_err)?;
        return Ok(Workload { name: spec.to_string(), entry: low.entry, image });
    }
    let path = Path::new(spec);
    let bytes = std::fs::read(path).map_err(|e| compile_err(format!("`{spec}` is neither a suite benchmark nor a readable file ({e})")))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    if bytes.starts_with(b"\x7fELF") || ext == "elf" {
        let image = load_elf(&bytes).map_err(compile_err)?;
        return Ok(Workload { name: spec.to_string(), entry: image.entry, image });
    }
    let text = String::from_utf8(bytes).map_err(compile_err)?;
    match ext {
        "s" | "S" | "asm" => {
            let asm = assemble_at(&text, ASM_BASE).map_err(compile_err)?;
            let entry = asm.labels.get("_start").copied().unwrap_or(ASM_BASE);
            let mut image = MemoryImage::new(entry);
            let mem_size = asm.code.len() as u64 + ASM_SCRATCH;
            image
                .add_segment(Segment { base: ASM_BASE, bytes: asm.code, mem_size, writable: true, executable: true })
                .map_err(compile_err)?;
            if let (Some(&a), Some(&b)) = (asm.labels.get("output"), asm.labels.get("output_end")) {
                image.output = Some(Region { addr: a, len: b.saturating_sub(a) });
            }
            if let Some(&t) = asm.labels.get(TOHOST) {
                image.symbols.insert(TOHOST.into(), t);
            }
            image.symbols.extend(asm.labels);
            Ok(Workload { name: spec.to_string(), entry, image })
        }
        "tg" | "graph" | "txt" => {
            let program = parse_program(&text).map_err(compile_err)?;
            let low = lower(&program).map_err(compile_err)?;
            let base = input_seed(seed, spec);
            let inputs: Vec<Tensor> = low
                .input_types
                .iter()
                .enumerate()
                .map(|(k, ty)| Tensor { ty: ty.clone(), data: uniform(base.wrapping_add(k as u64), ty.numel(), 1.0) })
                .collect();
            let image = low.bind(&inputs).map_err(compile_err)?;
            Ok(Workload { name: spec.to_string(), entry: low.entry, image })
        }
        other => Err(compile_err(format!("don't know how to load `.{other}` files"))),
    }
}
