//! Naive loop-nest code generation.
//!
//! Every loop is bottom-tested and driven by a pointer (or counter)
//! register compared against a precomputed end register, so the body runs
//! `trips ≥ 1` times. Reductions accumulate in `f0`, starting from the bias
//! (or +0) and applying one `fmadd.s` per term in ascending index order,
//! the same order [`super::interpret`] uses.

use super::shape::conv_extent;
use super::{OpKind, Padding, Tensor, TensorError, TensorProgram, TensorType};
use crate::isa::{encode, EncodeError, Instruction, Opcode};
use crate::loader::{MemoryImage, Region, TOHOST};
use serde::{Deserialize, Serialize};

// Integer registers by ABI name.
const T0: u8 = 5;
const T1: u8 = 6;
const T2: u8 = 7;
const S0: u8 = 8;
const S1: u8 = 9;
const A0: u8 = 10;
const A1: u8 = 11;
const A2: u8 = 12;
const A3: u8 = 13;
const A4: u8 = 14;
const A5: u8 = 15;
const A6: u8 = 16;
const A7: u8 = 17;
const S2: u8 = 18;
const S3: u8 = 19;
const S4: u8 = 20;
const S5: u8 = 21;
const S6: u8 = 22;
const S7: u8 = 23;
const S8: u8 = 24;
const S9: u8 = 25;
const S10: u8 = 26;
const S11: u8 = 27;
const T3: u8 = 28;
const T4: u8 = 29;
const T5: u8 = 30;
const T6: u8 = 31;
/// Marks a loop whose stride is known to fit an immediate.
const NO_REG: u8 = 0;

const ALIGN: u64 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LowerConfig {
    pub code_base: u64,
    pub tohost: u64,
    pub data_base: u64,
    /// Bytes available for constants, inputs and intermediates.
    pub data_capacity: u64,
}

impl Default for LowerConfig {
    fn default() -> Self {
        LowerConfig { code_base: 0x1_0000, tohost: 0x8000, data_base: 0x10_0000, data_capacity: 1 << 30 }
    }
}

/// A compiled program: machine code plus its memory image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoweredProgram {
    pub code: Vec<Instruction>,
    /// Code, constants and zeroed scratch; inputs are zero until bound.
    pub image: MemoryImage,
    pub entry: u64,
    pub inputs: Vec<Region>,
    pub input_types: Vec<TensorType>,
    pub output: Region,
    pub output_type: TensorType,
    /// Upper bound on retired instructions (twice the statically weighted count).
    pub instr_bound: u64,
}

impl LoweredProgram {
    /// The memory image with `inputs` written to their buffers.
    pub fn bind(&self, inputs: &[Tensor]) -> Result<MemoryImage, TensorError> {
        if inputs.len() != self.inputs.len() {
            return Err(TensorError::BadInputs(format!("expected {} inputs, got {}", self.inputs.len(), inputs.len())));
        }
        let mut image = self.image.clone();
        for ((t, region), ty) in inputs.iter().zip(&self.inputs).zip(&self.input_types) {
            if &t.ty != ty {
                return Err(TensorError::BadInputs(format!("expected {ty}, got {}", t.ty)));
            }
            if !image.patch(region.addr, &t.to_bytes()) {
                return Err(TensorError::BadInputs(format!("input region {:#x} not mapped", region.addr)));
            }
        }
        Ok(image)
    }

    /// Decodes the output region of a finished run.
    pub fn read_output(&self, output_bytes: &[u8]) -> Result<Tensor, TensorError> {
        Tensor::from_bytes(self.output_type.clone(), output_bytes)
    }
}

fn cg(e: EncodeError) -> TensorError {
    TensorError::Codegen(e.to_string())
}

fn fits12(v: i64) -> bool {
    (-2048..2048).contains(&v)
}

struct Loop {
    ptr: u8,
    end: u8,
    /// Holds the stride when it does not fit an immediate.
    sreg: u8,
    trips: u64,
    stride: i64,
}

type R = Result<(), TensorError>;

#[derive(Default)]
struct Emitter {
    code: Vec<Instruction>,
    /// Execution multiplier of the innermost open loop.
    weights: Vec<u128>,
    bound: u128,
}

impl Emitter {
    fn emit(&mut self, i: Result<Instruction, EncodeError>) -> R {
        self.code.push(i.map_err(cg)?);
        self.bound += self.weights.last().copied().unwrap_or(1);
        Ok(())
    }

    fn here(&self) -> usize {
        self.code.len()
    }

    fn li(&mut self, rd: u8, v: i64) -> R {
        if fits12(v) {
            return self.emit(Instruction::i(Opcode::Addi, rd, 0, v));
        }
        if v < i32::MIN as i64 || v >= i32::MAX as i64 - 0x800 {
            return Err(TensorError::Codegen(format!("constant {v:#x} exceeds 32 bits")));
        }
        let hi = (v + 0x800) >> 12;
        let lo = v - (hi << 12);
        self.emit(Instruction::u(Opcode::Lui, rd, ((hi << 12) as i32) as i64))?;
        if lo != 0 {
            self.emit(Instruction::i(Opcode::Addiw, rd, rd, lo))?;
        }
        Ok(())
    }

    fn mv(&mut self, rd: u8, rs: u8) -> R {
        self.emit(Instruction::i(Opcode::Addi, rd, rs, 0))
    }

    /// Loads `stride` into `sreg` when an immediate cannot hold it.
    fn prep(&mut self, sreg: u8, stride: i64) -> R {
        if fits12(stride) {
            return Ok(());
        }
        if sreg == NO_REG {
            return Err(TensorError::Codegen(format!("stride {stride} needs a register")));
        }
        self.li(sreg, stride)
    }

    /// `reg += stride`, using the register set up by [`Emitter::prep`].
    fn bump(&mut self, reg: u8, stride: i64, sreg: u8) -> R {
        if fits12(stride) {
            self.emit(Instruction::i(Opcode::Addi, reg, reg, stride))
        } else {
            self.emit(Instruction::r(Opcode::Add, reg, reg, sreg))
        }
    }

    fn branch_back(&mut self, op: Opcode, rs1: u8, rs2: u8, target: usize) -> R {
        let off = (target as i64 - self.here() as i64) * 4;
        if off >= -4096 {
            return self.emit(Instruction::b(op, rs1, rs2, off));
        }
        let inverse = match op {
            Opcode::Bne => Opcode::Beq,
            _ => return Err(TensorError::Codegen(format!("no long form for {op:?}"))),
        };
        self.emit(Instruction::b(inverse, rs1, rs2, 8))?;
        let off = (target as i64 - self.here() as i64) * 4;
        self.emit(Instruction::j(0, off))
    }

    /// Reserves a slot for a forward branch patched by [`Emitter::patch`].
    fn placeholder(&mut self) -> R {
        self.emit(Ok(Instruction::nop()))
    }

    fn patch(&mut self, at: usize, make: impl FnOnce(i64) -> Result<Instruction, EncodeError>) -> R {
        let off = (self.here() as i64 - at as i64) * 4;
        self.code[at] = make(off).map_err(cg)?;
        Ok(())
    }

    /// Emits a bottom-tested loop around `body`; `l.ptr` must already hold
    /// its start value.
    fn repeat(&mut self, l: Loop, body: impl FnOnce(&mut Self) -> R) -> R {
        let span = l.trips as i64 * l.stride;
        self.prep(l.sreg, l.stride)?;
        if fits12(span) {
            self.emit(Instruction::i(Opcode::Addi, l.end, l.ptr, span))?;
        } else {
            self.li(l.end, span)?;
            self.emit(Instruction::r(Opcode::Add, l.end, l.end, l.ptr))?;
        }
        let top = self.here();
        let outer = self.weights.last().copied().unwrap_or(1);
        self.weights.push(outer * l.trips as u128);
        body(self)?;
        self.bump(l.ptr, l.stride, l.sreg)?;
        self.branch_back(Opcode::Bne, l.ptr, l.end, top)?;
        self.weights.pop();
        Ok(())
    }

    fn flw(&mut self, fd: u8, base: u8) -> R {
        self.emit(Instruction::i(Opcode::Flw, fd, base, 0))
    }

    fn fsw(&mut self, fs: u8, base: u8) -> R {
        self.emit(Instruction::s(Opcode::Fsw, fs, base, 0))
    }

    fn fzero(&mut self, fd: u8) -> R {
        self.emit(Instruction::r1(Opcode::FmvWX, fd, 0))
    }

    /// `f0 += f1 * f2` after loading both operands; advances `pw` by one element.
    fn mac(&mut self, px: u8, pw: u8) -> R {
        self.flw(1, px)?;
        self.flw(2, pw)?;
        self.emit(Instruction::r4(Opcode::FmaddS, 0, 1, 2, 0))?;
        self.bump(pw, 4, NO_REG)
    }

    /// Stores `f0` to `*pout` and advances `pout`.
    fn store_acc(&mut self, pout: u8) -> R {
        self.fsw(0, pout)?;
        self.bump(pout, 4, NO_REG)
    }
}

fn align(v: u64) -> u64 {
    v.div_ceil(ALIGN) * ALIGN
}

pub fn lower(program: &TensorProgram) -> Result<LoweredProgram, TensorError> {
    lower_with(program, &LowerConfig::default())
}

pub fn lower_with(program: &TensorProgram, cfg: &LowerConfig) -> Result<LoweredProgram, TensorError> {
    let n = program.ops.len();
    let mut types = Vec::with_capacity(n);
    for op in &program.ops {
        types.push(
            op.ty
                .clone()
                .ok_or_else(|| TensorError::Malformed { op: op.name.clone(), reason: "shapes not inferred".into() })?,
        );
    }

    // Data layout: constants (initialised), inputs, then scratch.
    let mut addr = vec![0u64; n];
    let mut next = cfg.data_base;
    let mut data = Vec::new();
    for (i, op) in program.ops.iter().enumerate() {
        if let OpKind::Const(init) = &op.kind {
            addr[i] = next;
            data.resize((next - cfg.data_base) as usize, 0);
            data.extend(init.values(types[i].numel()).iter().flat_map(|v| v.to_le_bytes()));
            next = align(next + types[i].bytes());
        }
    }
    let mut inputs = Vec::new();
    let mut input_types = Vec::new();
    for (i, op) in program.ops.iter().enumerate() {
        if op.kind == OpKind::Input {
            addr[i] = next;
            inputs.push(Region { addr: next, len: types[i].bytes() });
            input_types.push(types[i].clone());
            next = align(next + types[i].bytes());
        }
    }
    for (i, op) in program.ops.iter().enumerate() {
        match op.kind {
            OpKind::Input | OpKind::Const(_) => {}
            OpKind::Flatten => addr[i] = addr[op.operands[0]],
            _ => {
                addr[i] = next;
                next = align(next + types[i].bytes());
            }
        }
    }
    let needed = next - cfg.data_base;
    if needed > cfg.data_capacity || next >= 1 << 31 {
        return Err(TensorError::CapacityExceeded { needed, limit: cfg.data_capacity });
    }

    let mut e = Emitter::default();
    for (i, op) in program.ops.iter().enumerate() {
        let arg = |k: usize| op.operands[k];
        let ad = |k: usize| addr[arg(k)] as i64;
        let dims = |k: usize| types[arg(k)].dims.as_slice();
        let out = addr[i] as i64;
        let unsupported = |reason: &str| TensorError::UnsupportedOp { op: op.name.clone(), reason: reason.into() };
        match &op.kind {
            OpKind::Input | OpKind::Const(_) | OpKind::Flatten => {}
            OpKind::MatMul => {
                let (m, k, nn) = (dims(0)[0], dims(0)[1], dims(1)[1]);
                matmul(&mut e, ad(0), ad(1), out, m, k, nn)?;
            }
            OpKind::FullyConnected => {
                let (b, ic, oc) = (dims(0)[0], dims(0)[1], dims(1)[0]);
                fully_connected(&mut e, ad(0), ad(1), ad(2), out, b, ic, oc)?;
            }
            OpKind::Conv2D { stride, padding } => {
                let x = dims(0);
                let f = dims(1);
                if x[0] != 1 {
                    return Err(unsupported("batch size other than 1"));
                }
                let g = ConvGeom::new(x, f, *stride, *padding);
                match padding {
                    Padding::Valid => conv_valid(&mut e, ad(0), ad(1), ad(2), out, &g)?,
                    Padding::Same => conv_same(&mut e, ad(0), ad(1), ad(2), out, &g)?,
                }
            }
            OpKind::MaxPool2D { window, stride } | OpKind::AvgPool2D { window, stride } => {
                let x = dims(0);
                if x[0] != 1 {
                    return Err(unsupported("batch size other than 1"));
                }
                let max = matches!(op.kind, OpKind::MaxPool2D { .. });
                pool(&mut e, ad(0), out, x, *window, *stride, max)?;
            }
            OpKind::Add => {
                let count = types[i].numel() as u64;
                e.li(T0, ad(0))?;
                e.li(T1, ad(1))?;
                e.li(T2, out)?;
                e.repeat(Loop { ptr: T0, end: T3, sreg: NO_REG, trips: count, stride: 4 }, |e| {
                    e.flw(1, T0)?;
                    e.flw(2, T1)?;
                    e.emit(Instruction::r(Opcode::FaddS, 0, 1, 2))?;
                    e.fsw(0, T2)?;
                    e.bump(T1, 4, NO_REG)?;
                    e.bump(T2, 4, NO_REG)
                })?;
            }
            OpKind::Relu => {
                let count = types[i].numel() as u64;
                e.fzero(3)?;
                e.li(T0, ad(0))?;
                e.li(T2, out)?;
                e.repeat(Loop { ptr: T0, end: T3, sreg: NO_REG, trips: count, stride: 4 }, |e| {
                    e.flw(1, T0)?;
                    e.emit(Instruction::r(Opcode::FmaxS, 1, 1, 3))?;
                    e.fsw(1, T2)?;
                    e.bump(T2, 4, NO_REG)
                })?;
            }
        }
    }
    // HTIF exit with code 0, then a self-loop that is never reached.
    e.li(T0, 1)?;
    e.li(T1, cfg.tohost as i64)?;
    e.emit(Instruction::s(Opcode::Sd, T0, T1, 0))?;
    e.emit(Instruction::j(0, 0))?;

    let code_bytes: Vec<u8> = e
        .code
        .iter()
        .map(|i| encode(i).map_err(cg))
        .collect::<Result<Vec<u32>, _>>()?
        .into_iter()
        .flat_map(u32::to_le_bytes)
        .collect();
    if cfg.code_base + code_bytes.len() as u64 > cfg.data_base {
        return Err(TensorError::CapacityExceeded { needed: code_bytes.len() as u64, limit: cfg.data_base - cfg.code_base });
    }

    let mut image = MemoryImage::new(cfg.code_base);
    let img_err = |e: crate::loader::ImageError| TensorError::Codegen(e.to_string());
    image.add_code(cfg.code_base, code_bytes).map_err(img_err)?;
    image.add_data(cfg.tohost, vec![], 64).map_err(img_err)?;
    image.add_data(cfg.data_base, data, needed.max(ALIGN)).map_err(img_err)?;
    image.symbols.insert(TOHOST.into(), cfg.tohost);
    for (k, r) in inputs.iter().enumerate() {
        image.symbols.insert(format!("input{k}"), r.addr);
    }
    let output_type = types[program.output].clone();
    let output = Region { addr: addr[program.output], len: output_type.bytes() };
    image.symbols.insert("output".into(), output.addr);
    image.output = Some(output);

    Ok(LoweredProgram {
        code: e.code,
        image,
        entry: cfg.code_base,
        inputs,
        input_types,
        output,
        output_type,
        instr_bound: u64::try_from(e.bound * 2).unwrap_or(u64::MAX),
    })
}

fn matmul(e: &mut Emitter, a: i64, b: i64, c: i64, m: usize, k: usize, n: usize) -> R {
    let row = (n * 4) as i64;
    e.prep(T3, row)?;
    e.li(S0, a)?;
    e.li(S1, c)?;
    e.repeat(Loop { ptr: S0, end: S2, sreg: S3, trips: m as u64, stride: (k * 4) as i64 }, |e| {
        e.li(S4, b)?;
        e.repeat(Loop { ptr: S4, end: S5, sreg: NO_REG, trips: n as u64, stride: 4 }, |e| {
            e.fzero(0)?;
            e.mv(T0, S0)?;
            e.mv(T1, S4)?;
            e.repeat(Loop { ptr: T0, end: T2, sreg: NO_REG, trips: k as u64, stride: 4 }, |e| {
                e.flw(1, T0)?;
                e.flw(2, T1)?;
                e.emit(Instruction::r4(Opcode::FmaddS, 0, 1, 2, 0))?;
                e.bump(T1, row, T3)
            })?;
            e.store_acc(S1)
        })
    })
}

#[allow(clippy::too_many_arguments)]
fn fully_connected(e: &mut Emitter, x: i64, w: i64, b: i64, o: i64, batch: usize, ic: usize, oc: usize) -> R {
    e.li(S0, x)?;
    e.li(S1, o)?;
    e.repeat(Loop { ptr: S0, end: S2, sreg: S3, trips: batch as u64, stride: (ic * 4) as i64 }, |e| {
        e.li(S7, b)?;
        e.li(S8, w)?;
        e.repeat(Loop { ptr: S7, end: S9, sreg: NO_REG, trips: oc as u64, stride: 4 }, |e| {
            e.flw(0, S7)?;
            e.mv(T3, S0)?;
            e.repeat(Loop { ptr: T3, end: T4, sreg: NO_REG, trips: ic as u64, stride: 4 }, |e| e.mac(T3, S8))?;
            e.store_acc(S1)
        })
    })
}

struct ConvGeom {
    h: usize,
    w: usize,
    c: usize,
    oc: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    pt: usize,
    pl: usize,
    s: usize,
}

impl ConvGeom {
    fn new(x: &[usize], f: &[usize], s: usize, padding: Padding) -> Self {
        let (oh, pt) = conv_extent(x[1], f[1], s, padding).expect("shapes inferred");
        let (ow, pl) = conv_extent(x[2], f[2], s, padding).expect("shapes inferred");
        ConvGeom { h: x[1], w: x[2], c: x[3], oc: f[0], kh: f[1], kw: f[2], oh, ow, pt, pl, s }
    }
}

/// Valid padding: each filter row `kw × ic` is contiguous in both the
/// input and the filter, so it is one flat inner loop.
fn conv_valid(e: &mut Emitter, x: i64, f: i64, b: i64, o: i64, g: &ConvGeom) -> R {
    let pixel = (g.c * 4) as i64;
    let row = g.w as i64 * pixel;
    e.li(S0, x)?;
    e.li(S1, o)?;
    e.repeat(Loop { ptr: S0, end: S2, sreg: S3, trips: g.oh as u64, stride: g.s as i64 * row }, |e| {
        e.mv(S4, S0)?;
        e.repeat(Loop { ptr: S4, end: S5, sreg: S6, trips: g.ow as u64, stride: g.s as i64 * pixel }, |e| {
            e.li(S7, b)?;
            e.li(S8, f)?;
            e.repeat(Loop { ptr: S7, end: S9, sreg: NO_REG, trips: g.oc as u64, stride: 4 }, |e| {
                e.flw(0, S7)?;
                e.mv(T0, S4)?;
                e.repeat(Loop { ptr: T0, end: T1, sreg: T2, trips: g.kh as u64, stride: row }, |e| {
                    e.mv(T3, T0)?;
                    e.repeat(Loop { ptr: T3, end: T4, sreg: NO_REG, trips: (g.kw * g.c) as u64, stride: 4 }, |e| {
                        e.mac(T3, S8)
                    })
                })?;
                e.store_acc(S1)
            })
        })
    })
}

/// Same padding: taps are walked with signed row/column counters and
/// skipped (advancing the filter pointer only) when they fall outside the
/// input; an unsigned compare against the extent catches both sides.
fn conv_same(e: &mut Emitter, x: i64, f: i64, b: i64, o: i64, g: &ConvGeom) -> R {
    let pixel = (g.c * 4) as i64;
    let row = g.w as i64 * pixel;
    let s = g.s as i64;
    e.li(A0, g.h as i64)?;
    e.li(A1, g.w as i64)?;
    e.prep(S11, s * row)?;
    e.prep(A3, s * pixel)?;
    e.prep(A5, row)?;
    e.prep(A7, pixel)?;
    e.prep(T2, pixel)?;
    e.li(S10, x - (g.pt as i64 * row + g.pl as i64 * pixel))?;
    e.li(S1, o)?;
    e.li(S0, -(g.pt as i64))?;
    e.repeat(Loop { ptr: S0, end: S2, sreg: S3, trips: g.oh as u64, stride: s }, |e| {
        e.mv(A2, S10)?;
        e.li(S4, -(g.pl as i64))?;
        e.repeat(Loop { ptr: S4, end: S5, sreg: S6, trips: g.ow as u64, stride: s }, |e| {
            e.li(S7, b)?;
            e.li(S8, f)?;
            e.repeat(Loop { ptr: S7, end: S9, sreg: NO_REG, trips: g.oc as u64, stride: 4 }, |e| {
                e.flw(0, S7)?;
                e.mv(T0, S0)?;
                e.mv(A4, A2)?;
                e.repeat(Loop { ptr: T0, end: T1, sreg: NO_REG, trips: g.kh as u64, stride: 1 }, |e| {
                    e.mv(T5, S4)?;
                    e.mv(A6, A4)?;
                    e.repeat(Loop { ptr: T5, end: T6, sreg: NO_REG, trips: g.kw as u64, stride: 1 }, |e| {
                        let row_check = e.here();
                        e.placeholder()?;
                        let col_check = e.here();
                        e.placeholder()?;
                        e.mv(T3, A6)?;
                        e.repeat(Loop { ptr: T3, end: T4, sreg: NO_REG, trips: g.c as u64, stride: 4 }, |e| {
                            e.mac(T3, S8)
                        })?;
                        let jump = e.here();
                        e.placeholder()?;
                        e.patch(row_check, |off| Instruction::b(Opcode::Bgeu, T0, A0, off))?;
                        e.patch(col_check, |off| Instruction::b(Opcode::Bgeu, T5, A1, off))?;
                        e.bump(S8, pixel, T2)?;
                        e.patch(jump, |off| Instruction::j(0, off))?;
                        e.bump(A6, pixel, A7)
                    })?;
                    e.bump(A4, row, A5)
                })?;
                e.store_acc(S1)
            })?;
            e.bump(A2, s * pixel, A3)
        })?;
        e.bump(S10, s * row, S11)
    })
}

fn pool(e: &mut Emitter, x: i64, o: i64, dims: &[usize], window: [usize; 2], s: usize, max: bool) -> R {
    let (h, w, c) = (dims[1], dims[2], dims[3]);
    let (oh, ow) = ((h - window[0]) / s + 1, (w - window[1]) / s + 1);
    let pixel = (c * 4) as i64;
    let row = w as i64 * pixel;
    if !max {
        e.li(T6, (window[0] * window[1]) as i64)?;
        e.emit(Instruction::r1(Opcode::FcvtSW, 3, T6))?;
    }
    e.li(S0, x)?;
    e.li(S1, o)?;
    e.repeat(Loop { ptr: S0, end: S2, sreg: S3, trips: oh as u64, stride: s as i64 * row }, |e| {
        e.mv(S4, S0)?;
        e.repeat(Loop { ptr: S4, end: S5, sreg: S6, trips: ow as u64, stride: s as i64 * pixel }, |e| {
            e.mv(S7, S4)?;
            e.repeat(Loop { ptr: S7, end: S9, sreg: NO_REG, trips: c as u64, stride: 4 }, |e| {
                if max {
                    e.flw(0, S7)?;
                } else {
                    e.fzero(0)?;
                }
                e.mv(T0, S7)?;
                e.repeat(Loop { ptr: T0, end: T1, sreg: T2, trips: window[0] as u64, stride: row }, |e| {
                    e.mv(T3, T0)?;
                    e.repeat(Loop { ptr: T3, end: T4, sreg: T5, trips: window[1] as u64, stride: pixel }, |e| {
                        e.flw(1, T3)?;
                        let op = if max { Opcode::FmaxS } else { Opcode::FaddS };
                        e.emit(Instruction::r(op, 0, 0, 1))
                    })
                })?;
                if !max {
                    e.emit(Instruction::r(Opcode::FdivS, 0, 0, 3))?;
                }
                e.store_acc(S1)
            })
        })
    })
}
