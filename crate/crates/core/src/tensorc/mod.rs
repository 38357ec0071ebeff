//! Tensor-operator IR, shape inference, a reference interpreter, and
//! lowering to RV64 loop nests.

mod builder;
mod interp;
mod lower;
mod shape;
mod suite;
mod text;

pub use builder::ProgramBuilder;
pub use interp::interpret;
pub use lower::{lower, lower_with, LowerConfig, LoweredProgram};
pub use shape::infer_shapes;
pub use suite::{builtin_suite, find_benchmark, input_seed, Benchmark, SUITE_NAMES};
pub use text::{parse_program, to_text};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub type OpId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TensorError {
    #[error("shape mismatch at `{op}`: {reason}")]
    ShapeMismatch { op: String, reason: String },
    #[error("malformed op `{op}`: {reason}")]
    Malformed { op: String, reason: String },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unsupported op `{op}`: {reason}")]
    UnsupportedOp { op: String, reason: String },
    #[error("data needs {needed} bytes, limit is {limit}")]
    CapacityExceeded { needed: u64, limit: u64 },
    #[error("bad inputs: {0}")]
    BadInputs(String),
    #[error("code generation failed: {0}")]
    Codegen(String),
}

/// f32 tensor type; 4-D tensors are NHWC.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TensorType {
    pub dims: Vec<usize>,
}

impl TensorType {
    pub const MAX_ELEMENTS: usize = (1 << 31) - 1;

    pub fn new(dims: &[usize]) -> Result<Self, String> {
        if dims.is_empty() || dims.len() > 4 {
            return Err(format!("rank {} outside 1..=4", dims.len()));
        }
        if dims.contains(&0) {
            return Err(format!("zero extent in {dims:?}"));
        }
        let n = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        match n {
            Some(n) if n <= Self::MAX_ELEMENTS => Ok(TensorType { dims: dims.to_vec() }),
            _ => Err(format!("{dims:?} has 2^31 or more elements")),
        }
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn numel(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn bytes(&self) -> u64 {
        self.numel() as u64 * 4
    }
}

impl fmt::Display for TensorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", d.join("x"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Valid,
    Same,
}

/// Initial contents of a constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ConstInit {
    /// Uniform in `[-scale, scale)` from a ChaCha8 stream seeded with `seed`.
    Seeded { seed: u64, scale: f32 },
    Fill(f32),
    Values(Vec<f32>),
}

impl ConstInit {
    pub fn values(&self, numel: usize) -> Vec<f32> {
        match self {
            ConstInit::Seeded { seed, scale } => uniform(*seed, numel, *scale),
            ConstInit::Fill(v) => vec![*v; numel],
            ConstInit::Values(v) => v.clone(),
        }
    }
}

/// `n` values uniform in `[-scale, scale)`.
pub fn uniform(seed: u64, n: usize, scale: f32) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0f32..1.0) * scale).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum OpKind {
    Input,
    Const(ConstInit),
    /// `[M,K] x [K,N]`.
    MatMul,
    /// Operands: input NHWC, filter `[OC,KH,KW,IC]`, bias `[OC]`.
    Conv2D { stride: usize, padding: Padding },
    /// Operands: input `[B,IC]`, weight `[OC,IC]`, bias `[OC]`.
    FullyConnected,
    Add,
    Relu,
    MaxPool2D { window: [usize; 2], stride: usize },
    AvgPool2D { window: [usize; 2], stride: usize },
    Flatten,
}

impl OpKind {
    pub fn name(&self) -> &'static str {
        match self {
            OpKind::Input => "input",
            OpKind::Const(_) => "const",
            OpKind::MatMul => "matmul",
            OpKind::Conv2D { .. } => "conv2d",
            OpKind::FullyConnected => "fully_connected",
            OpKind::Add => "add",
            OpKind::Relu => "relu",
            OpKind::MaxPool2D { .. } => "maxpool2d",
            OpKind::AvgPool2D { .. } => "avgpool2d",
            OpKind::Flatten => "flatten",
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            OpKind::Input | OpKind::Const(_) => 0,
            OpKind::Relu | OpKind::MaxPool2D { .. } | OpKind::AvgPool2D { .. } | OpKind::Flatten => 1,
            OpKind::MatMul | OpKind::Add => 2,
            OpKind::Conv2D { .. } | OpKind::FullyConnected => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorOp {
    pub name: String,
    pub kind: OpKind,
    pub operands: Vec<OpId>,
    /// Declared for inputs and constants, inferred for everything else.
    pub ty: Option<TensorType>,
}

/// Topologically ordered operator DAG with one designated output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorProgram {
    pub ops: Vec<TensorOp>,
    pub output: OpId,
}

impl TensorProgram {
    pub fn inputs(&self) -> Vec<OpId> {
        (0..self.ops.len()).filter(|&i| self.ops[i].kind == OpKind::Input).collect()
    }

    pub fn find(&self, name: &str) -> Option<OpId> {
        self.ops.iter().position(|o| o.name == name)
    }

    pub fn ty(&self, id: OpId) -> Option<&TensorType> {
        self.ops[id].ty.as_ref()
    }

    pub fn output_type(&self) -> Option<&TensorType> {
        self.ty(self.output)
    }

    /// Input types in binding order.
    pub fn input_types(&self) -> Vec<Option<TensorType>> {
        self.inputs().into_iter().map(|i| self.ops[i].ty.clone()).collect()
    }
}

/// A dense f32 tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub ty: TensorType,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(ty: TensorType, data: Vec<f32>) -> Result<Self, TensorError> {
        if data.len() != ty.numel() {
            return Err(TensorError::BadInputs(format!("{} values for type {ty}", data.len())));
        }
        Ok(Tensor { ty, data })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn from_bytes(ty: TensorType, bytes: &[u8]) -> Result<Self, TensorError> {
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Tensor::new(ty, data)
    }
}
