use super::{ConstInit, OpId, OpKind, Padding, TensorError, TensorOp, TensorProgram, TensorType};

/// Incremental construction of a [`TensorProgram`]; operands always refer
/// to previously added ops, so programs built this way are topologically
/// ordered by construction.
#[derive(Debug, Default, Clone)]
pub struct ProgramBuilder {
    ops: Vec<TensorOp>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, name: &str, kind: OpKind, operands: Vec<OpId>, ty: Option<TensorType>) -> OpId {
        self.ops.push(TensorOp { name: name.to_string(), kind, operands, ty });
        self.ops.len() - 1
    }

    fn ty(dims: &[usize], name: &str) -> TensorType {
        TensorType::new(dims).unwrap_or_else(|e| panic!("bad type for `{name}`: {e}"))
    }

    /// Panics on an invalid type; use [`ProgramBuilder::op`] for fallible construction.
    pub fn input(&mut self, name: &str, dims: &[usize]) -> OpId {
        let t = Self::ty(dims, name);
        self.push(name, OpKind::Input, vec![], Some(t))
    }

    pub fn constant(&mut self, name: &str, dims: &[usize], init: ConstInit) -> OpId {
        let t = Self::ty(dims, name);
        self.push(name, OpKind::Const(init), vec![], Some(t))
    }

    /// Constant uniform in `[-scale, scale)`.
    pub fn seeded(&mut self, name: &str, dims: &[usize], seed: u64, scale: f32) -> OpId {
        self.constant(name, dims, ConstInit::Seeded { seed, scale })
    }

    pub fn matmul(&mut self, name: &str, a: OpId, b: OpId) -> OpId {
        self.push(name, OpKind::MatMul, vec![a, b], None)
    }

    pub fn conv2d(&mut self, name: &str, x: OpId, filter: OpId, bias: OpId, stride: usize, padding: Padding) -> OpId {
        self.push(name, OpKind::Conv2D { stride, padding }, vec![x, filter, bias], None)
    }

    pub fn fully_connected(&mut self, name: &str, x: OpId, weight: OpId, bias: OpId) -> OpId {
        self.push(name, OpKind::FullyConnected, vec![x, weight, bias], None)
    }

    pub fn add(&mut self, name: &str, a: OpId, b: OpId) -> OpId {
        self.push(name, OpKind::Add, vec![a, b], None)
    }

    pub fn relu(&mut self, name: &str, x: OpId) -> OpId {
        self.push(name, OpKind::Relu, vec![x], None)
    }

    pub fn maxpool2d(&mut self, name: &str, x: OpId, window: [usize; 2], stride: usize) -> OpId {
        self.push(name, OpKind::MaxPool2D { window, stride }, vec![x], None)
    }

    pub fn avgpool2d(&mut self, name: &str, x: OpId, window: [usize; 2], stride: usize) -> OpId {
        self.push(name, OpKind::AvgPool2D { window, stride }, vec![x], None)
    }

    pub fn flatten(&mut self, name: &str, x: OpId) -> OpId {
        self.push(name, OpKind::Flatten, vec![x], None)
    }

    /// Generic, checked insertion.
    pub fn op(&mut self, name: &str, kind: OpKind, operands: Vec<OpId>, ty: Option<TensorType>) -> Result<OpId, TensorError> {
        if self.ops.iter().any(|o| o.name == name) {
            return Err(TensorError::Malformed { op: name.into(), reason: "duplicate name".into() });
        }
        if let Some(&bad) = operands.iter().find(|&&o| o >= self.ops.len()) {
            return Err(TensorError::Malformed { op: name.into(), reason: format!("operand #{bad} not yet defined") });
        }
        Ok(self.push(name, kind, operands, ty))
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Finishes the program with `output` as its result (untyped; run
    /// [`super::infer_shapes`] before interpreting or lowering).
    pub fn finish(self, output: OpId) -> TensorProgram {
        TensorProgram { ops: self.ops, output }
    }
}
