use super::{OpKind, Padding, TensorError, TensorProgram, TensorType};

/// Out extent and leading pad for one spatial dimension.
pub(crate) fn conv_extent(input: usize, k: usize, stride: usize, padding: Padding) -> Option<(usize, usize)> {
    match padding {
        Padding::Valid => (input >= k).then(|| ((input - k) / stride + 1, 0)),
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + k).saturating_sub(input);
            Some((out, total / 2))
        }
    }
}

/// Checks structure (arity, operand order, single output) and annotates
/// every op with its result type.
pub fn infer_shapes(mut program: TensorProgram) -> Result<TensorProgram, TensorError> {
    let n = program.ops.len();
    if program.output >= n {
        return Err(TensorError::Malformed { op: "<output>".into(), reason: format!("output #{} does not exist", program.output) });
    }
    let mut seen = std::collections::HashSet::new();
    for i in 0..n {
        let op = &program.ops[i];
        let name = op.name.clone();
        let mism = |reason: String| TensorError::ShapeMismatch { op: name.clone(), reason };
        let malformed = |reason: String| TensorError::Malformed { op: name.clone(), reason };
        if !seen.insert(name.clone()) {
            return Err(malformed("duplicate name".into()));
        }
        if op.operands.len() != op.kind.arity() {
            return Err(malformed(format!("{} takes {} operands, got {}", op.kind.name(), op.kind.arity(), op.operands.len())));
        }
        if let Some(&o) = op.operands.iter().find(|&&o| o >= i) {
            return Err(malformed(format!("operand #{o} does not precede its use")));
        }
        let t: Vec<&TensorType> = op
            .operands
            .iter()
            .map(|&o| program.ops[o].ty.as_ref().expect("operands typed before use"))
            .collect();
        let dims = |k: usize| t[k].dims.as_slice();
        let out: Vec<usize> = match &op.kind {
            OpKind::Input | OpKind::Const(_) => {
                let ty = op.ty.clone().ok_or_else(|| malformed("inputs and constants need an explicit type".into()))?;
                TensorType::new(&ty.dims).map_err(&mism)?;
                if let OpKind::Const(super::ConstInit::Values(v)) = &op.kind {
                    if v.len() != ty.numel() {
                        return Err(mism(format!("{} values for type {ty}", v.len())));
                    }
                }
                ty.dims
            }
            OpKind::MatMul => {
                let (a, b) = (dims(0), dims(1));
                if a.len() != 2 || b.len() != 2 {
                    return Err(mism(format!("matmul needs rank-2 operands, got {} and {}", t[0], t[1])));
                }
                if a[1] != b[0] {
                    return Err(mism(format!("inner dimensions differ: {} vs {}", t[0], t[1])));
                }
                vec![a[0], b[1]]
            }
            OpKind::Conv2D { stride, padding } => {
                let (x, f, b) = (dims(0), dims(1), dims(2));
                if x.len() != 4 || f.len() != 4 || b.len() != 1 {
                    return Err(mism(format!("conv2d needs NHWC input, OHWI filter, 1-D bias; got {}, {}, {}", t[0], t[1], t[2])));
                }
                if *stride == 0 {
                    return Err(mism("stride must be ≥ 1".into()));
                }
                if f[3] != x[3] {
                    return Err(mism(format!("filter expects {} input channels, input has {}", f[3], x[3])));
                }
                if b[0] != f[0] {
                    return Err(mism(format!("bias has {} entries for {} filters", b[0], f[0])));
                }
                let oh = conv_extent(x[1], f[1], *stride, *padding).ok_or_else(|| mism(format!("kernel {}x{} larger than input {}", f[1], f[2], t[0])))?;
                let ow = conv_extent(x[2], f[2], *stride, *padding).ok_or_else(|| mism(format!("kernel {}x{} larger than input {}", f[1], f[2], t[0])))?;
                vec![x[0], oh.0, ow.0, f[0]]
            }
            OpKind::FullyConnected => {
                let (x, w, b) = (dims(0), dims(1), dims(2));
                if x.len() != 2 || w.len() != 2 || b.len() != 1 {
                    return Err(mism(format!("fully_connected needs [B,IC], [OC,IC], [OC]; got {}, {}, {}", t[0], t[1], t[2])));
                }
                if w[1] != x[1] {
                    return Err(mism(format!("weight expects {} inputs, got {}", w[1], x[1])));
                }
                if b[0] != w[0] {
                    return Err(mism(format!("bias has {} entries for {} outputs", b[0], w[0])));
                }
                vec![x[0], w[0]]
            }
            OpKind::Add => {
                if t[0] != t[1] {
                    return Err(mism(format!("operand types differ: {} vs {}", t[0], t[1])));
                }
                t[0].dims.clone()
            }
            OpKind::Relu => t[0].dims.clone(),
            OpKind::MaxPool2D { window, stride } | OpKind::AvgPool2D { window, stride } => {
                let x = dims(0);
                if x.len() != 4 {
                    return Err(mism(format!("pooling needs an NHWC input, got {}", t[0])));
                }
                if *stride == 0 || window[0] == 0 || window[1] == 0 {
                    return Err(mism("window and stride must be ≥ 1".into()));
                }
                if window[0] > x[1] || window[1] > x[2] {
                    return Err(mism(format!("window {}x{} larger than input {}", window[0], window[1], t[0])));
                }
                vec![x[0], (x[1] - window[0]) / stride + 1, (x[2] - window[1]) / stride + 1, x[3]]
            }
            OpKind::Flatten => vec![1, t[0].numel()],
        };
        let ty = TensorType::new(&out).map_err(mism)?;
        program.ops[i].ty = Some(ty);
    }
    Ok(program)
}
