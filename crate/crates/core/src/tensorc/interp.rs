use super::shape::conv_extent;
use super::{OpKind, Tensor, TensorError, TensorProgram};
use crate::isa::fp::{fmax_f32, CANONICAL_NAN_S};

// Each helper mirrors the corresponding RV64F instruction bit for bit,
// including NaN canonicalisation.
fn canon(v: f32) -> f32 {
    if v.is_nan() {
        f32::from_bits(CANONICAL_NAN_S)
    } else {
        v
    }
}

fn fma(a: f32, b: f32, acc: f32) -> f32 {
    canon(a.mul_add(b, acc))
}

fn fadd(a: f32, b: f32) -> f32 {
    canon(a + b)
}

fn fdiv(a: f32, b: f32) -> f32 {
    canon(a / b)
}

/// Reference execution. Every reduction runs in ascending index order
/// (for convolutions: kh, kw, ic) starting from the bias, one fused
/// multiply-add per term, so lowered code reproduces it exactly.
pub fn interpret(program: &TensorProgram, inputs: &[Tensor]) -> Result<Tensor, TensorError> {
    let input_ids = program.inputs();
    if inputs.len() != input_ids.len() {
        return Err(TensorError::BadInputs(format!("expected {} inputs, got {}", input_ids.len(), inputs.len())));
    }
    let mut vals: Vec<Option<Tensor>> = vec![None; program.ops.len()];
    let mut next_input = 0;
    for (i, op) in program.ops.iter().enumerate() {
        let ty = op
            .ty
            .clone()
            .ok_or_else(|| TensorError::Malformed { op: op.name.clone(), reason: "shapes not inferred".into() })?;
        let arg = |k: usize| vals[op.operands[k]].as_ref().expect("operands evaluated first");
        let data = match &op.kind {
            OpKind::Input => {
                let t = &inputs[next_input];
                next_input += 1;
                if t.ty != ty {
                    return Err(TensorError::BadInputs(format!("input `{}` is {ty}, got {}", op.name, t.ty)));
                }
                t.data.clone()
            }
            OpKind::Const(init) => init.values(ty.numel()),
            OpKind::MatMul => matmul(arg(0), arg(1)),
            OpKind::Conv2D { stride, padding } => {
                let (x, f, b) = (arg(0), arg(1), arg(2));
                let (n, h, w, c) = (x.ty.dims[0], x.ty.dims[1], x.ty.dims[2], x.ty.dims[3]);
                let (oc, kh, kw) = (f.ty.dims[0], f.ty.dims[1], f.ty.dims[2]);
                let (oh, pt) = conv_extent(h, kh, *stride, *padding).unwrap();
                let (ow, pl) = conv_extent(w, kw, *stride, *padding).unwrap();
                let mut out = Vec::with_capacity(n * oh * ow * oc);
                for bn in 0..n {
                    for y in 0..oh {
                        for xx in 0..ow {
                            for o in 0..oc {
                                let mut acc = b.data[o];
                                for dy in 0..kh {
                                    let iy = (y * stride + dy) as isize - pt as isize;
                                    for dx in 0..kw {
                                        let ix = (xx * stride + dx) as isize - pl as isize;
                                        if iy < 0 || ix < 0 || iy as usize >= h || ix as usize >= w {
                                            continue;
                                        }
                                        let base = ((bn * h + iy as usize) * w + ix as usize) * c;
                                        let fbase = ((o * kh + dy) * kw + dx) * c;
                                        for ic in 0..c {
                                            acc = fma(x.data[base + ic], f.data[fbase + ic], acc);
                                        }
                                    }
                                }
                                out.push(acc);
                            }
                        }
                    }
                }
                out
            }
            OpKind::FullyConnected => {
                let (x, w, b) = (arg(0), arg(1), arg(2));
                let (bs, ic) = (x.ty.dims[0], x.ty.dims[1]);
                let oc = w.ty.dims[0];
                let mut out = Vec::with_capacity(bs * oc);
                for r in 0..bs {
                    for o in 0..oc {
                        let mut acc = b.data[o];
                        for k in 0..ic {
                            acc = fma(x.data[r * ic + k], w.data[o * ic + k], acc);
                        }
                        out.push(acc);
                    }
                }
                out
            }
            OpKind::Add => arg(0).data.iter().zip(&arg(1).data).map(|(&a, &b)| fadd(a, b)).collect(),
            OpKind::Relu => arg(0).data.iter().map(|&v| fmax_f32(v, 0.0)).map(canon).collect(),
            OpKind::MaxPool2D { window, stride } => pool(arg(0), *window, *stride, true),
            OpKind::AvgPool2D { window, stride } => pool(arg(0), *window, *stride, false),
            OpKind::Flatten => arg(0).data.clone(),
        };
        vals[i] = Some(Tensor { ty, data });
    }
    Ok(vals[program.output].take().expect("output evaluated"))
}

fn matmul(a: &Tensor, b: &Tensor) -> Vec<f32> {
    let (m, k, n) = (a.ty.dims[0], a.ty.dims[1], b.ty.dims[1]);
    let mut out = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0f32;
            for p in 0..k {
                acc = fma(a.data[i * k + p], b.data[p * n + j], acc);
            }
            out.push(acc);
        }
    }
    out
}

fn pool(x: &Tensor, window: [usize; 2], stride: usize, max: bool) -> Vec<f32> {
    let (n, h, w, c) = (x.ty.dims[0], x.ty.dims[1], x.ty.dims[2], x.ty.dims[3]);
    let oh = (h - window[0]) / stride + 1;
    let ow = (w - window[1]) / stride + 1;
    let count = (window[0] * window[1]) as f32;
    let at = |bn: usize, y: usize, xx: usize, ch: usize| x.data[((bn * h + y) * w + xx) * c + ch];
    let mut out = Vec::with_capacity(n * oh * ow * c);
    for bn in 0..n {
        for y in 0..oh {
            for xx in 0..ow {
                for ch in 0..c {
                    let mut acc = if max { at(bn, y * stride, xx * stride, ch) } else { 0.0 };
                    for dy in 0..window[0] {
                        for dx in 0..window[1] {
                            let v = at(bn, y * stride + dy, xx * stride + dx, ch);
                            acc = if max { canon(fmax_f32(acc, v)) } else { fadd(acc, v) };
                        }
                    }
                    out.push(if max { acc } else { fdiv(acc, count) });
                }
            }
        }
    }
    out
}

#[cfg(test)]
/// Convenience: a tensor of the given type from raw values.
pub(crate) fn tensor(dims: &[usize], data: Vec<f32>) -> Tensor {
    Tensor { ty: super::TensorType::new(dims).unwrap(), data }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensorc::{infer_shapes, ConstInit, ProgramBuilder};

    #[test]
    fn relu_clamps_negatives() {
        let mut b = ProgramBuilder::new();
        let x = b.input("x", &[3]);
        let r = b.relu("r", x);
        let p = infer_shapes(b.finish(r)).unwrap();
        let out = interpret(&p, &[tensor(&[3], vec![-1.0, 0.0, 2.5])]).unwrap();
        assert_eq!(out.data, vec![0.0, 0.0, 2.5]);
        assert!(out.data.iter().all(|v| v.is_sign_positive()));
    }

    #[test]
    fn identity_matmul_is_exact() {
        let mut eye = vec![0.0f32; 16];
        for i in 0..4 {
            eye[i * 5] = 1.0;
        }
        let mut b = ProgramBuilder::new();
        let id = b.constant("id", &[4, 4], ConstInit::Values(eye));
        let x = b.input("x", &[4, 3]);
        let m = b.matmul("m", id, x);
        let p = infer_shapes(b.finish(m)).unwrap();
        let xs: Vec<f32> = (0..12).map(|i| (i as f32 * 0.37).sin() * 1e3).collect();
        let out = interpret(&p, &[tensor(&[4, 3], xs.clone())]).unwrap();
        let bits = |v: &[f32]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&out.data), bits(&xs));
    }

    #[test]
    fn maxpool_ramp() {
        let mut b = ProgramBuilder::new();
        let x = b.input("x", &[1, 4, 4, 1]);
        let p = b.maxpool2d("p", x, [2, 2], 2);
        let p = infer_shapes(b.finish(p)).unwrap();
        let ramp: Vec<f32> = (0..16).map(|i| i as f32).collect();
        let out = interpret(&p, &[tensor(&[1, 4, 4, 1], ramp.clone())]).unwrap();
        // brute force over every window
        let mut want = vec![];
        for oy in 0..2 {
            for ox in 0..2 {
                let mut m = f32::MIN;
                for dy in 0..2 {
                    for dx in 0..2 {
                        m = m.max(ramp[(oy * 2 + dy) * 4 + ox * 2 + dx]);
                    }
                }
                want.push(m);
            }
        }
        assert_eq!(out.data, want);
        assert_eq!(out.data, vec![5.0, 7.0, 13.0, 15.0]);
    }

    #[test]
    fn avgpool_divides_by_window() {
        let mut b = ProgramBuilder::new();
        let x = b.input("x", &[1, 2, 2, 1]);
        let p = b.avgpool2d("p", x, [2, 2], 1);
        let p = infer_shapes(b.finish(p)).unwrap();
        let out = interpret(&p, &[tensor(&[1, 2, 2, 1], vec![1.0, 2.0, 3.0, 6.0])]).unwrap();
        assert_eq!(out.data, vec![3.0]);
    }

    #[test]
    fn same_padding_conv_skips_out_of_bounds_taps() {
        let mut b = ProgramBuilder::new();
        let x = b.input("x", &[1, 3, 3, 1]);
        let w = b.constant("w", &[1, 3, 3, 1], ConstInit::Fill(1.0));
        let bias = b.constant("b", &[1], ConstInit::Fill(0.0));
        let c = b.conv2d("c", x, w, bias, 1, crate::tensorc::Padding::Same);
        let p = infer_shapes(b.finish(c)).unwrap();
        let out = interpret(&p, &[tensor(&[1, 3, 3, 1], vec![1.0; 9])]).unwrap();
        assert_eq!(out.data, vec![4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]);
    }

    #[test]
    fn wrong_input_count_or_type() {
        let mut b = ProgramBuilder::new();
        let x = b.input("x", &[3]);
        let r = b.relu("r", x);
        let p = infer_shapes(b.finish(r)).unwrap();
        assert!(interpret(&p, &[]).is_err());
        assert!(interpret(&p, &[tensor(&[4], vec![0.0; 4])]).is_err());
    }
}
