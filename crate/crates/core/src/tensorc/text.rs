//! Line-oriented graph format.
//!
//! ```text
//! # comment
//! x    = input : 1x28x28x1
//! w    = const seed=7 scale=0.5 : 6x5x5x1
//! b    = const fill=0 : 6
//! k    = const values=1,2,3 : 3
//! c    = conv2d x w b stride=1 padding=valid
//! r    = relu c
//! p    = maxpool2d r window=2x2 stride=2
//! f    = flatten p
//! o    = fc f w2 b2 : 1x10
//! output o
//! ```
//!
//! Kinds: `input`, `const`, `matmul`, `conv2d`, `fc` (or
//! `fully_connected`), `add`, `relu`, `maxpool2d`, `avgpool2d`, `flatten`.
//! A `: dims` suffix is mandatory on inputs and constants; elsewhere it is
//! an assertion checked against the inferred type.

use super::{infer_shapes, ConstInit, OpKind, Padding, TensorError, TensorOp, TensorProgram, TensorType};
use std::collections::HashMap;
use std::fmt::Write;

fn perr(line: usize, reason: impl Into<String>) -> TensorError {
    TensorError::Parse { line, reason: reason.into() }
}

fn parse_dims(s: &str, line: usize) -> Result<Vec<usize>, TensorError> {
    s.split('x')
        .map(|d| d.trim().parse::<usize>().map_err(|_| perr(line, format!("bad extent `{d}` in `{s}`"))))
        .collect()
}

/// Parses and shape-checks a program.
pub fn parse_program(src: &str) -> Result<TensorProgram, TensorError> {
    let mut ops: Vec<TensorOp> = Vec::new();
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut declared: Vec<(usize, usize, TensorType)> = Vec::new();
    let mut output = None;
    for (ln, raw) in src.lines().enumerate() {
        let line = ln + 1;
        let text = raw.split('#').next().unwrap().trim();
        if text.is_empty() {
            continue;
        }
        if let Some(rest) = text.strip_prefix("output") {
            if rest.starts_with(char::is_whitespace) {
                let name = rest.trim();
                let id = *ids.get(name).ok_or_else(|| perr(line, format!("unknown op `{name}`")))?;
                if output.replace(id).is_some() {
                    return Err(perr(line, "more than one output"));
                }
                continue;
            }
        }
        let (lhs, rhs) = text.split_once('=').ok_or_else(|| perr(line, "expected `name = kind ...`"))?;
        let name = lhs.trim();
        if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '.') {
            return Err(perr(line, format!("bad op name `{name}`")));
        }
        if ids.contains_key(name) {
            return Err(perr(line, format!("`{name}` defined twice")));
        }
        let (body, ty) = match rhs.split_once(':') {
            Some((b, t)) => {
                let dims = parse_dims(t.trim(), line)?;
                (b, Some(TensorType::new(&dims).map_err(|e| perr(line, e))?))
            }
            None => (rhs, None),
        };
        let mut words = body.split_whitespace();
        let kind_word = words.next().ok_or_else(|| perr(line, "missing op kind"))?;
        let mut operands = Vec::new();
        let mut attrs: HashMap<&str, &str> = HashMap::new();
        for w in words {
            if let Some((k, v)) = w.split_once('=') {
                if attrs.insert(k, v).is_some() {
                    return Err(perr(line, format!("attribute `{k}` repeated")));
                }
            } else {
                operands.push(*ids.get(w).ok_or_else(|| perr(line, format!("unknown operand `{w}`")))?);
            }
        }
        let mut take = |key: &str| attrs.remove(key);
        let num = |v: Option<&str>, key: &str, default: Option<usize>| -> Result<usize, TensorError> {
            match v {
                Some(v) => v.parse().map_err(|_| perr(line, format!("bad {key} `{v}`"))),
                None => default.ok_or_else(|| perr(line, format!("missing {key}="))),
            }
        };
        let kind = match kind_word {
            "input" => OpKind::Input,
            "const" => {
                let init = if let Some(seed) = take("seed") {
                    let seed = seed.parse().map_err(|_| perr(line, format!("bad seed `{seed}`")))?;
                    let scale = match take("scale") {
                        Some(s) => s.parse().map_err(|_| perr(line, format!("bad scale `{s}`")))?,
                        None => 0.5,
                    };
                    ConstInit::Seeded { seed, scale }
                } else if let Some(v) = take("fill") {
                    ConstInit::Fill(v.parse().map_err(|_| perr(line, format!("bad fill `{v}`")))?)
                } else if let Some(v) = take("values") {
                    let vals: Result<Vec<f32>, _> = v.split(',').map(str::parse).collect();
                    ConstInit::Values(vals.map_err(|_| perr(line, format!("bad values `{v}`")))?)
                } else {
                    return Err(perr(line, "const needs seed=, fill= or values="));
                };
                OpKind::Const(init)
            }
            "matmul" => OpKind::MatMul,
            "conv2d" => {
                let stride = num(take("stride"), "stride", Some(1))?;
                let padding = match take("padding").unwrap_or("valid") {
                    "valid" => Padding::Valid,
                    "same" => Padding::Same,
                    p => return Err(perr(line, format!("padding must be valid or same, got `{p}`"))),
                };
                OpKind::Conv2D { stride, padding }
            }
            "fc" | "fully_connected" => OpKind::FullyConnected,
            "add" => OpKind::Add,
            "relu" => OpKind::Relu,
            "maxpool2d" | "avgpool2d" => {
                let win = take("window").ok_or_else(|| perr(line, "missing window="))?;
                let w = parse_dims(win, line)?;
                if w.len() != 2 {
                    return Err(perr(line, format!("window must be HxW, got `{win}`")));
                }
                let stride = num(take("stride"), "stride", Some(w[0]))?;
                let window = [w[0], w[1]];
                if kind_word == "maxpool2d" {
                    OpKind::MaxPool2D { window, stride }
                } else {
                    OpKind::AvgPool2D { window, stride }
                }
            }
            "flatten" => OpKind::Flatten,
            k => return Err(perr(line, format!("unknown op kind `{k}`"))),
        };
        if let Some(k) = attrs.keys().next() {
            return Err(perr(line, format!("unexpected attribute `{k}` for {kind_word}")));
        }
        if operands.len() != kind.arity() {
            return Err(perr(line, format!("{kind_word} takes {} operands, got {}", kind.arity(), operands.len())));
        }
        let leaf = matches!(kind, OpKind::Input | OpKind::Const(_));
        if leaf && ty.is_none() {
            return Err(perr(line, format!("{kind_word} needs a `: dims` type")));
        }
        let id = ops.len();
        if let (false, Some(t)) = (leaf, &ty) {
            declared.push((id, line, t.clone()));
        }
        ids.insert(name.to_string(), id);
        ops.push(TensorOp { name: name.to_string(), kind, operands, ty: if leaf { ty } else { None } });
    }
    let output = match output {
        Some(o) => o,
        None if !ops.is_empty() => ops.len() - 1,
        None => return Err(perr(0, "empty program")),
    };
    let program = infer_shapes(TensorProgram { ops, output })?;
    for (id, line, t) in declared {
        let got = program.ops[id].ty.as_ref().unwrap();
        if *got != t {
            return Err(TensorError::ShapeMismatch {
                op: program.ops[id].name.clone(),
                reason: format!("line {line} declares {t}, inferred {got}"),
            });
        }
    }
    Ok(program)
}

/// Serializes a program; typed programs round-trip through [`parse_program`].
pub fn to_text(program: &TensorProgram) -> String {
    let mut s = String::new();
    for op in &program.ops {
        let _ = write!(s, "{} = {}", op.name, match op.kind {
            OpKind::FullyConnected => "fc",
            ref k => k.name(),
        });
        for &o in &op.operands {
            let _ = write!(s, " {}", program.ops[o].name);
        }
        match &op.kind {
            OpKind::Const(ConstInit::Seeded { seed, scale }) => {
                let _ = write!(s, " seed={seed} scale={scale}");
            }
            OpKind::Const(ConstInit::Fill(v)) => {
                let _ = write!(s, " fill={v}");
            }
            OpKind::Const(ConstInit::Values(v)) => {
                let vals: Vec<String> = v.iter().map(f32::to_string).collect();
                let _ = write!(s, " values={}", vals.join(","));
            }
            OpKind::Conv2D { stride, padding } => {
                let p = match padding {
                    Padding::Valid => "valid",
                    Padding::Same => "same",
                };
                let _ = write!(s, " stride={stride} padding={p}");
            }
            OpKind::MaxPool2D { window, stride } | OpKind::AvgPool2D { window, stride } => {
                let _ = write!(s, " window={}x{} stride={stride}", window[0], window[1]);
            }
            _ => {}
        }
        if let Some(t) = &op.ty {
            let _ = write!(s, " : {t}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "output {}", program.ops[program.output].name);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensorc::builtin_suite;

    const LENET_HEAD: &str = "
        # first LeNet stage
        x = input : 1x28x28x1
        w = const seed=7 : 6x5x5x1
        b = const fill=0 : 6
        c = conv2d x w b stride=1 padding=valid : 1x24x24x6
        r = relu c
        p = maxpool2d r window=2x2 stride=2
        output p
    ";

    #[test]
    fn parses_and_infers() {
        let p = parse_program(LENET_HEAD).unwrap();
        assert_eq!(p.output_type().unwrap().dims, vec![1, 12, 12, 6]);
        assert_eq!(p.ops[1].kind, OpKind::Const(ConstInit::Seeded { seed: 7, scale: 0.5 }));
    }

    #[test]
    fn suite_round_trips() {
        for b in builtin_suite() {
            let text = to_text(&b.program);
            assert_eq!(parse_program(&text).unwrap(), b.program, "{}", b.name);
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_program("x = input : 4\ny = relu z\n").unwrap_err();
        assert_eq!(e, TensorError::Parse { line: 2, reason: "unknown operand `z`".into() });
        assert!(matches!(parse_program("x = input\n"), Err(TensorError::Parse { line: 1, .. })));
        assert!(matches!(parse_program("x = input : 4\ny = softmax x\n"), Err(TensorError::Parse { line: 2, .. })));
        assert!(matches!(
            parse_program("x = input : 4\ny = relu x : 5\n"),
            Err(TensorError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            parse_program("a = input : 2x3\nb = input : 4x5\nc = matmul a b\n"),
            Err(TensorError::ShapeMismatch { op, .. }) if op == "c"
        ));
    }
}
