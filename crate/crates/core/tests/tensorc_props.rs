use proptest::prelude::*;
use rvmb_core::isa::{run_functional, InstrClass};
use rvmb_core::tensorc::{infer_shapes, interpret, lower, parse_program, to_text, Padding, ProgramBuilder, Tensor, TensorProgram};

fn value() -> impl Strategy<Value = f32> {
    prop_oneof![
        8 => -4.0f32..4.0,
        1 => Just(0.0f32),
        1 => Just(-0.0f32),
        1 => Just(f32::NAN),
        1 => Just(f32::INFINITY),
        1 => Just(f32::NEG_INFINITY),
        1 => Just(1e-42f32),
        1 => -1e30f32..1e30,
    ]
}

#[derive(Clone, Debug)]
enum Graph {
    MatMul { m: usize, k: usize, n: usize, relu: bool, bias: bool },
    Conv { h: usize, w: usize, c: usize, oc: usize, kh: usize, kw: usize, stride: usize, same: bool, pool: Option<(bool, usize, usize)>, fc: usize },
    Mlp { batch: usize, widths: Vec<usize> },
}

fn graph() -> impl Strategy<Value = Graph> {
    let mm = (1usize..9, 1usize..9, 1usize..9, any::<bool>(), any::<bool>())
        .prop_map(|(m, k, n, relu, bias)| Graph::MatMul { m, k, n, relu, bias });
    let conv = (3usize..10, 3usize..10, 1usize..4, 1usize..4, 1usize..4, 1usize..4, 1usize..3, any::<bool>(), any::<Option<bool>>(), 1usize..5)
        .prop_map(|(h, w, c, oc, kh, kw, stride, same, pool, fc)| {
            let (kh, kw) = (kh.min(h), kw.min(w));
            Graph::Conv { h, w, c, oc, kh, kw, stride, same, pool: pool.map(|max| (max, 1, 1)), fc }
        })
        .prop_flat_map(|g| {
            // Pool window chosen to fit the conv output.
            let Graph::Conv { h, w, kh, kw, stride, same, .. } = g.clone() else { unreachable!() };
            let oh = if same { h.div_ceil(stride) } else { (h - kh) / stride + 1 };
            let ow = if same { w.div_ceil(stride) } else { (w - kw) / stride + 1 };
            (Just(g), 1..=oh.min(3), 1..=ow.min(3), 1usize..3).prop_map(|(g, ph, pw, ps)| match g {
                Graph::Conv { pool: Some((max, _, _)), h, w, c, oc, kh, kw, stride, same, fc } => {
                    Graph::Conv { h, w, c, oc, kh, kw, stride, same, pool: Some((max, ph * 10 + pw, ps)), fc }
                }
                other => other,
            })
        });
    let mlp = (1usize..3, proptest::collection::vec(1usize..12, 2..5)).prop_map(|(batch, widths)| Graph::Mlp { batch, widths });
    prop_oneof![mm, conv, mlp]
}

fn build(g: &Graph, seed: u64) -> TensorProgram {
    let mut b = ProgramBuilder::new();
    let out = match *g {
        Graph::MatMul { m, k, n, relu, bias } => {
            let a = b.input("a", &[m, k]);
            let w = b.seeded("w", &[k, n], seed, 1.0);
            let mut o = b.matmul("mm", a, w);
            if bias {
                let c = b.seeded("c", &[m, n], seed + 1, 1.0);
                o = b.add("plus", o, c);
            }
            if relu {
                o = b.relu("r", o);
            }
            o
        }
        Graph::Conv { h, w, c, oc, kh, kw, stride, same, pool, fc } => {
            let x = b.input("x", &[1, h, w, c]);
            let f = b.seeded("f", &[oc, kh, kw, c], seed, 1.0);
            let bias = b.seeded("bias", &[oc], seed + 1, 1.0);
            let pad = if same { Padding::Same } else { Padding::Valid };
            let mut o = b.conv2d("conv", x, f, bias, stride, pad);
            o = b.relu("relu", o);
            if let Some((max, win, s)) = pool {
                let window = [win / 10, win % 10];
                o = if max { b.maxpool2d("pool", o, window, s) } else { b.avgpool2d("pool", o, window, s) };
            }
            let flat = b.flatten("flat", o);
            let p = infer_shapes(b.clone().finish(flat)).unwrap();
            let width = p.output_type().unwrap().dims[1];
            let fw = b.seeded("fw", &[fc, width], seed + 2, 1.0);
            let fb = b.seeded("fb", &[fc], seed + 3, 1.0);
            b.fully_connected("fc", flat, fw, fb)
        }
        Graph::Mlp { batch, ref widths } => {
            let mut h = b.input("x", &[batch, widths[0]]);
            for (i, win) in widths.windows(2).enumerate() {
                let w = b.seeded(&format!("w{i}"), &[win[1], win[0]], seed + i as u64, 1.0);
                let bias = b.seeded(&format!("b{i}"), &[win[1]], seed + 100 + i as u64, 1.0);
                h = b.fully_connected(&format!("fc{i}"), h, w, bias);
                h = b.relu(&format!("r{i}"), h);
            }
            h
        }
    };
    infer_shapes(b.finish(out)).unwrap()
}

fn bits(v: &[f32]) -> Vec<u32> {
    v.iter().map(|f| f.to_bits()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn lowered_code_matches_interpreter(g in graph(), seed in any::<u32>(), vals in proptest::collection::vec(value(), 1..512)) {
        let p = build(&g, seed as u64);
        let inputs: Vec<Tensor> = p
            .input_types()
            .into_iter()
            .map(|t| {
                let t = t.unwrap();
                let data = (0..t.numel()).map(|i| vals[i % vals.len()]).collect();
                Tensor::new(t, data).unwrap()
            })
            .collect();
        let low = lower(&p).unwrap();
        let r = run_functional(&low.bind(&inputs).unwrap(), low.entry, low.instr_bound).unwrap();
        prop_assert_eq!(r.exit_code, 0);
        prop_assert!(r.total_instrs <= low.instr_bound);
        let got = low.read_output(&r.final_state.output).unwrap();
        let want = interpret(&p, &inputs).unwrap();
        prop_assert_eq!(bits(&got.data), bits(&want.data));

        let macs = match g {
            Graph::MatMul { m, k, n, .. } => Some(m * k * n),
            Graph::Conv { same: false, h, w, c, oc, kh, kw, stride, fc, .. } => {
                let conv = ((h - kh) / stride + 1) * ((w - kw) / stride + 1) * oc * kh * kw * c;
                let width = p.ops[p.find("flat").unwrap()].ty.as_ref().unwrap().dims[1];
                Some(conv + width * fc)
            }
            _ => None,
        };
        if let Some(macs) = macs {
            prop_assert_eq!(r.instr_counts[InstrClass::FloatMultAcc], macs as u64);
        }
    }

    #[test]
    fn text_format_round_trips(g in graph(), seed in any::<u32>()) {
        let p = build(&g, seed as u64);
        prop_assert_eq!(parse_program(&to_text(&p)).unwrap(), p);
    }
}
