use super::{infer_shapes, uniform, Padding, ProgramBuilder, Tensor, TensorProgram};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// A named, shape-inferred suite program with a seeded input generator.
#[derive(Clone, Debug, Serialize)]
pub struct Benchmark {
    pub name: &'static str,
    pub program: TensorProgram,
}

impl Benchmark {
    /// Inputs uniform in `[-1, 1)`, derived from `(seed, name)` only, so a
    /// benchmark's data does not depend on what else runs alongside it.
    pub fn inputs(&self, seed: u64) -> Vec<Tensor> {
        let base = input_seed(seed, self.name);
        self.program
            .inputs()
            .into_iter()
            .enumerate()
            .map(|(k, id)| {
                let ty = self.program.ops[id].ty.clone().expect("suite programs are typed");
                let data = uniform(base.wrapping_add(k as u64), ty.numel(), 1.0);
                Tensor { ty, data }
            })
            .collect()
    }
}

/// Per-benchmark stream seed: the first 8 bytes of SHA-256(name ‖ seed).
pub fn input_seed(seed: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(name.as_bytes());
    h.update(seed.to_le_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}

const WEIGHT_SCALE: f32 = 0.5;

fn matmul(n: usize) -> TensorProgram {
    let mut b = ProgramBuilder::new();
    let a = b.input("a", &[n, n]);
    let w = b.seeded("b", &[n, n], 0x6d6d_0000 + n as u64, WEIGHT_SCALE);
    let m = b.matmul("c", a, w);
    b.finish(m)
}

fn conv_small() -> TensorProgram {
    let mut b = ProgramBuilder::new();
    let x = b.input("x", &[1, 32, 32, 3]);
    let w = b.seeded("w", &[8, 3, 3, 3], 0xc0_01, WEIGHT_SCALE);
    let bias = b.seeded("bias", &[8], 0xc0_02, WEIGHT_SCALE);
    let c = b.conv2d("conv", x, w, bias, 1, Padding::Valid);
    let r = b.relu("relu", c);
    b.finish(r)
}

fn lenet5() -> TensorProgram {
    let mut b = ProgramBuilder::new();
    let x = b.input("image", &[1, 28, 28, 1]);
    let w1 = b.seeded("conv1_w", &[6, 5, 5, 1], 0x1e_01, WEIGHT_SCALE);
    let b1 = b.seeded("conv1_b", &[6], 0x1e_02, WEIGHT_SCALE);
    let c1 = b.conv2d("conv1", x, w1, b1, 1, Padding::Valid);
    let r1 = b.relu("relu1", c1);
    let p1 = b.maxpool2d("pool1", r1, [2, 2], 2);
    let w2 = b.seeded("conv2_w", &[16, 5, 5, 6], 0x1e_03, WEIGHT_SCALE);
    let b2 = b.seeded("conv2_b", &[16], 0x1e_04, WEIGHT_SCALE);
    let c2 = b.conv2d("conv2", p1, w2, b2, 1, Padding::Valid);
    let r2 = b.relu("relu2", c2);
    let p2 = b.maxpool2d("pool2", r2, [2, 2], 2);
    let f = b.flatten("flat", p2);
    let mut h = f;
    let mut fan_in = 256;
    for (k, width) in [120usize, 84, 10].into_iter().enumerate() {
        let w = b.seeded(&format!("fc{}_w", k + 1), &[width, fan_in], 0x1e_10 + 2 * k as u64, WEIGHT_SCALE);
        let bias = b.seeded(&format!("fc{}_b", k + 1), &[width], 0x1e_11 + 2 * k as u64, WEIGHT_SCALE);
        h = b.fully_connected(&format!("fc{}", k + 1), h, w, bias);
        if k < 2 {
            h = b.relu(&format!("relu{}", k + 3), h);
        }
        fan_in = width;
    }
    b.finish(h)
}

fn mlp_3layer() -> TensorProgram {
    let mut b = ProgramBuilder::new();
    let mut h = b.input("x", &[1, 784]);
    let widths = [784usize, 256, 128, 10];
    for k in 0..3 {
        let w = b.seeded(&format!("w{k}"), &[widths[k + 1], widths[k]], 0x31_00 + 2 * k as u64, WEIGHT_SCALE);
        let bias = b.seeded(&format!("b{k}"), &[widths[k + 1]], 0x31_01 + 2 * k as u64, WEIGHT_SCALE);
        h = b.fully_connected(&format!("fc{k}"), h, w, bias);
        if k < 2 {
            h = b.relu(&format!("relu{k}"), h);
        }
    }
    b.finish(h)
}

fn stream_add() -> TensorProgram {
    let mut b = ProgramBuilder::new();
    let x = b.input("x", &[1 << 20]);
    let y = b.seeded("y", &[1 << 20], 0x5a_01, 1.0);
    let s = b.add("sum", x, y);
    b.finish(s)
}

pub const SUITE_NAMES: [&str; 7] = ["matmul16", "matmul64", "matmul128", "conv_small", "lenet5", "mlp_3layer", "stream_add"];

fn build(name: &str) -> Option<TensorProgram> {
    Some(match name {
        "matmul16" => matmul(16),
        "matmul64" => matmul(64),
        "matmul128" => matmul(128),
        "conv_small" => conv_small(),
        "lenet5" => lenet5(),
        "mlp_3layer" => mlp_3layer(),
        "stream_add" => stream_add(),
        _ => return None,
    })
}

/// The built-in benchmark roster, in report order.
pub fn builtin_suite() -> Vec<Benchmark> {
    SUITE_NAMES.iter().map(|n| find_benchmark(n).expect("roster entries build")).collect()
}

pub fn find_benchmark(name: &str) -> Option<Benchmark> {
    let idx = SUITE_NAMES.iter().position(|&n| n == name)?;
    let program = infer_shapes(build(name)?).expect("suite programs are well formed");
    Some(Benchmark { name: SUITE_NAMES[idx], program })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roster() {
        let s = builtin_suite();
        assert_eq!(s.len(), 7);
        assert!(s.iter().any(|b| b.name == "lenet5"));
        let lenet = find_benchmark("lenet5").unwrap();
        assert_eq!(lenet.program.output_type().unwrap().dims, vec![1, 10]);
        assert!(find_benchmark("resnet50").is_none());
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let a = find_benchmark("conv_small").unwrap();
        let b = find_benchmark("conv_small").unwrap();
        assert_eq!(a.program, b.program);
        assert_eq!(a.inputs(42), b.inputs(42));
        assert_ne!(a.inputs(42), a.inputs(43));
        assert_ne!(input_seed(1, "matmul16"), input_seed(1, "matmul64"));
    }
}
