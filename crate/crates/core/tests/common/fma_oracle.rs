//! Exact fused multiply-add via big-integer arithmetic, rounded once to
//! nearest-even. Finite inputs only.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

/// IEEE binary format parameters: significand bits (incl. hidden), exponent bias, width.
#[derive(Clone, Copy)]
pub struct Fmt {
    pub p: u32,
    pub bias: i64,
    pub exp_bits: u32,
}

pub const F32: Fmt = Fmt { p: 24, bias: 127, exp_bits: 8 };
pub const F64: Fmt = Fmt { p: 53, bias: 1023, exp_bits: 11 };

impl Fmt {
    fn emin_ulp(self) -> i64 {
        1 - self.bias - (self.p as i64 - 1)
    }
    fn max_exp_field(self) -> u64 {
        (1u64 << self.exp_bits) - 1
    }
}

/// `(negative, significand, exponent)` with value = ±sig · 2^exp.
fn split(bits: u64, f: Fmt) -> (bool, BigInt, i64) {
    let frac_bits = f.p - 1;
    let sign = bits >> (frac_bits + f.exp_bits) & 1 == 1;
    let e = (bits >> frac_bits) & f.max_exp_field();
    let frac = bits & ((1u64 << frac_bits) - 1);
    assert!(e != f.max_exp_field(), "oracle takes finite inputs only");
    if e == 0 {
        (sign, BigInt::from(frac), f.emin_ulp())
    } else {
        (sign, BigInt::from(frac | 1 << frac_bits), e as i64 - f.bias - frac_bits as i64)
    }
}

fn signed(neg: bool, m: BigInt) -> BigInt {
    if neg {
        -m
    } else {
        m
    }
}

/// Bits of round(a·b + c).
pub fn fma_bits(a: u64, b: u64, c: u64, f: Fmt) -> u64 {
    let (sa, ma, ea) = split(a, f);
    let (sb, mb, eb) = split(b, f);
    let (sc, mc, ec) = split(c, f);
    let sign_shift = f.p - 1 + f.exp_bits;
    let prod_neg = sa != sb;
    let prod = signed(prod_neg, ma * mb);
    let ep = ea + eb;
    let cm = signed(sc, mc);
    let e = ep.min(ec);
    let sum = (prod.clone() << (ep - e) as usize) + (cm.clone() << (ec - e) as usize);
    if sum.is_zero() {
        // Exact zero: -0 only when both addends are negative zeros.
        let neg = prod.is_zero() && cm.is_zero() && prod_neg && sc;
        return (neg as u64) << sign_shift;
    }
    let neg = sum.is_negative();
    let mag = sum.abs();
    let bits = mag.bits() as i64;
    let q = (e + bits - f.p as i64).max(f.emin_ulp());
    let mut sig: BigInt;
    let mut q = q;
    if q > e {
        let s = (q - e) as usize;
        sig = &mag >> s;
        let rem = &mag - (&sig << s);
        let half = BigInt::from(1) << (s - 1);
        if rem > half || (rem == half && (&sig & BigInt::from(1)) == BigInt::from(1)) {
            sig += 1;
        }
    } else {
        sig = mag << (e - q) as usize;
    }
    if sig == BigInt::from(1) << f.p as usize {
        sig >>= 1;
        q += 1;
    }
    let sig: u64 = sig.try_into().unwrap();
    let hidden = 1u64 << (f.p - 1);
    let body = if sig < hidden {
        sig
    } else {
        let field = q + f.p as i64 - 1 + f.bias;
        if field >= f.max_exp_field() as i64 {
            f.max_exp_field() << (f.p - 1)
        } else {
            (field as u64) << (f.p - 1) | (sig - hidden)
        }
    };
    (neg as u64) << sign_shift | body
}
