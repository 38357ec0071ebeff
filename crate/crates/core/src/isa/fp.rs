//! RISC-V floating-point value semantics on top of host IEEE-754 arithmetic.
//!
//! Host `+ - * / sqrt mul_add` are correctly rounded to nearest-even, which is
//! the only dynamic rounding mode modeled. What the host does not give us is
//! RISC-V's NaN handling: results are canonical NaNs, single-precision values
//! live NaN-boxed in 64-bit registers, and min/max/conversions have
//! ISA-specific edge cases.

pub const CANONICAL_NAN_S: u32 = 0x7fc0_0000;
pub const CANONICAL_NAN_D: u64 = 0x7ff8_0000_0000_0000;
const BOX_MASK: u64 = 0xffff_ffff_0000_0000;

#[inline]
pub fn box_s(bits: u32) -> u64 {
    BOX_MASK | bits as u64
}

/// Reads a single-precision value from a register; improperly boxed values
/// read as the canonical NaN.
#[inline]
pub fn unbox_s(reg: u64) -> f32 {
    if reg & BOX_MASK == BOX_MASK {
        f32::from_bits(reg as u32)
    } else {
        f32::from_bits(CANONICAL_NAN_S)
    }
}

#[inline]
pub fn canon_s(v: f32) -> u64 {
    if v.is_nan() {
        box_s(CANONICAL_NAN_S)
    } else {
        box_s(v.to_bits())
    }
}

#[inline]
pub fn canon_d(v: f64) -> u64 {
    if v.is_nan() {
        CANONICAL_NAN_D
    } else {
        v.to_bits()
    }
}

macro_rules! minmax {
    ($name:ident, $t:ty, $is_min:expr) => {
        /// IEEE 754-2019 minimumNumber/maximumNumber as RISC-V defines them:
        /// a single NaN operand is ignored and -0 orders below +0.
        pub fn $name(a: $t, b: $t) -> $t {
            match (a.is_nan(), b.is_nan()) {
                (true, true) => <$t>::NAN,
                (true, false) => b,
                (false, true) => a,
                _ => {
                    if a == b {
                        // only differ in sign of zero
                        let a_neg = a.is_sign_negative();
                        if a_neg == $is_min {
                            a
                        } else {
                            b
                        }
                    } else if (a < b) == $is_min {
                        a
                    } else {
                        b
                    }
                }
            }
        }
    };
}

minmax!(fmin_f32, f32, true);
minmax!(fmax_f32, f32, false);
minmax!(fmin_f64, f64, true);
minmax!(fmax_f64, f64, false);

/// Rounds to an integral value per a static rounding-mode field.
pub fn round_by_mode(v: f64, rm: u8) -> f64 {
    match rm {
        0b001 => v.trunc(),
        0b010 => v.floor(),
        0b011 => v.ceil(),
        0b100 => v.round(),
        // RNE and dynamic (frm is RNE)
        _ => v.round_ties_even(),
    }
}

/// Float to signed integer with RISC-V saturation: NaN and +overflow give
/// the maximum, -overflow the minimum.
pub fn to_signed(v: f64, rm: u8, bits: u32) -> i64 {
    let max = ((1u64 << (bits - 1)) - 1) as i64;
    let min = -max - 1;
    if v.is_nan() {
        return max;
    }
    let r = round_by_mode(v, rm);
    if r >= max as f64 + 1.0 {
        max
    } else if r < min as f64 {
        min
    } else {
        r as i64
    }
}

/// Float to unsigned integer with RISC-V saturation.
pub fn to_unsigned(v: f64, rm: u8, bits: u32) -> u64 {
    let max = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
    if v.is_nan() {
        return max;
    }
    let r = round_by_mode(v, rm);
    if r <= -1.0 {
        0
    } else if r >= max as f64 + 1.0 || (bits == 64 && r >= 18_446_744_073_709_551_616.0) {
        max
    } else if r < 0.0 {
        0
    } else {
        r as u64
    }
}

/// `fclass` result mask.
pub fn classify_bits(sign: bool, exp_all_ones: bool, exp_zero: bool, mant_zero: bool, quiet: bool) -> u64 {
    let bit = match (exp_all_ones, exp_zero, mant_zero) {
        (true, _, true) => {
            if sign {
                0
            } else {
                7
            }
        }
        (true, _, false) => {
            if quiet {
                9
            } else {
                8
            }
        }
        (false, true, true) => {
            if sign {
                3
            } else {
                4
            }
        }
        (false, true, false) => {
            if sign {
                2
            } else {
                5
            }
        }
        _ => {
            if sign {
                1
            } else {
                6
            }
        }
    };
    1 << bit
}

pub fn fclass_s(v: f32) -> u64 {
    let b = v.to_bits();
    let exp = (b >> 23) & 0xff;
    let mant = b & 0x7f_ffff;
    classify_bits(b >> 31 != 0, exp == 0xff, exp == 0, mant == 0, mant & 0x40_0000 != 0)
}

pub fn fclass_d(v: f64) -> u64 {
    let b = v.to_bits();
    let exp = (b >> 52) & 0x7ff;
    let mant = b & 0xf_ffff_ffff_ffff;
    classify_bits(b >> 63 != 0, exp == 0x7ff, exp == 0, mant == 0, mant & (1 << 51) != 0)
}
