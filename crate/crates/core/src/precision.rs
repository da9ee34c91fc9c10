//! Binary fixed-point numbers with 128 fractional bits.
//!
//! Every operation rounds its exact result to the nearest representable
//! value, ties to even. Used where scores are irrational (logarithms, square
//! roots); the exact Brier path never touches this type.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::OnceLock;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub const FRAC_BITS: u32 = 128;

/// Extra bits carried through series evaluation before the final rounding.
const GUARD_BITS: u32 = 32;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct HighPrecision {
    raw: BigInt,
}

/// `n / d` rounded to nearest, ties to even. `d` must be positive.
fn div_round(n: &BigInt, d: &BigInt) -> BigInt {
    let (q, r) = n.div_mod_floor(d);
    let twice = &r * 2u32;
    match twice.cmp(d) {
        Ordering::Less => q,
        Ordering::Greater => q + 1u32,
        Ordering::Equal => {
            if q.is_even() {
                q
            } else {
                q + 1u32
            }
        }
    }
}

fn shr_round(n: &BigInt, bits: u32) -> BigInt {
    div_round(n, &(BigInt::one() << bits))
}

/// `ln 2` scaled by `2^(FRAC_BITS + GUARD_BITS)`.
fn ln2_wide() -> &'static BigInt {
    static LN2: OnceLock<BigInt> = OnceLock::new();
    LN2.get_or_init(|| {
        let scale = FRAC_BITS + GUARD_BITS;
        let one = BigInt::one() << scale;
        // ln 2 = 2 atanh(1/3)
        atanh_wide(&(&one / 3u32), scale) * 2u32
    })
}

/// `atanh(z)` for `|z| ≤ 1/3`, both scaled by `2^scale`.
fn atanh_wide(z: &BigInt, scale: u32) -> BigInt {
    let z2 = (z * z) >> scale;
    let mut term = z.clone();
    let mut sum = BigInt::zero();
    let mut k = 1u32;
    while !term.is_zero() {
        sum += &term / k;
        term = (&term * &z2) >> scale;
        k += 2;
    }
    sum
}

impl HighPrecision {
    pub fn zero() -> Self {
        HighPrecision { raw: BigInt::zero() }
    }

    pub fn one() -> Self {
        HighPrecision {
            raw: BigInt::one() << FRAC_BITS,
        }
    }

    pub fn from_int(n: i64) -> Self {
        HighPrecision {
            raw: BigInt::from(n) << FRAC_BITS,
        }
    }

    pub fn from_raw(raw: BigInt) -> Self {
        HighPrecision { raw }
    }

    pub fn raw(&self) -> &BigInt {
        &self.raw
    }

    /// Smallest positive representable value.
    pub fn ulp() -> Self {
        HighPrecision { raw: BigInt::one() }
    }

    pub fn from_rational(x: &BigRational) -> Self {
        HighPrecision {
            raw: div_round(&(x.numer() << FRAC_BITS), x.denom()),
        }
    }

    /// Nearest representable value to a finite `f64`.
    pub fn from_f64(x: f64) -> Self {
        Self::from_rational(&BigRational::from_float(x).expect("finite"))
    }

    /// The exact rational value of this number.
    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.raw.clone(), BigInt::one() << FRAC_BITS)
    }

    pub fn to_f64(&self) -> f64 {
        let (sign, mag) = (self.raw.sign(), self.raw.magnitude());
        let bits = mag.bits();
        // Keep 64 significant bits, then scale.
        let shift = bits.saturating_sub(64);
        let top = (mag >> shift).to_u64().expect("fits in 64 bits") as f64;
        let v = top * 2f64.powi(shift as i32 - FRAC_BITS as i32);
        if sign == Sign::Minus {
            -v
        } else {
            v
        }
    }

    pub fn is_zero(&self) -> bool {
        self.raw.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.raw.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.raw.is_positive()
    }

    pub fn abs(&self) -> Self {
        HighPrecision { raw: self.raw.abs() }
    }

    pub fn div(&self, other: &Self) -> Self {
        assert!(!other.raw.is_zero(), "division by zero");
        let (n, d) = if other.raw.is_negative() {
            (-(&self.raw << FRAC_BITS), -&other.raw)
        } else {
            (&self.raw << FRAC_BITS, other.raw.clone())
        };
        HighPrecision { raw: div_round(&n, &d) }
    }

    pub fn sqrt(&self) -> Self {
        assert!(!self.raw.is_negative(), "square root of a negative number");
        let x = &self.raw << FRAC_BITS;
        let r = x.sqrt();
        // Round to nearest: r + 1 when x ≥ (r + 1/2)², i.e. 4x ≥ (2r + 1)².
        let twice = &r * 2u32 + 1u32;
        let raw = if &x * 4u32 >= &twice * &twice { r + 1u32 } else { r };
        HighPrecision { raw }
    }

    /// Natural logarithm of a positive number.
    pub fn ln(&self) -> Self {
        assert!(self.raw.is_positive(), "logarithm of a non-positive number");
        let scale = FRAC_BITS + GUARD_BITS;
        let wide = &self.raw << GUARD_BITS;
        // wide = 2^k · y · 2^scale with y ∈ [1, 2)
        let k = wide.bits() as i64 - 1 - scale as i64;
        let y = if k >= 0 {
            &wide >> (k as u32)
        } else {
            &wide << ((-k) as u32)
        };
        let one = BigInt::one() << scale;
        let z = ((&y - &one) << scale) / (&y + &one);
        let ln_y = atanh_wide(&z, scale) * 2u32;
        let total = ln_y + ln2_wide() * k;
        HighPrecision {
            raw: shr_round(&total, GUARD_BITS),
        }
    }

    /// Decimal rendering with `digits` fractional digits, rounded half to even.
    pub fn to_decimal(&self, digits: usize) -> String {
        let scaled = div_round(
            &(&self.raw * num_traits::pow(BigInt::from(10), digits)),
            &(BigInt::one() << FRAC_BITS),
        );
        let negative = scaled.is_negative();
        let mut s = scaled.abs().to_string();
        if s.len() <= digits {
            s = format!("{}{s}", "0".repeat(digits + 1 - s.len()));
        }
        let (int_part, frac_part) = s.split_at(s.len() - digits);
        let sign = if negative { "-" } else { "" };
        if digits == 0 {
            format!("{sign}{int_part}")
        } else {
            format!("{sign}{int_part}.{frac_part}")
        }
    }
}

impl fmt::Debug for HighPrecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal(40))
    }
}

impl fmt::Display for HighPrecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().unwrap_or(20);
        f.write_str(&self.to_decimal(digits))
    }
}

impl Add for &HighPrecision {
    type Output = HighPrecision;
    fn add(self, rhs: &HighPrecision) -> HighPrecision {
        HighPrecision {
            raw: &self.raw + &rhs.raw,
        }
    }
}

impl Add for HighPrecision {
    type Output = HighPrecision;
    fn add(self, rhs: HighPrecision) -> HighPrecision {
        HighPrecision {
            raw: self.raw + rhs.raw,
        }
    }
}

impl Sub for &HighPrecision {
    type Output = HighPrecision;
    fn sub(self, rhs: &HighPrecision) -> HighPrecision {
        HighPrecision {
            raw: &self.raw - &rhs.raw,
        }
    }
}

impl Sub for HighPrecision {
    type Output = HighPrecision;
    fn sub(self, rhs: HighPrecision) -> HighPrecision {
        HighPrecision {
            raw: self.raw - rhs.raw,
        }
    }
}

impl Mul for &HighPrecision {
    type Output = HighPrecision;
    fn mul(self, rhs: &HighPrecision) -> HighPrecision {
        HighPrecision {
            raw: shr_round(&(&self.raw * &rhs.raw), FRAC_BITS),
        }
    }
}

impl Mul for HighPrecision {
    type Output = HighPrecision;
    fn mul(self, rhs: HighPrecision) -> HighPrecision {
        &self * &rhs
    }
}

impl Neg for HighPrecision {
    type Output = HighPrecision;
    fn neg(self) -> HighPrecision {
        HighPrecision { raw: -self.raw }
    }
}

impl Neg for &HighPrecision {
    type Output = HighPrecision;
    fn neg(self) -> HighPrecision {
        HighPrecision { raw: -&self.raw }
    }
}

impl AddAssign<&HighPrecision> for HighPrecision {
    fn add_assign(&mut self, rhs: &HighPrecision) {
        self.raw += &rhs.raw;
    }
}

impl SubAssign<&HighPrecision> for HighPrecision {
    fn sub_assign(&mut self, rhs: &HighPrecision) {
        self.raw -= &rhs.raw;
    }
}

impl std::iter::Sum for HighPrecision {
    fn sum<I: Iterator<Item = HighPrecision>>(iter: I) -> HighPrecision {
        iter.fold(HighPrecision::zero(), |a, b| a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use proptest::prelude::*;

    fn close(a: &HighPrecision, b: f64, tol: f64) -> bool {
        (a.to_f64() - b).abs() <= tol
    }

    #[test]
    fn constants() {
        assert!(close(&HighPrecision::from_int(2).ln(), std::f64::consts::LN_2, 1e-15));
        assert!(close(
            &HighPrecision::from_int(2).sqrt(),
            std::f64::consts::SQRT_2,
            1e-15
        ));
        assert!(HighPrecision::one().ln().is_zero());
        assert_eq!(HighPrecision::from_int(4).sqrt(), HighPrecision::from_int(2));
        assert!(close(&HighPrecision::from_rational(&ratio(1, 3)), 1.0 / 3.0, 1e-16));
    }

    #[test]
    fn ln2_to_forty_digits() {
        let ln2 = HighPrecision::from_int(2).ln().to_decimal(36);
        assert_eq!(ln2, "0.693147180559945309417232121458176568");
    }

    #[test]
    fn rounding_is_half_even() {
        let half_ulp = BigRational::new(BigInt::one(), BigInt::one() << (FRAC_BITS + 1));
        assert!(HighPrecision::from_rational(&half_ulp).is_zero());
        let three_halves = &half_ulp * BigInt::from(3);
        assert_eq!(HighPrecision::from_rational(&three_halves).raw(), &BigInt::from(2));
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(HighPrecision::from_rational(&ratio(-3, 8)).to_decimal(4), "-0.3750");
        assert_eq!(HighPrecision::from_int(5).to_decimal(0), "5");
        assert_eq!(format!("{:.3}", HighPrecision::from_rational(&ratio(1, 32))), "0.031");
    }

    proptest! {
        #[test]
        fn ln_matches_f64(x in 1e-12f64..1e12) {
            let v = HighPrecision::from_f64(x).ln().to_f64();
            prop_assert!((v - x.ln()).abs() <= 1e-13 * (1.0 + x.ln().abs()));
        }

        #[test]
        fn ln_of_product_is_sum(a in 1u32..10_000, b in 1u32..10_000) {
            let x = HighPrecision::from_rational(&ratio(a as i64, 97));
            let y = HighPrecision::from_rational(&ratio(b as i64, 89));
            let lhs = (&x * &y).ln();
            let rhs = &x.ln() + &y.ln();
            prop_assert!((&lhs - &rhs).abs().to_f64() < 1e-30);
        }

        #[test]
        fn sqrt_squares_back(a in 0u64..u64::MAX) {
            let x = HighPrecision::from_rational(&ratio((a >> 1) as i64, 1 << 20));
            let r = x.sqrt();
            prop_assert!((&(&r * &r) - &x).abs().to_f64() <= 1e-25 * (1.0 + x.to_f64()));
        }

        #[test]
        fn div_inverts_mul(a in -1_000_000i64..1_000_000, b in 1i64..1_000_000) {
            let x = HighPrecision::from_rational(&ratio(a, 7));
            let y = HighPrecision::from_rational(&ratio(b, 13));
            let back = (&x * &y).div(&y);
            prop_assert!((&back - &x).abs().to_f64() < 1e-30);
        }
    }
}
