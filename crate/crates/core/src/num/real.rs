use super::Rational;
use crate::error::{Error, Result};
use astro_float::{BigFloat, Consts, Radix, RoundingMode, Sign};
use num_bigint::{BigInt, Sign as BSign};
use num_traits::Zero;
use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub const DEFAULT_PRECISION: usize = 256;

const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constant cache"));
}

fn with_cc<T>(f: impl FnOnce(&mut Consts) -> T) -> T {
    CONSTS.with(|c| f(&mut c.borrow_mut()))
}

/// Binary floating-point number with a recorded mantissa width. Every
/// operation rounds to nearest at the wider of its operands' precisions.
#[derive(Clone)]
pub struct BigReal {
    x: BigFloat,
    p: usize,
}

impl BigReal {
    fn wrap(x: BigFloat, p: usize) -> Self {
        debug_assert!(!x.is_nan(), "BigReal produced NaN");
        BigReal { x, p }
    }

    pub fn zero(p: usize) -> Self {
        Self::wrap(BigFloat::from_word(0, p), p)
    }

    pub fn one(p: usize) -> Self {
        Self::wrap(BigFloat::from_word(1, p), p)
    }

    pub fn from_i64(v: i64, p: usize) -> Self {
        Self::wrap(BigFloat::from_i64(v, p), p)
    }

    pub fn from_f64(v: f64, p: usize) -> Self {
        Self::wrap(BigFloat::from_f64(v, p), p)
    }

    pub fn from_bigint(v: &BigInt, p: usize) -> Self {
        if v.is_zero() {
            return Self::zero(p);
        }
        let (sign, words) = v.to_u64_digits();
        let s = if sign == BSign::Minus { Sign::Neg } else { Sign::Pos };
        let e = (words.len() * 64) as i32;
        let mut x = BigFloat::from_words(&words, s, e);
        x.set_precision(p, RM).expect("precision");
        Self::wrap(x, p)
    }

    pub fn from_rational(r: &Rational, p: usize) -> Self {
        let n = Self::from_bigint(r.numer(), p + 64);
        let d = Self::from_bigint(r.denom(), p + 64);
        Self::wrap(n.x.div(&d.x, p, RM), p)
    }

    pub fn parse(s: &str, p: usize) -> Result<Self> {
        let x = with_cc(|cc| BigFloat::parse(s.trim(), Radix::Dec, p, RM, cc));
        if x.is_nan() || x.is_inf() {
            return Err(Error::Parse(format!("not a real number: {s:?}")));
        }
        Ok(Self::wrap(x, p))
    }

    pub fn precision(&self) -> usize {
        self.p
    }

    pub fn with_precision(&self, p: usize) -> Self {
        let mut x = self.x.clone();
        x.set_precision(p, RM).expect("precision");
        Self::wrap(x, p)
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        !self.x.is_inf() && !self.x.is_nan()
    }

    pub fn is_negative(&self) -> bool {
        !self.x.is_zero() && self.x.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        !self.x.is_zero() && self.x.is_positive()
    }

    pub fn abs(&self) -> Self {
        Self::wrap(self.x.abs(), self.p)
    }

    pub fn exp(&self) -> Self {
        let x = with_cc(|cc| self.x.exp(self.p, RM, cc));
        Self::wrap(x, self.p)
    }

    pub fn ln(&self) -> Self {
        let x = with_cc(|cc| self.x.ln(self.p, RM, cc));
        Self::wrap(x, self.p)
    }

    pub fn sqrt(&self) -> Self {
        Self::wrap(self.x.sqrt(self.p, RM), self.p)
    }

    pub fn recip(&self) -> Self {
        Self::wrap(self.x.reciprocal(self.p, RM), self.p)
    }

    pub fn floor(&self) -> Self {
        Self::wrap(self.x.floor(), self.p)
    }

    pub fn mul_i64(&self, k: i64) -> Self {
        self * &BigReal::from_i64(k, self.p)
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    /// Binary exponent `e` with `2^(e-1) <= |x| < 2^e`; `None` for zero.
    pub fn exponent(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else {
            self.x.exponent().map(|e| e as i64)
        }
    }

    /// `log2 |x|` to double precision, valid far outside the f64 range.
    pub fn log2_abs(&self) -> f64 {
        match self.x.as_raw_parts() {
            Some((m, _, _, e, _)) if !self.x.is_zero() => {
                let top = *m.last().unwrap() as f64;
                let next = if m.len() > 1 { m[m.len() - 2] as f64 } else { 0.0 };
                (top + next / 18446744073709551616.0).log2() + (e as f64 - 64.0)
            }
            _ => f64::NEG_INFINITY,
        }
    }

    pub fn ln_f64(&self) -> f64 {
        self.log2_abs() * std::f64::consts::LN_2
    }

    pub fn to_f64(&self) -> f64 {
        match self.x.as_raw_parts() {
            Some((m, _, s, e, _)) if !self.x.is_zero() => {
                let top = *m.last().unwrap() as f64;
                let next = if m.len() > 1 { m[m.len() - 2] as f64 } else { 0.0 };
                let v = ldexp(top + next / 18446744073709551616.0, e as i64 - 64);
                if s == Sign::Neg {
                    -v
                } else {
                    v
                }
            }
            _ => 0.0,
        }
    }

    /// Exact value of the stored binary number.
    pub fn to_rational(&self) -> Rational {
        match self.x.as_raw_parts() {
            Some((m, _, s, e, _)) if !self.x.is_zero() => {
                let mant = BigInt::from_slice(
                    BSign::Plus,
                    &m.iter().flat_map(|w| [*w as u32, (*w >> 32) as u32]).collect::<Vec<_>>(),
                );
                let shift = e as i64 - 64 * m.len() as i64;
                let mut r = Rational::from_integer(mant);
                let two = BigInt::from(2);
                if shift >= 0 {
                    r *= Rational::from_integer(num_traits::pow(two, shift as usize));
                } else {
                    r /= Rational::from_integer(num_traits::pow(two, (-shift) as usize));
                }
                if s == Sign::Neg {
                    -r
                } else {
                    r
                }
            }
            _ => Rational::zero(),
        }
    }

    /// Relative unit of the working precision, `2^(1-p)`.
    pub fn ulp_rel(p: usize) -> BigReal {
        let mut x = BigFloat::from_word(1, p);
        x.set_exponent(2 - p as i32);
        Self::wrap(x, p)
    }

    pub fn pow2(k: i64, p: usize) -> BigReal {
        let mut x = BigFloat::from_word(1, p);
        x.set_exponent((k + 1) as i32);
        Self::wrap(x, p)
    }

    pub fn to_decimal_string(&self) -> String {
        if self.is_zero() {
            return "0.0".into();
        }
        format!("{}", self.x)
    }

    pub fn sum<'a>(it: impl IntoIterator<Item = &'a BigReal>, p: usize) -> BigReal {
        it.into_iter().fold(BigReal::zero(p), |acc, x| &acc + x)
    }
}

fn ldexp(mut x: f64, mut k: i64) -> f64 {
    while k > 1000 {
        x *= 2f64.powi(1000);
        k -= 1000;
    }
    while k < -1000 {
        x *= 2f64.powi(-1000);
        k += 1000;
    }
    x * 2f64.powi(k as i32)
}

impl fmt::Debug for BigReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}", self.to_f64())
    }
}

impl fmt::Display for BigReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal_string())
    }
}

impl PartialEq for BigReal {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for BigReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.x.cmp(&other.x).map(|c| c.cmp(&0))
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident) => {
        impl $tr<&BigReal> for &BigReal {
            type Output = BigReal;
            fn $m(self, rhs: &BigReal) -> BigReal {
                let p = self.p.max(rhs.p);
                BigReal::wrap(self.x.$m(&rhs.x, p, RM), p)
            }
        }
        impl $tr<BigReal> for BigReal {
            type Output = BigReal;
            fn $m(self, rhs: BigReal) -> BigReal {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&BigReal> for BigReal {
            type Output = BigReal;
            fn $m(self, rhs: &BigReal) -> BigReal {
                (&self).$m(rhs)
            }
        }
        impl $tr<BigReal> for &BigReal {
            type Output = BigReal;
            fn $m(self, rhs: BigReal) -> BigReal {
                self.$m(&rhs)
            }
        }
    };
}

binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);
binop!(Div, div);

impl Neg for BigReal {
    type Output = BigReal;
    fn neg(self) -> BigReal {
        BigReal::wrap(self.x.neg(), self.p)
    }
}

impl Neg for &BigReal {
    type Output = BigReal;
    fn neg(self) -> BigReal {
        BigReal::wrap(self.x.clone().neg(), self.p)
    }
}

impl From<&BigReal> for f64 {
    fn from(x: &BigReal) -> f64 {
        x.to_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rat;

    #[test]
    fn exact_round_trip_of_dyadics() {
        let r = rat(-3, 8);
        let x = BigReal::from_rational(&r, 128);
        assert_eq!(x.to_rational(), r);
        assert_eq!(x.to_f64(), -0.375);
        let big = num_traits::pow(BigInt::from(7), 300);
        let y = BigReal::from_bigint(&big, 1024);
        assert_eq!(y.to_rational(), Rational::from_integer(big));
    }

    #[test]
    fn exp_ln_inverse() {
        let x = BigReal::parse("0.7", 256).unwrap();
        let y = x.exp().ln();
        let err = (&y - &x).abs();
        assert!(err.log2_abs() < -240.0);
    }

    #[test]
    fn tiny_magnitudes() {
        let x = BigReal::pow2(-5000, 128);
        assert!((x.log2_abs() + 5000.0).abs() < 1e-9);
        assert_eq!(x.to_f64(), 0.0);
        assert!(BigReal::ulp_rel(256).log2_abs() < -254.0);
    }

    #[test]
    fn ordering() {
        let a = BigReal::from_i64(2, 64);
        let b = BigReal::from_f64(2.5, 64);
        assert!(a < b);
        assert!(-&b < a);
        assert!(BigReal::zero(64).is_zero());
    }
}
