//! Number tower: exact rationals, big-integer matrices, and a
//! fixed-precision binary float used by the affine code paths.

mod matrix;
mod real;

pub use matrix::IntMatrix;
pub use real::{BigReal, DEFAULT_PRECISION};

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub fn rat(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

pub fn rat_int(p: impl Into<BigInt>) -> Rational {
    Rational::from_integer(p.into())
}

/// Parses `"p/q"`, `"p"` or a plain decimal such as `"0.25"`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((ip, fp)) = s.split_once('.') {
        let neg = ip.starts_with('-');
        let digits = format!("{}{}", ip.trim_start_matches(['-', '+']), fp);
        let n: BigInt = digits.parse().map_err(|_| bad())?;
        let den = num_traits::pow(BigInt::from(10), fp.len());
        let r = Rational::new(n, den);
        return Ok(if neg { -r } else { r });
    }
    let p: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(p))
}

pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Natural log of a positive big integer, accurate to f64 precision.
pub fn ln_bigint(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().map(f64::ln).unwrap_or(f64::NAN);
    }
    let shift = bits - 64;
    let top: BigInt = x >> shift;
    top.to_f64().unwrap().ln() + (shift as f64) * std::f64::consts::LN_2
}

/// Natural log of a positive rational.
pub fn ln_rational(x: &Rational) -> f64 {
    ln_bigint(x.numer()) - ln_bigint(x.denom())
}

pub fn rational_to_f64(x: &Rational) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let s = if x.is_negative() { -1.0 } else { 1.0 };
    s * ln_rational(&x.abs()).exp()
}

/// Lcm of the denominators of a rational vector.
pub fn common_denominator(v: &[Rational]) -> BigInt {
    v.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()))
}

pub fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Reduced row-echelon form over the rationals. Columns are scanned in the
/// given order; returns the pivot columns in the order found.
pub fn rref(m: &mut [Vec<Rational>], col_order: &[usize]) -> Vec<usize> {
    let rows = m.len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for &c in col_order {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                let (head, tail) = if i < r {
                    let (a, b) = m.split_at_mut(r);
                    (&mut a[i], &b[0])
                } else {
                    let (a, b) = m.split_at_mut(i);
                    (&mut b[0], &a[r])
                };
                for (x, y) in head.iter_mut().zip(tail.iter()) {
                    *x -= &f * y;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Rational null space of `m` (rows × cols). Pivots are chosen scanning
/// columns from the right, so free variables are the leftmost columns.
pub fn null_space(m: &[Vec<Rational>], cols: usize) -> Vec<Vec<Rational>> {
    let mut a: Vec<Vec<Rational>> = m.to_vec();
    let order: Vec<usize> = (0..cols).rev().collect();
    let pivots = rref(&mut a, &order);
    let mut basis = Vec::new();
    for free in (0..cols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![Rational::zero(); cols];
        v[free] = Rational::one();
        for (row, &pc) in pivots.iter().enumerate() {
            v[pc] = -a[row][free].clone();
        }
        basis.push(v);
    }
    basis
}

/// Solves the square system `a x = b` exactly. Returns `None` if singular.
pub fn solve(a: &[Vec<Rational>], b: &[Rational]) -> Option<Vec<Rational>> {
    let n = b.len();
    let mut m: Vec<Vec<Rational>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    let order: Vec<usize> = (0..n).collect();
    let piv = rref(&mut m, &order);
    if piv.len() < n {
        return None;
    }
    Some(m.into_iter().map(|mut r| r.pop().unwrap()).collect())
}

/// Scales a rational vector to a content-free integer vector whose first
/// nonzero entry is positive.
pub fn primitive_integer(v: &[Rational]) -> Vec<BigInt> {
    let den = common_denominator(v);
    let mut w: Vec<BigInt> = v.iter().map(|x| (x * &den).to_integer()).collect();
    let g = w.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    if !g.is_zero() {
        for x in w.iter_mut() {
            *x = &*x / &g;
        }
    }
    if w.iter().find(|x| !x.is_zero()).is_some_and(|x| x.is_negative()) {
        for x in w.iter_mut() {
            *x = -&*x;
        }
    }
    w
}

/// Deterministic generator for sample `index` of a run seeded by `seed`.
pub fn sample_rng(seed: u64, index: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform point of the open simplex with denominator `2^bits`, from the
/// spacings of `d - 1` sorted uniform integers.
pub fn random_simplex_point(rng: &mut impl rand::Rng, d: usize, bits: u64) -> Vec<Rational> {
    use num_bigint::RandBigInt;
    let top = BigInt::one() << bits;
    loop {
        let mut cuts: Vec<BigInt> = (0..d - 1).map(|_| rng.gen_bigint_range(&BigInt::zero(), &top)).collect();
        cuts.push(BigInt::zero());
        cuts.push(top.clone());
        cuts.sort();
        let gaps: Vec<BigInt> = cuts.windows(2).map(|w| &w[1] - &w[0]).collect();
        if gaps.iter().all(|g| g.is_positive()) {
            return gaps.into_iter().map(|g| Rational::new(g, top.clone())).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_points_sum_to_one() {
        let mut rng = sample_rng(3, 1);
        let p = random_simplex_point(&mut rng, 5, 80);
        assert_eq!(p.iter().sum::<Rational>(), Rational::one());
        assert!(p.iter().all(|x| x.is_positive()));
        let again = random_simplex_point(&mut sample_rng(3, 1), 5, 80);
        assert_eq!(p, again);
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rational("2/4").unwrap(), rat(1, 2));
        assert_eq!(parse_rational("-0.25").unwrap(), rat(-1, 4));
        assert_eq!(parse_rational("7").unwrap(), rat(7, 1));
        assert!(parse_rational("1/0").is_err());
        assert_eq!(format_rational(&rat(6, 4)), "3/2");
        assert_eq!(format_rational(&rat(4, 4)), "1");
    }

    #[test]
    fn ln_of_huge_integer() {
        let x = num_traits::pow(BigInt::from(3), 2000);
        let want = 2000.0 * 3f64.ln();
        assert!((ln_bigint(&x) - want).abs() < 1e-9 * want);
    }

    #[test]
    fn null_space_of_rank_one() {
        let m = vec![vec![rat(1, 1), rat(1, 1), rat(1, 1)]];
        let k = null_space(&m, 3);
        assert_eq!(k.len(), 2);
        for v in &k {
            assert!(v.iter().sum::<Rational>().is_zero());
        }
    }

    #[test]
    fn solve_small() {
        let a = vec![vec![rat(2, 1), rat(1, 1)], vec![rat(1, 1), rat(3, 1)]];
        let x = solve(&a, &[rat(3, 1), rat(5, 1)]).unwrap();
        assert_eq!(x, vec![rat(4, 5), rat(7, 5)]);
        let s = vec![vec![rat(1, 1), rat(2, 1)], vec![rat(2, 1), rat(4, 1)]];
        assert!(solve(&s, &[rat(1, 1), rat(1, 1)]).is_none());
    }
}
