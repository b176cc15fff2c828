use super::Rational;
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Square matrix of big integers, row-major, indexed by letter.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntMatrix {
    d: usize,
    a: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(d: usize) -> Self {
        IntMatrix { d, a: vec![BigInt::zero(); d * d] }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            m.a[i * d + i] = BigInt::one();
        }
        m
    }

    /// `I + E_{i,j}`.
    pub fn elementary(d: usize, i: usize, j: usize) -> Self {
        let mut m = Self::identity(d);
        m.a[i * d + j] += 1;
        m
    }

    pub fn from_rows(rows: Vec<Vec<BigInt>>) -> Self {
        let d = rows.len();
        assert!(rows.iter().all(|r| r.len() == d), "matrix must be square");
        IntMatrix { d, a: rows.into_iter().flatten().collect() }
    }

    pub fn from_i64(rows: &[&[i64]]) -> Self {
        Self::from_rows(rows.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.a[i * self.d + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.a[i * self.d + j] = v;
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.a[i * self.d..(i + 1) * self.d]
    }

    pub fn column(&self, j: usize) -> Vec<BigInt> {
        (0..self.d).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn rows(&self) -> Vec<Vec<BigInt>> {
        (0..self.d).map(|i| self.row(i).to_vec()).collect()
    }

    /// Column `dst += k * column src`, i.e. right multiplication by `I + k E_{src,dst}`.
    pub fn add_column(&mut self, dst: usize, src: usize, k: &BigInt) {
        if k.is_zero() {
            return;
        }
        for i in 0..self.d {
            let v = &self.a[i * self.d + src] * k;
            self.a[i * self.d + dst] += v;
        }
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.d, other.d);
        let d = self.d;
        let mut out = IntMatrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let x = self.get(i, k);
                if x.is_zero() {
                    continue;
                }
                for j in 0..d {
                    let y = other.get(k, j);
                    if !y.is_zero() {
                        out.a[i * d + j] += x * y;
                    }
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> IntMatrix {
        let d = self.d;
        let mut out = IntMatrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.a[j * d + i] = self.get(i, j).clone();
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        (0..self.d).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// `Mᵀ v`.
    pub fn tmul_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        (0..self.d)
            .map(|j| (0..self.d).map(|i| self.get(i, j) * &v[i]).sum())
            .collect()
    }

    pub fn mul_vec_rat(&self, v: &[Rational]) -> Vec<Rational> {
        (0..self.d)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .map(|(a, b)| Rational::from_integer(a.clone()) * b)
                    .sum()
            })
            .collect()
    }

    pub fn tmul_vec_rat(&self, v: &[Rational]) -> Vec<Rational> {
        (0..self.d)
            .map(|j| {
                (0..self.d)
                    .map(|i| Rational::from_integer(self.get(i, j).clone()) * &v[i])
                    .sum()
            })
            .collect()
    }

    pub fn to_rational(&self) -> Vec<Vec<Rational>> {
        (0..self.d)
            .map(|i| self.row(i).iter().map(|x| Rational::from_integer(x.clone())).collect())
            .collect()
    }

    /// Exact solve of `M x = b`; `None` when singular.
    pub fn solve(&self, b: &[Rational]) -> Option<Vec<Rational>> {
        super::solve(&self.to_rational(), b)
    }

    /// Determinant by fraction-free (Bareiss) elimination.
    pub fn det(&self) -> BigInt {
        let d = self.d;
        if d == 0 {
            return BigInt::one();
        }
        let mut m = self.rows();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..d - 1 {
            if m[k][k].is_zero() {
                match (k + 1..d).find(|&i| !m[i][k].is_zero()) {
                    Some(p) => {
                        m.swap(k, p);
                        sign = -sign;
                    }
                    None => return BigInt::zero(),
                }
            }
            for i in k + 1..d {
                for j in k + 1..d {
                    let v = (&m[i][j] * &m[k][k] - &m[i][k] * &m[k][j]) / &prev;
                    m[i][j] = v;
                }
            }
            prev = m[k][k].clone();
        }
        sign * &m[d - 1][d - 1]
    }

    pub fn is_positive(&self) -> bool {
        self.a.iter().all(|x| x.is_positive())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.a.iter().all(|x| !x.is_negative())
    }

    pub fn max_bits(&self) -> u64 {
        self.a.iter().map(|x| x.bits()).max().unwrap_or(0)
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}
