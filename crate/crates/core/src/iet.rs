//! Standard interval exchanges over exact rationals.

use crate::combinat::Perm;
use num_bigint::BigInt;
use crate::error::{Error, Result};
use crate::num::{format_rational, parse_rational, Rational};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::{HashMap, HashSet};

/// Half-open interval `[left, right)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Interval {
    pub left: Rational,
    pub right: Rational,
}

impl Interval {
    pub fn new(left: Rational, right: Rational) -> Result<Interval> {
        if left >= right {
            return Err(Error::Invalid(format!(
                "empty interval [{}, {})",
                format_rational(&left),
                format_rational(&right)
            )));
        }
        Ok(Interval { left, right })
    }

    pub fn len(&self) -> Rational {
        &self.right - &self.left
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.left <= x && x < &self.right
    }

    pub fn translate(&self, t: &Rational) -> Interval {
        Interval { left: &self.left + t, right: &self.right + t }
    }

    /// Nonempty intersection, if any.
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let l = (&self.left).max(&other.left).clone();
        let r = (&self.right).min(&other.right).clone();
        (l < r).then_some(Interval { left: l, right: r })
    }
}

/// Interval exchange `(λ, π)` with `Σ λ = 1`; `lambda` is indexed by letter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Iet {
    perm: Perm,
    lambda: Vec<Rational>,
    translation: Vec<Rational>,
}

pub fn build_iet(lambda: Vec<Rational>, perm: Perm) -> Result<Iet> {
    if lambda.len() != perm.d() {
        return Err(Error::DimensionMismatch { expected: perm.d(), got: lambda.len() });
    }
    if let Some(i) = lambda.iter().position(|x| !x.is_positive()) {
        return Err(Error::NonPositive(i));
    }
    let total: Rational = lambda.iter().sum();
    let lambda: Vec<Rational> = lambda.iter().map(|x| x / &total).collect();
    let translation = translation_by_sums(&perm, &lambda);
    Ok(Iet { perm, lambda, translation })
}

fn translation_by_sums(perm: &Perm, lambda: &[Rational]) -> Vec<Rational> {
    let pt = perm.top_positions();
    let pb = perm.bottom_positions();
    (0..perm.d())
        .map(|a| {
            let mut w = Rational::zero();
            for b in 0..perm.d() {
                if pb[b] < pb[a] {
                    w += &lambda[b];
                }
                if pt[b] < pt[a] {
                    w -= &lambda[b];
                }
            }
            w
        })
        .collect()
}

/// Outcome of a bounded Keane test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeaneResult {
    Pass,
    /// `T^steps(l_letter)` coincides with a discontinuity or another orbit point.
    Fail { letter: usize, steps: usize, hit: Rational },
}

/// One branch of a first-return map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReturnBranch {
    pub domain: Interval,
    pub time: u64,
    pub translation: Rational,
}

impl Iet {
    pub fn perm(&self) -> &Perm {
        &self.perm
    }

    pub fn d(&self) -> usize {
        self.perm.d()
    }

    pub fn lambda(&self) -> &[Rational] {
        &self.lambda
    }

    /// `w` computed from the defining double sum.
    pub fn translation_vector(&self) -> &[Rational] {
        &self.translation
    }

    /// `w = Ω_π λ`.
    pub fn translation_vector_omega(&self) -> Vec<Rational> {
        self.perm.omega_matrix().mul_vec_rat(&self.lambda)
    }

    /// Domain intervals `I_α`, indexed by letter.
    pub fn intervals(&self) -> Vec<Interval> {
        intervals_in_order(self.perm.top(), &self.lambda)
    }

    /// Image intervals `T(I_α)`, indexed by letter.
    pub fn image_intervals(&self) -> Vec<Interval> {
        intervals_in_order(self.perm.bottom(), &self.lambda)
    }

    /// Left endpoints `l_α` indexed by letter.
    pub fn left_endpoints(&self) -> Vec<Rational> {
        self.intervals().into_iter().map(|i| i.left).collect()
    }

    fn check_range(x: &Rational) -> Result<()> {
        if x.is_negative() || x >= &Rational::one() {
            return Err(Error::OutOfRange(format!("{} not in [0,1)", format_rational(x))));
        }
        Ok(())
    }

    pub fn letter_at(&self, x: &Rational) -> Result<usize> {
        Self::check_range(x)?;
        let mut acc = Rational::zero();
        for &a in self.perm.top() {
            acc += &self.lambda[a];
            if x < &acc {
                return Ok(a);
            }
        }
        unreachable!("lengths sum to one")
    }

    pub fn evaluate(&self, x: &Rational) -> Result<Rational> {
        let a = self.letter_at(x)?;
        Ok(x + &self.translation[a])
    }

    pub fn evaluate_inverse(&self, y: &Rational) -> Result<Rational> {
        Self::check_range(y)?;
        let mut acc = Rational::zero();
        for &a in self.perm.bottom() {
            acc += &self.lambda[a];
            if y < &acc {
                return Ok(y - &self.translation[a]);
            }
        }
        unreachable!("lengths sum to one")
    }

    /// Bounded Keane test on the orbits of the interior discontinuities.
    pub fn keane_check(&self, depth: usize) -> KeaneResult {
        let ends = self.left_endpoints();
        let interior: Vec<usize> = (0..self.d()).filter(|&a| self.perm.pos_top(a) != 1).collect();
        let disc: HashSet<&Rational> = interior.iter().map(|&a| &ends[a]).collect();
        let mut seen: HashMap<Rational, usize> = HashMap::new();
        for &a in &interior {
            let mut x = ends[a].clone();
            for k in 1..=depth {
                x = self.evaluate(&x).expect("orbit stays in [0,1)");
                if disc.contains(&x) {
                    return KeaneResult::Fail { letter: a, steps: k, hit: x };
                }
                match seen.get(&x) {
                    Some(&b) if b != a => return KeaneResult::Fail { letter: a, steps: k, hit: x },
                    _ => {
                        seen.insert(x.clone(), a);
                    }
                }
            }
        }
        KeaneResult::Pass
    }

    /// First-return map to `j` by exhaustive orbit computation. Adjacent
    /// branches with equal return time and translation are merged.
    pub fn first_return_map(&self, j: &Interval, max_time: u64) -> Result<Vec<ReturnBranch>> {
        if j.left.is_negative() || j.right > Rational::one() || j.left >= j.right {
            return Err(Error::OutOfRange("return interval must lie in [0,1)".into()));
        }
        // Everything is scaled to integers over a common denominator.
        let mut all: Vec<Rational> = self.lambda.clone();
        all.push(j.left.clone());
        all.push(j.right.clone());
        let den = crate::num::common_denominator(&all);
        let int = |x: &Rational| (x * &den).to_integer();
        let doms: Vec<(BigInt, BigInt)> = self.intervals().iter().map(|i| (int(&i.left), int(&i.right))).collect();
        let shifts: Vec<BigInt> = self.translation.iter().map(int).collect();
        let (jl, jr) = (int(&j.left), int(&j.right));
        // (domain left, image left, length)
        let mut live = vec![(jl.clone(), jl.clone(), &jr - &jl)];
        let mut raw: Vec<(BigInt, BigInt, u64, BigInt)> = Vec::new();
        let mut t = 0u64;
        while !live.is_empty() {
            if t >= max_time {
                return Err(Error::MaxTimeExceeded(max_time));
            }
            t += 1;
            let mut next = Vec::new();
            for (dom, img, len) in live {
                let img_r = &img + &len;
                for (a, (dl, dr)) in doms.iter().enumerate() {
                    let pl = (&img).max(dl).clone();
                    let pr = (&img_r).min(dr).clone();
                    if pl >= pr {
                        continue;
                    }
                    let sub = &dom + (&pl - &img);
                    let ml = &pl + &shifts[a];
                    let mr = &pr + &shifts[a];
                    let il = (&ml).max(&jl).clone();
                    let ir = (&mr).min(&jr).clone();
                    if ml < jl {
                        let r = (&mr).min(&jl).clone();
                        next.push((sub.clone(), ml.clone(), r - &ml));
                    }
                    if mr > jr {
                        let l = (&ml).max(&jr).clone();
                        next.push((&sub + (&l - &ml), l.clone(), &mr - &l));
                    }
                    if il < ir {
                        let d0 = &sub + (&il - &ml);
                        raw.push((d0.clone(), &ir - &il, t, &il - &d0));
                    }
                }
            }
            live = next;
        }
        let back = |x: BigInt| Rational::new(x, den.clone());
        let mut done: Vec<ReturnBranch> = raw
            .into_iter()
            .map(|(l, len, time, tr)| ReturnBranch {
                domain: Interval { left: back(l.clone()), right: back(l + len) },
                time,
                translation: back(tr),
            })
            .collect();
        done.sort_by(|a, b| a.domain.left.cmp(&b.domain.left));
        let mut merged: Vec<ReturnBranch> = Vec::new();
        for br in done {
            match merged.last_mut() {
                Some(last)
                    if last.domain.right == br.domain.left
                        && last.time == br.time
                        && last.translation == br.translation =>
                {
                    last.domain.right = br.domain.right;
                }
                _ => merged.push(br),
            }
        }
        Ok(merged)
    }

    pub fn descriptor(&self) -> IetDescriptor {
        IetDescriptor { perm: self.perm.clone(), lambda: self.lambda.iter().map(format_rational).collect() }
    }
}

fn intervals_in_order(row: &[usize], lambda: &[Rational]) -> Vec<Interval> {
    let mut out = vec![Interval { left: Rational::zero(), right: Rational::zero() }; lambda.len()];
    let mut acc = Rational::zero();
    for &a in row {
        let next = &acc + &lambda[a];
        out[a] = Interval { left: acc, right: next.clone() };
        acc = next;
    }
    out
}

/// Wire form `{"perm": {...}, "lambda": ["1/3", "2/3"]}`; lengths follow
/// the alphabet order, which is the top row of `perm`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IetDescriptor {
    pub perm: Perm,
    pub lambda: Vec<String>,
}

impl IetDescriptor {
    pub fn build(&self) -> Result<Iet> {
        let lambda = self.lambda.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>>>()?;
        build_iet(lambda, self.perm.clone())
    }
}

impl Serialize for Iet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let p = self.perm.with_top_alphabet();
        let lambda = self.perm.top().iter().map(|&a| format_rational(&self.lambda[a])).collect();
        IetDescriptor { perm: p, lambda }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Iet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Iet, D::Error> {
        IetDescriptor::deserialize(d)?.build().map_err(serde::de::Error::custom)
    }
}
