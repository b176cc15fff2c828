//! Rauzy–Veech induction, Zorich acceleration, and the lengths and heights
//! cocycles over exact big integers.

use crate::combinat::{Perm, RvType};
use crate::error::{Error, Result};
use crate::iet::{build_iet, Iet};
use crate::num::{common_denominator, IntMatrix, Rational};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// Default cap on the bit size of cocycle entries.
pub const DEFAULT_ENTRY_BITS: u64 = 1_000_000;

/// One Rauzy–Veech move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RvStep {
    pub eps: RvType,
    pub winner: usize,
    pub loser: usize,
}

impl RvStep {
    /// `A = I + E_{winner, loser}`.
    pub fn matrix(&self, d: usize) -> IntMatrix {
        IntMatrix::elementary(d, self.winner, self.loser)
    }
}

fn compare_last(perm: &Perm, len: &[impl Ord]) -> Ordering {
    len[perm.alpha_t()].cmp(&len[perm.alpha_b()])
}

pub fn rv_type(t: &Iet) -> Result<RvType> {
    match compare_last(t.perm(), t.lambda()) {
        Ordering::Greater => Ok(RvType::Top),
        Ordering::Less => Ok(RvType::Bottom),
        Ordering::Equal => Err(Error::NotRenormalizable { step: 0 }),
    }
}

fn winner_loser(perm: &Perm, eps: RvType) -> (usize, usize) {
    match eps {
        RvType::Top => (perm.alpha_t(), perm.alpha_b()),
        RvType::Bottom => (perm.alpha_b(), perm.alpha_t()),
    }
}

/// One induction step followed by rescaling to unit length.
pub fn rv_step(t: &Iet) -> Result<(Iet, RvStep)> {
    let eps = rv_type(t)?;
    let (winner, loser) = winner_loser(t.perm(), eps);
    let mut lambda = t.lambda().to_vec();
    let l = lambda[loser].clone();
    lambda[winner] -= l;
    let next = build_iet(lambda, t.perm().successor(eps))?;
    Ok((next, RvStep { eps, winner, loser }))
}

/// The preimage of `t` under a move of type `eps`, if the combinatorics
/// admit one. Lengths are returned normalized.
pub fn rv_preimage(t: &Iet, eps: RvType) -> Option<Iet> {
    let prev = t.perm().predecessor(eps)?;
    let (winner, loser) = winner_loser(&prev, eps);
    let mut lambda = t.lambda().to_vec();
    let l = lambda[loser].clone();
    lambda[winner] += l;
    build_iet(lambda, prev).ok()
}

/// Data of one Zorich block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockData {
    pub z: u64,
    pub eps: RvType,
    pub winner: usize,
    pub first_loser: usize,
    /// Number of times each letter lost in the block.
    pub loss_counts: Vec<u64>,
    pub perm_before: Perm,
    pub perm_after: Perm,
}

impl BlockData {
    /// Product of the block's elementary matrices, `I + Σ k_l E_{w,l}`.
    pub fn matrix(&self) -> IntMatrix {
        let d = self.loss_counts.len();
        let mut m = IntMatrix::identity(d);
        for (l, &k) in self.loss_counts.iter().enumerate() {
            if k > 0 {
                m.set(self.winner, l, BigInt::from(k));
            }
        }
        m
    }

    /// Applies `Bᵀ` of this block to a covector in place.
    pub fn transpose_apply<T>(&self, v: &mut [T])
    where
        T: Clone + for<'a> std::ops::AddAssign<&'a T> + for<'a> std::ops::Mul<&'a BigInt, Output = T>,
    {
        let w = v[self.winner].clone();
        for (l, &k) in self.loss_counts.iter().enumerate() {
            if k > 0 {
                let add = w.clone() * &BigInt::from(k);
                v[l] += &add;
            }
        }
    }
}

/// Runs one Zorich block on integer lengths `len`, updating them to
/// `B⁻¹ len`. `rv_done` only labels the tie error.
pub fn zorich_block(perm: &Perm, len: &mut [BigInt], rv_done: u64) -> Result<BlockData> {
    let eps = match compare_last(perm, len) {
        Ordering::Greater => RvType::Top,
        Ordering::Less => RvType::Bottom,
        Ordering::Equal => return Err(Error::NotRenormalizable { step: rv_done }),
    };
    let d = perm.d();
    let (winner, first_loser) = winner_loser(perm, eps);
    let mut moving: Vec<usize> = match eps {
        RvType::Top => perm.bottom().to_vec(),
        RvType::Bottom => perm.top().to_vec(),
    };
    let wpos = moving.iter().position(|&x| x == winner).unwrap();
    let mut tail: Vec<usize> = moving[wpos + 1..].to_vec();
    let m = tail.len();
    let mut counts = vec![0u64; d];
    let s: BigInt = tail.iter().map(|&a| &len[a]).sum();
    let mut z: u64 = 0;

    let cycles = ((&len[winner] - 1u32) / &s - 1u32).max(BigInt::zero());
    if cycles.is_positive() {
        let c = cycles
            .to_u64()
            .filter(|c| c.checked_mul(m as u64).is_some())
            .ok_or_else(|| Error::ResourceGuard("Zorich block length exceeds u64".into()))?;
        len[winner] -= &s * &cycles;
        for &a in &tail {
            counts[a] += c;
        }
        z += c * m as u64;
    }
    loop {
        let last = *tail.last().unwrap();
        match len[winner].cmp(&len[last]) {
            Ordering::Greater => {
                let v = len[last].clone();
                len[winner] -= v;
                counts[last] += 1;
                z += 1;
                tail.rotate_right(1);
            }
            Ordering::Equal => return Err(Error::NotRenormalizable { step: rv_done + z }),
            Ordering::Less => break,
        }
    }
    moving.truncate(wpos + 1);
    moving.extend(tail);
    let (top, bottom) = match eps {
        RvType::Top => (perm.top().to_vec(), moving),
        RvType::Bottom => (moving, perm.bottom().to_vec()),
    };
    let perm_after = Perm::new(perm.alphabet().to_vec(), top, bottom)?;
    Ok(BlockData { z, eps, winner, first_loser, loss_counts: counts, perm_before: perm.clone(), perm_after })
}

/// Integer representative `L = Qλ` of rational lengths, with `Q` the lcm of
/// the denominators.
pub fn integer_lengths(lambda: &[Rational]) -> (Vec<BigInt>, BigInt) {
    let q = common_denominator(lambda);
    let v = lambda.iter().map(|x| (x * &q).to_integer()).collect();
    (v, q)
}

/// Zorich orbit without history. Tracks integer lengths, heights, and any
/// number of extra rational covectors under `Bᵀ`.
#[derive(Debug, Clone)]
pub struct ZorichWalker {
    pub perm: Perm,
    pub len: Vec<BigInt>,
    pub heights: Vec<BigInt>,
    pub covectors: Vec<Vec<Rational>>,
    pub n: u64,
    pub rv_steps: u64,
    pub max_entry_bits: u64,
}

impl ZorichWalker {
    pub fn new(t: &Iet) -> Self {
        let (len, _) = integer_lengths(t.lambda());
        ZorichWalker {
            perm: t.perm().clone(),
            len,
            heights: vec![BigInt::one(); t.d()],
            covectors: Vec::new(),
            n: 0,
            rv_steps: 0,
            max_entry_bits: DEFAULT_ENTRY_BITS,
        }
    }

    pub fn track(mut self, covector: Vec<Rational>) -> Self {
        self.covectors.push(covector);
        self
    }

    pub fn step(&mut self) -> Result<BlockData> {
        let b = zorich_block(&self.perm, &mut self.len, self.rv_steps)?;
        b.transpose_apply(&mut self.heights);
        for c in &mut self.covectors {
            let w = c[b.winner].clone();
            for (l, &k) in b.loss_counts.iter().enumerate() {
                if k > 0 {
                    c[l] += &w * Rational::from_integer(BigInt::from(k));
                }
            }
        }
        self.perm = b.perm_after.clone();
        self.n += 1;
        self.rv_steps += b.z;
        let bits = self.heights.iter().map(|h| h.bits()).max().unwrap_or(0);
        if bits > self.max_entry_bits {
            return Err(Error::ResourceGuard(format!(
                "cocycle entries exceed {} bits at block {}",
                self.max_entry_bits, self.n
            )));
        }
        Ok(b)
    }

    /// Normalized current lengths.
    pub fn lambda(&self) -> Vec<Rational> {
        let s: BigInt = self.len.iter().sum();
        self.len.iter().map(|x| Rational::new(x.clone(), s.clone())).collect()
    }
}

/// Full orbit history over `n_blocks` Zorich blocks.
#[derive(Debug, Clone)]
pub struct OrbitRecord {
    pub initial: Iet,
    /// `Q` with `L^(0) = Qλ` integral.
    pub scale: BigInt,
    pub blocks: Vec<BlockData>,
    /// Integer lengths `L^(n) = Q ℓ^(n)`, `n = 0..=N`.
    pub lengths: Vec<Vec<BigInt>>,
    pub heights: Vec<Vec<BigInt>>,
    pub cumulative: Vec<IntMatrix>,
    pub perms: Vec<Perm>,
    /// RV steps consumed before level `n`.
    pub rv_steps: Vec<u64>,
}

pub fn orbit(t: &Iet, n_blocks: usize) -> Result<OrbitRecord> {
    orbit_with_guard(t, n_blocks, DEFAULT_ENTRY_BITS)
}

pub fn orbit_with_guard(t: &Iet, n_blocks: usize, max_entry_bits: u64) -> Result<OrbitRecord> {
    let (rec, err) = orbit_partial(t, n_blocks, max_entry_bits);
    match err {
        Some(e) => Err(e),
        None => Ok(rec),
    }
}

/// Runs as far as possible; returns the completed record and the error that
/// stopped it, if any.
pub fn orbit_partial(t: &Iet, n_blocks: usize, max_entry_bits: u64) -> (OrbitRecord, Option<Error>) {
    let (len, scale) = integer_lengths(t.lambda());
    let d = t.d();
    let mut rec = OrbitRecord {
        initial: t.clone(),
        scale,
        blocks: Vec::new(),
        lengths: vec![len.clone()],
        heights: vec![vec![BigInt::one(); d]],
        cumulative: vec![IntMatrix::identity(d)],
        perms: vec![t.perm().clone()],
        rv_steps: vec![0],
    };
    let mut walker = ZorichWalker { max_entry_bits, ..ZorichWalker::new(t) };
    for _ in 0..n_blocks {
        let b = match walker.step() {
            Ok(b) => b,
            Err(e) => return (rec, Some(e)),
        };
        let mut cum = rec.cumulative.last().unwrap().clone();
        for (l, &k) in b.loss_counts.iter().enumerate() {
            cum.add_column(l, b.winner, &BigInt::from(k));
        }
        rec.cumulative.push(cum);
        rec.lengths.push(walker.len.clone());
        rec.heights.push(walker.heights.clone());
        rec.perms.push(walker.perm.clone());
        rec.rv_steps.push(walker.rv_steps);
        rec.blocks.push(b);
    }
    (rec, None)
}

/// Arc run in the Rauzy diagram: `z` consecutive moves of type `eps` from `perm`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathRun {
    pub perm: Perm,
    pub eps: RvType,
    pub z: u64,
}

impl OrbitRecord {
    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn d(&self) -> usize {
        self.initial.d()
    }

    /// Unnormalized lengths `ℓ^(n) = B^(n)⁻¹ λ`.
    pub fn ell(&self, n: usize) -> Vec<Rational> {
        self.lengths[n].iter().map(|x| Rational::new(x.clone(), self.scale.clone())).collect()
    }

    /// Normalized lengths `λ^(n)`.
    pub fn lambda(&self, n: usize) -> Vec<Rational> {
        let s: BigInt = self.lengths[n].iter().sum();
        self.lengths[n].iter().map(|x| Rational::new(x.clone(), s.clone())).collect()
    }

    pub fn iet(&self, n: usize) -> Iet {
        build_iet(self.lambda(n), self.perms[n].clone()).expect("positive lengths")
    }

    /// `Σ ℓ^(n)_α h^(n)_α`.
    pub fn tiling_sum(&self, n: usize) -> Rational {
        let s: BigInt = self.lengths[n].iter().zip(&self.heights[n]).map(|(l, h)| l * h).sum();
        Rational::new(s, self.scale.clone())
    }

    pub fn path(&self) -> Vec<PathRun> {
        self.blocks
            .iter()
            .map(|b| PathRun { perm: b.perm_before.clone(), eps: b.eps, z: b.z })
            .collect()
    }

    pub fn z_sequence(&self) -> Vec<u64> {
        self.blocks.iter().map(|b| b.z).collect()
    }

    pub fn max_height_bits(&self, n: usize) -> u64 {
        self.heights[n].iter().map(|h| h.bits()).max().unwrap_or(0)
    }

    /// `log10 max_α h^(n)_α`.
    pub fn log10_max_height(&self, n: usize) -> f64 {
        let m = self.heights[n].iter().max().unwrap();
        crate::num::ln_bigint(m) / std::f64::consts::LN_10
    }
}

pub fn rotation_path(t: &Iet, n_blocks: usize) -> Result<Vec<PathRun>> {
    Ok(orbit(t, n_blocks)?.path())
}

/// Letter winning each move of the run.
pub fn run_winner(run: &PathRun) -> usize {
    winner_loser(&run.perm, run.eps).0
}

/// Per-letter win counts over the first `window` moves of `path`.
pub fn win_counts(path: &[PathRun], window: u64) -> Vec<u64> {
    let d = path.first().map(|r| r.perm.d()).unwrap_or(0);
    let mut counts = vec![0u64; d];
    let mut left = window;
    for run in path {
        if left == 0 {
            break;
        }
        let k = run.z.min(left);
        counts[run_winner(run)] += k;
        left -= k;
    }
    counts
}

/// Finite surrogate for ∞-completeness: every letter wins within the first
/// `window` moves.
pub fn is_infinity_complete(path: &[PathRun], window: u64) -> bool {
    !path.is_empty() && win_counts(path, window).iter().all(|&c| c > 0)
}

/// Ratio `λ_{α_t} / λ_{α_b}` helper used by callers that need the gap sign.
pub fn last_gap(t: &Iet) -> Rational {
    let l = t.lambda();
    &l[t.perm().alpha_t()] - &l[t.perm().alpha_b()]
}

/// Euclid partial quotients of `p/q` (all of them, including a leading
/// integer part when `p ≥ q`).
pub fn euclid_quotients(p: &BigInt, q: &BigInt) -> Vec<BigInt> {
    let (mut a, mut b) = (p.clone(), q.clone());
    let mut out = Vec::new();
    while !b.is_zero() {
        let (k, r) = a.div_rem(&b);
        out.push(k);
        a = b;
        b = r;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rat;

    fn two(a: i64, b: i64) -> Iet {
        build_iet(vec![rat(a, 1), rat(b, 1)], Perm::parse("A B / B A").unwrap()).unwrap()
    }

    #[test]
    fn rv_type_and_step_d2() {
        let t = two(1, 2);
        assert_eq!(rv_type(&t).unwrap(), RvType::Top);
        let (t2, s) = rv_step(&t).unwrap();
        assert_eq!(t2.lambda(), &[rat(1, 2), rat(1, 2)]);
        assert_eq!((s.winner, s.loser), (1, 0));
        assert_eq!(s.matrix(2), IntMatrix::from_i64(&[&[1, 0], &[1, 1]]));
        assert!(rv_type(&t2).is_err());
    }

    #[test]
    fn block_counts_match_single_steps() {
        let t = two(3, 200);
        let (mut len, _) = integer_lengths(t.lambda());
        let b = zorich_block(t.perm(), &mut len, 0).unwrap();
        assert_eq!(b.z, 66);
        assert_eq!(b.eps, RvType::Top);
        assert_eq!(len, vec![BigInt::from(3), BigInt::from(2)]);
    }

    #[test]
    fn rational_d2_z_is_euclid() {
        let t = two(7, 10);
        let (rec, err) = orbit_partial(&t, 10, DEFAULT_ENTRY_BITS);
        assert!(matches!(err, Some(Error::NotRenormalizable { .. })));
        assert_eq!(rec.z_sequence(), vec![1, 2]);
    }

    #[test]
    fn tiling_identity() {
        let t = build_iet(vec![rat(3, 17), rat(5, 19), rat(7, 23), rat(11, 29)], Perm::parse("A B C D / D C B A").unwrap())
            .unwrap();
        let (rec, _) = orbit_partial(&t, 8, DEFAULT_ENTRY_BITS);
        for n in 0..=rec.n_blocks() {
            assert_eq!(rec.tiling_sum(n), rat(1, 1));
        }
    }

    #[test]
    fn preimage_inverts_step() {
        let t = build_iet(vec![rat(1, 6), rat(3, 6), rat(2, 6)], Perm::parse("A B C / C B A").unwrap()).unwrap();
        let (t2, s) = rv_step(&t).unwrap();
        assert_eq!(rv_preimage(&t2, s.eps).unwrap(), t);
    }

    #[test]
    fn euclid() {
        let q: Vec<i64> = euclid_quotients(&BigInt::from(7), &BigInt::from(10)).iter().map(|x| x.to_i64().unwrap()).collect();
        assert_eq!(q, vec![0, 1, 2, 3]);
    }
}
