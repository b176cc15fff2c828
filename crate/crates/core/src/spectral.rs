//! Kernel projections, the closed-form stable spaces of rotation-type data,
//! and Monte Carlo estimates of the top Lyapunov exponent.

use crate::combinat::Perm;
use crate::error::{Error, Result};
use crate::iet::{build_iet, Iet};
use crate::num::{dot, null_space, random_simplex_point, sample_rng, solve, Rational};
use crate::renorm::{ZorichWalker, DEFAULT_ENTRY_BITS};
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Subspace of `Q^d` given by a basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subspace {
    pub basis: Vec<Vec<Rational>>,
}

impl Subspace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Orthogonal projection of `v` via the Gram system.
    pub fn project(&self, v: &[Rational]) -> Vec<Rational> {
        project_onto(v, &self.basis)
    }

    pub fn contains(&self, v: &[Rational]) -> bool {
        self.project(v) == v
    }

    /// Orthogonal complement in `Q^d`.
    pub fn orthogonal_complement(&self, d: usize) -> Subspace {
        Subspace { basis: null_space(&self.basis, d) }
    }
}

/// Orthogonal projection of `v` onto `span(basis)` (basis independent).
pub fn project_onto(v: &[Rational], basis: &[Vec<Rational>]) -> Vec<Rational> {
    let d = v.len();
    if basis.is_empty() {
        return vec![Rational::zero(); d];
    }
    let gram: Vec<Vec<Rational>> = basis.iter().map(|a| basis.iter().map(|b| dot(a, b)).collect()).collect();
    let rhs: Vec<Rational> = basis.iter().map(|a| dot(a, v)).collect();
    let c = solve(&gram, &rhs).expect("independent basis has invertible Gram matrix");
    let mut out = vec![Rational::zero(); d];
    for (ci, b) in c.iter().zip(basis) {
        for (o, x) in out.iter_mut().zip(b) {
            *o += ci * x;
        }
    }
    out
}

pub fn kernel_subspace(pi: &Perm) -> Subspace {
    Subspace { basis: pi.kernel_basis_rational() }
}

/// Orthogonal projection onto `Ker Ω_π`.
pub fn project_kernel(omega: &[Rational], pi: &Perm) -> Vec<Rational> {
    kernel_subspace(pi).project(omega)
}

/// How a covector is carried along the orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovectorAction {
    /// `ω^(n) = B^(n)ᵀ ω`.
    Transpose,
    /// `ω^(n) = B^(n)⁻¹ ω`.
    Inverse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnCheck {
    pub n: usize,
    pub equal: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub action: CovectorAction,
    pub blocks_run: usize,
    pub returns: Vec<ReturnCheck>,
}

impl InvarianceReport {
    pub fn all_pass(&self) -> bool {
        self.returns.iter().all(|r| r.equal)
    }
}

/// Compares the kernel projection of `ω^(n)` with that of `ω` at every block
/// where the combinatorics return to `π^(0)`.
pub fn kernel_projection_invariance_check(t: &Iet, omega: &[Rational], n_blocks: usize) -> Result<InvarianceReport> {
    kernel_projection_check_with(t, omega, n_blocks, CovectorAction::Transpose)
}

pub fn kernel_projection_check_with(
    t: &Iet,
    omega: &[Rational],
    n_blocks: usize,
    action: CovectorAction,
) -> Result<InvarianceReport> {
    if omega.len() != t.d() {
        return Err(Error::DimensionMismatch { expected: t.d(), got: omega.len() });
    }
    let pi0 = t.perm().clone();
    let kernel = kernel_subspace(&pi0);
    let target = kernel.project(omega);
    let mut walker = ZorichWalker::new(t).track(omega.to_vec());
    let mut inverse = omega.to_vec();
    let mut returns = Vec::new();
    for n in 1..=n_blocks {
        let b = walker.step()?;
        if action == CovectorAction::Inverse {
            inverse = b.matrix().solve(&inverse).expect("unimodular");
        }
        if walker.perm == pi0 {
            let cur = match action {
                CovectorAction::Transpose => &walker.covectors[0],
                CovectorAction::Inverse => &inverse,
            };
            returns.push(ReturnCheck { n, equal: kernel.project(cur) == target });
        }
    }
    Ok(InvarianceReport { action, blocks_run: n_blocks, returns })
}

/// `E_cs = λ^⊥` and `E_s = Ker(Ω_π)^⊥ ∩ λ^⊥` for rotation-type data.
pub fn rotation_stable_spaces(t: &Iet) -> Result<(Subspace, Subspace)> {
    if !t.perm().is_rotation_type() {
        return Err(Error::NotRotationType);
    }
    let d = t.d();
    let lambda = t.lambda();
    let e_cs: Vec<Vec<Rational>> = (1..d)
        .map(|i| {
            let mut v = vec![Rational::zero(); d];
            v[i] = Rational::one();
            v[0] = -(&lambda[i] / &lambda[0]);
            v
        })
        .collect();
    let ker_perp = kernel_subspace(t.perm()).orthogonal_complement(d);
    let pairing = vec![ker_perp.basis.iter().map(|u| dot(u, lambda)).collect::<Vec<_>>()];
    let coeffs = null_space(&pairing, ker_perp.dim());
    let e_s = coeffs
        .iter()
        .map(|c| {
            let mut v = vec![Rational::zero(); d];
            for (ci, u) in c.iter().zip(&ker_perp.basis) {
                for (o, x) in v.iter_mut().zip(u) {
                    *o += ci * x;
                }
            }
            v
        })
        .collect();
    Ok((Subspace { basis: e_s }, Subspace { basis: e_cs }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    InEs,
    InEcsNotEs,
    OutsideEcs,
}

pub fn log_slope_membership(omega: &[Rational], t: &Iet) -> Result<Membership> {
    if !t.perm().is_rotation_type() {
        return Err(Error::NotRotationType);
    }
    if omega.len() != t.d() {
        return Err(Error::DimensionMismatch { expected: t.d(), got: omega.len() });
    }
    if !dot(omega, t.lambda()).is_zero() {
        return Ok(Membership::OutsideEcs);
    }
    if project_kernel(omega, t.perm()).iter().all(|x| x.is_zero()) {
        Ok(Membership::InEs)
    } else {
        Ok(Membership::InEcsNotEs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    PerZorichBlock,
    #[default]
    PerRvStep,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LyapunovSample {
    pub index: usize,
    pub per_block: f64,
    pub per_rv_step: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub theta_top: f64,
    pub normalization: Normalization,
    pub per_block: f64,
    pub per_rv_step: f64,
    pub n_blocks: usize,
    pub samples: usize,
    pub failures: usize,
    pub per_sample: Vec<LyapunovSample>,
}

/// Mean of `log ‖h^(n)‖_∞` over seeded Lebesgue-random lengths, divided by
/// the block count and by the RV step count.
pub fn lyapunov_top(
    pi0: &Perm,
    n_blocks: usize,
    samples: usize,
    seed: u64,
    normalization: Normalization,
) -> Result<LyapunovEstimate> {
    if samples == 0 {
        return Err(Error::Invalid("samples must be at least 1".into()));
    }
    if !pi0.is_irreducible() {
        return Err(Error::Reducible);
    }
    let bits = 64 + 8 * n_blocks as u64;
    let results: Vec<Option<LyapunovSample>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64);
            let lambda = random_simplex_point(&mut rng, pi0.d(), bits);
            let t = build_iet(lambda, pi0.clone()).ok()?;
            let mut w = ZorichWalker { max_entry_bits: DEFAULT_ENTRY_BITS, ..ZorichWalker::new(&t) };
            for _ in 0..n_blocks {
                w.step().ok()?;
            }
            if n_blocks == 0 {
                return Some(LyapunovSample { index: i, per_block: 0.0, per_rv_step: 0.0 });
            }
            let lh = crate::num::ln_bigint(w.heights.iter().max().unwrap());
            Some(LyapunovSample { index: i, per_block: lh / n_blocks as f64, per_rv_step: lh / w.rv_steps as f64 })
        })
        .collect();
    let ok: Vec<LyapunovSample> = results.into_iter().flatten().collect();
    let failures = samples - ok.len();
    if ok.is_empty() {
        return Err(Error::Invalid("every sample failed to renormalize".into()));
    }
    let mean = |f: fn(&LyapunovSample) -> f64| ok.iter().map(f).sum::<f64>() / ok.len() as f64;
    let per_block = mean(|s| s.per_block);
    let per_rv_step = mean(|s| s.per_rv_step);
    Ok(LyapunovEstimate {
        theta_top: match normalization {
            Normalization::PerZorichBlock => per_block,
            Normalization::PerRvStep => per_rv_step,
        },
        normalization,
        per_block,
        per_rv_step,
        n_blocks,
        samples,
        failures,
        per_sample: ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rat;

    #[test]
    fn projection_fixes_kernel() {
        let pi = Perm::parse("A B C D / B C D A").unwrap();
        let k = pi.kernel_basis_rational();
        assert_eq!(project_kernel(&k[0], &pi), k[0]);
        let v = vec![rat(1, 1), rat(0, 1), rat(0, 1), rat(0, 1)];
        let p = project_kernel(&v, &pi);
        let r: Vec<Rational> = v.iter().zip(&p).map(|(a, b)| a - b).collect();
        assert!(k.iter().all(|b| dot(b, &r).is_zero()));
    }

    #[test]
    fn stable_dimensions() {
        let t = build_iet(vec![rat(1, 10), rat(2, 10), rat(3, 10), rat(4, 10)], Perm::parse("A B C D / B C D A").unwrap())
            .unwrap();
        let (es, ecs) = rotation_stable_spaces(&t).unwrap();
        assert_eq!((es.dim(), ecs.dim()), (1, 3));
        assert_eq!(log_slope_membership(&es.basis[0], &t).unwrap(), Membership::InEs);
        assert_eq!(log_slope_membership(t.lambda(), &t).unwrap(), Membership::OutsideEcs);
    }

    #[test]
    fn zero_blocks_give_zero() {
        let pi = Perm::parse("A B / B A").unwrap();
        let e = lyapunov_top(&pi, 0, 3, 1, Normalization::PerRvStep).unwrap();
        assert_eq!(e.theta_top, 0.0);
    }
}
