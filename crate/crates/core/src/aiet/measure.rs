//! Invariant-measure weights read off a recorded Rauzy path, and the
//! local-dimension estimator `log μ̂(I) / log |I|`.

use super::{aiet_orbit, Aiet, AietOrbit, DEFAULT_MAX_RV_STEPS};
use crate::error::{Error, Result};
use crate::num::ln_bigint;
use crate::renorm::{BlockData, OrbitRecord};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

pub const DEFAULT_CONE_TOL: f64 = 1e-12;

/// Measure of the level-`n` bases and towers estimated from the path.
#[derive(Debug, Clone)]
pub struct MeasureWeights {
    /// `B_{n+1}⋯B_N 1̄` for `n = 0..=N`; level `n` bases have measure
    /// `v[n][α] / total`.
    pub v: Vec<Vec<BigInt>>,
    pub total: BigInt,
    pub heights: Vec<Vec<BigInt>>,
    pub lambda_hat: Vec<f64>,
    /// Sup-norm spread of the normalized columns of `B^(N)`.
    pub spread: f64,
}

fn ratio_f64(a: &BigInt, b: &BigInt) -> f64 {
    if a.is_zero() {
        0.0
    } else {
        (ln_bigint(a) - ln_bigint(b)).exp()
    }
}

impl MeasureWeights {
    pub fn levels(&self) -> usize {
        self.v.len()
    }

    /// `ln μ̂(I^(n)_α)`.
    pub fn log_mu(&self, n: usize) -> Vec<f64> {
        let lt = ln_bigint(&self.total);
        self.v[n].iter().map(|x| ln_bigint(x) - lt).collect()
    }

    /// Tower weights `h^(n)_α μ̂(I^(n)_α)`; they sum to one.
    pub fn tower_weights(&self, n: usize) -> Vec<f64> {
        self.v[n].iter().zip(&self.heights[n]).map(|(v, h)| ratio_f64(&(v * h), &self.total)).collect()
    }

    /// Exact check that tower weights at level `n` sum to one.
    pub fn tower_sum_is_one(&self, n: usize) -> bool {
        let s: BigInt = self.v[n].iter().zip(&self.heights[n]).map(|(v, h)| v * h).sum();
        s == self.total
    }
}

/// Exact weights for an AIET conjugate to the IET of `rec`: the measure of
/// `I^(n)_α` is the IET length `L^(n)_α / Q`.
pub fn measure_from_orbit(rec: &OrbitRecord) -> MeasureWeights {
    let total = rec.scale.clone();
    let lambda_hat = rec.lengths[0].iter().map(|x| ratio_f64(x, &total)).collect();
    MeasureWeights { v: rec.lengths.clone(), total, heights: rec.heights.clone(), lambda_hat, spread: 0.0 }
}

/// Weights from the blocks of a path; fails if the columns of `B^(N)` have
/// not contracted to within `tol` of a common direction.
pub fn measure_from_blocks(blocks: &[BlockData], d: usize, tol: f64) -> Result<MeasureWeights> {
    let n = blocks.len();
    let mut v = vec![vec![BigInt::one(); d]];
    for b in blocks.iter().rev() {
        let mut x = v.last().unwrap().clone();
        let add: BigInt = b.loss_counts.iter().enumerate().map(|(l, &k)| &x[l] * BigInt::from(k)).sum();
        x[b.winner] += add;
        v.push(x);
    }
    v.reverse();
    let mut heights = vec![vec![BigInt::one(); d]];
    for b in blocks {
        let mut h = heights.last().unwrap().clone();
        b.transpose_apply(&mut h);
        heights.push(h);
    }
    let total: BigInt = v[0].iter().sum();
    let lambda_hat: Vec<f64> = v[0].iter().map(|x| ratio_f64(x, &total)).collect();

    // Columns of B^(N) = B_1⋯B_N: apply the blocks to each basis vector.
    let mut cols: Vec<Vec<BigInt>> = (0..d)
        .map(|j| {
            let mut e = vec![BigInt::zero(); d];
            e[j] = BigInt::one();
            e
        })
        .collect();
    for b in blocks.iter().rev() {
        for x in cols.iter_mut() {
            let add: BigInt = b.loss_counts.iter().enumerate().map(|(l, &k)| &x[l] * BigInt::from(k)).sum();
            x[b.winner] += add;
        }
    }
    let dirs: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| {
            let s: BigInt = c.iter().sum();
            c.iter().map(|x| ratio_f64(x, &s)).collect()
        })
        .collect();
    let mut spread = 0.0f64;
    for a in &dirs {
        for b in &dirs {
            for (x, y) in a.iter().zip(b) {
                spread = spread.max((x - y).abs());
            }
        }
    }
    if n > 0 && spread > tol {
        return Err(Error::ConeNotContracted { spread, tol });
    }
    Ok(MeasureWeights { v, total, heights, lambda_hat, spread })
}

/// Runs `f` forward `n_blocks` Zorich blocks and estimates the weights.
pub fn invariant_measure_weights(f: &Aiet, n_blocks: usize, tol: f64) -> Result<(AietOrbit, MeasureWeights)> {
    let orb = aiet_orbit(f, n_blocks, DEFAULT_MAX_RV_STEPS);
    if let Some(e) = &orb.halted {
        return Err(e.clone());
    }
    let w = measure_from_blocks(&orb.blocks, f.d(), tol)?;
    Ok((orb, w))
}

/// Local-dimension ratios at one level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimLevel {
    pub n: usize,
    pub log10_max_len: f64,
    pub ratios: Vec<f64>,
    /// Mean of `ratios` weighted by the tower weights.
    pub weighted: f64,
}

/// `ln μ̂(I^(n)_α) / ln |I^(n)_α|` for every recorded level.
pub fn dimension_trace(orb: &AietOrbit, w: &MeasureWeights) -> Vec<DimLevel> {
    let levels = orb.levels.len().min(w.levels());
    (0..levels)
        .map(|n| {
            let lm = w.log_mu(n);
            let ll = &orb.levels[n].log_len;
            let ratios: Vec<f64> = lm.iter().zip(ll).map(|(m, l)| if *l < 0.0 { m / l } else { 1.0 }).collect();
            let tw = w.tower_weights(n);
            let weighted = ratios.iter().zip(&tw).map(|(r, t)| r * t).sum::<f64>() / tw.iter().sum::<f64>();
            let log10_max_len = ll.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / std::f64::consts::LN_10;
            DimLevel { n, log10_max_len, ratios, weighted }
        })
        .collect()
}

pub fn local_dimension_estimates(f: &Aiet, n_blocks: usize, tol: f64) -> Result<Vec<DimLevel>> {
    let (orb, w) = invariant_measure_weights(f, n_blocks, tol)?;
    Ok(dimension_trace(&orb, &w))
}

/// First level whose longest base interval is shorter than `10^{log10_max}`.
pub fn first_level_below(trace: &[DimLevel], log10_max: f64) -> Option<usize> {
    trace.iter().position(|l| l.log10_max_len < log10_max)
}
