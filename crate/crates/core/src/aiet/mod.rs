//! Affine interval exchanges: induction with slope tracking, the log-slope
//! cocycle, realization of an AIET along a prescribed Rauzy path, and the
//! circle-map side (PL homeomorphisms, continued fractions, partitions).

pub mod cf;
pub mod circle;
pub mod measure;

use crate::combinat::{Perm, RvType};
use crate::error::{Error, Result};
use crate::iet::Iet;
use crate::num::{BigReal, IntMatrix, Rational};
use crate::renorm::{orbit, BlockData, OrbitRecord, RvStep};
use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

/// Affine IET: domain lengths `ℓ` and log-slopes `ω`, indexed by letter.
#[derive(Debug, Clone)]
pub struct Aiet {
    perm: Perm,
    ell: Vec<BigReal>,
    omega: Vec<BigReal>,
    slope: Vec<BigReal>,
    prec: usize,
}

/// `2^{-(p - k)}`.
fn tol(p: usize, k: usize) -> BigReal {
    BigReal::pow2(-((p - k) as i64), p)
}

pub fn build_aiet(perm: Perm, ell: Vec<BigReal>, omega: Vec<BigReal>, prec: usize) -> Result<Aiet> {
    let d = perm.d();
    for v in [&ell, &omega] {
        if v.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: v.len() });
        }
    }
    if let Some(i) = ell.iter().position(|x| !x.is_positive()) {
        return Err(Error::NonPositive(i));
    }
    let ell: Vec<BigReal> = ell.iter().map(|x| x.with_precision(prec)).collect();
    let total = BigReal::sum(&ell, prec);
    let ell: Vec<BigReal> = ell.iter().map(|x| x / &total).collect();
    let omega: Vec<BigReal> = omega.iter().map(|x| x.with_precision(prec)).collect();
    let slope: Vec<BigReal> = omega.iter().map(|w| w.exp()).collect();
    let image: BigReal = BigReal::sum(&ell.iter().zip(&slope).map(|(l, s)| l * s).collect::<Vec<_>>(), prec);
    let defect = (&image - &BigReal::one(prec)).abs();
    if defect > tol(prec, 8) {
        return Err(Error::TilingViolation(defect.to_f64()));
    }
    Ok(Aiet { perm, ell, omega, slope, prec })
}

/// An IET seen as an AIET with zero log-slopes.
pub fn aiet_from_iet(t: &Iet, prec: usize) -> Aiet {
    let ell = t.lambda().iter().map(|x| BigReal::from_rational(x, prec)).collect();
    build_aiet(t.perm().clone(), ell, vec![BigReal::zero(prec); t.d()], prec).expect("IET tiles")
}

/// Outcome of one induction step on an AIET.
#[derive(Debug, Clone)]
pub struct GietStep {
    pub step: RvStep,
    /// Length of the induction interval in units of the current one.
    pub scale: BigReal,
}

impl Aiet {
    pub fn perm(&self) -> &Perm {
        &self.perm
    }

    pub fn d(&self) -> usize {
        self.perm.d()
    }

    pub fn precision(&self) -> usize {
        self.prec
    }

    pub fn lengths(&self) -> &[BigReal] {
        &self.ell
    }

    pub fn log_slope(&self) -> &[BigReal] {
        &self.omega
    }

    pub fn image_lengths(&self) -> Vec<BigReal> {
        self.ell.iter().zip(&self.slope).map(|(l, s)| l * s).collect()
    }

    /// Left ends of the domain intervals, indexed by letter.
    pub fn domain_lefts(&self) -> Vec<BigReal> {
        prefix_lefts(self.perm.top(), &self.ell, self.prec)
    }

    /// Left ends of the image intervals, indexed by letter.
    pub fn image_lefts(&self) -> Vec<BigReal> {
        prefix_lefts(self.perm.bottom(), &self.image_lengths(), self.prec)
    }

    pub fn evaluate(&self, x: &BigReal) -> Result<BigReal> {
        if x.is_negative() || x >= &BigReal::one(self.prec) {
            return Err(Error::OutOfRange(format!("{x:?} not in [0,1)")));
        }
        let lefts = self.domain_lefts();
        let imgs = self.image_lefts();
        let mut a = self.perm.top()[0];
        for &b in self.perm.top() {
            if &lefts[b] <= x {
                a = b;
            }
        }
        Ok(&imgs[a] + &(&self.slope[a] * &(x - &lefts[a])))
    }

    /// Rauzy–Veech step with affine rescaling to unit length.
    pub fn rv_step(&self) -> Result<(Aiet, GietStep)> {
        let p = self.prec;
        let floor = tol(p, 32);
        let (at, ab) = (self.perm.alpha_t(), self.perm.alpha_b());
        let img_b = &self.ell[ab] * &self.slope[ab];
        let gap = &self.ell[at] - &img_b;
        if gap.abs() <= floor {
            return Err(Error::TieUndecidable { gap: gap.to_f64() });
        }
        let mut ell = self.ell.clone();
        let mut omega = self.omega.clone();
        let mut slope = self.slope.clone();
        let eps = if gap.is_positive() { RvType::Top } else { RvType::Bottom };
        let (w, l) = match eps {
            RvType::Top => {
                ell[at] = gap;
                (at, ab)
            }
            RvType::Bottom => {
                let nt = &self.ell[at] / &self.slope[ab];
                ell[ab] = &self.ell[ab] - &nt;
                ell[at] = nt;
                (ab, at)
            }
        };
        omega[l] = &omega[l] + &omega[w];
        slope[l] = &slope[l] * &slope[w];
        let scale = BigReal::sum(&ell, p);
        for x in ell.iter_mut() {
            *x = &*x / &scale;
        }
        let min = ell.iter().cloned().reduce(BigReal::min).unwrap();
        if min <= floor {
            return Err(Error::PrecisionExhausted(format!(
                "smallest length 2^{:.1} below 2^-{}",
                min.log2_abs(),
                p - 32
            )));
        }
        let next = Aiet { perm: self.perm.successor(eps), ell, omega, slope, prec: p };
        Ok((next, GietStep { step: RvStep { eps, winner: w, loser: l }, scale }))
    }

    /// Type of the next step, without performing it.
    pub fn rv_type(&self) -> Result<RvType> {
        let (at, ab) = (self.perm.alpha_t(), self.perm.alpha_b());
        let gap = &self.ell[at] - &(&self.ell[ab] * &self.slope[ab]);
        if gap.abs() <= tol(self.prec, 32) {
            return Err(Error::TieUndecidable { gap: gap.to_f64() });
        }
        Ok(if gap.is_positive() { RvType::Top } else { RvType::Bottom })
    }
}

fn prefix_lefts(row: &[usize], len: &[BigReal], p: usize) -> Vec<BigReal> {
    let mut out = vec![BigReal::zero(p); len.len()];
    let mut acc = BigReal::zero(p);
    for &a in row {
        out[a] = acc.clone();
        acc = &acc + &len[a];
    }
    out
}

/// Snapshot at the start of a Zorich level.
#[derive(Debug, Clone)]
pub struct AietLevel {
    pub perm: Perm,
    /// `ln |I^(n)_α|` in units of the original interval.
    pub log_len: Vec<f64>,
    pub omega: Vec<BigReal>,
    pub rv_steps: u64,
}

/// Zorich-level trace of an induction orbit.
#[derive(Debug, Clone)]
pub struct AietOrbit {
    pub levels: Vec<AietLevel>,
    pub blocks: Vec<BlockData>,
    /// Error that stopped the run before the requested depth.
    pub halted: Option<Error>,
}

impl AietOrbit {
    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// `B^(n)` for `n = 0..=N`.
    pub fn cumulative(&self) -> Vec<IntMatrix> {
        let d = self.levels[0].perm.d();
        let mut out = vec![IntMatrix::identity(d)];
        for b in &self.blocks {
            let mut m = out.last().unwrap().clone();
            for (l, &k) in b.loss_counts.iter().enumerate() {
                m.add_column(l, b.winner, &BigInt::from(k));
            }
            out.push(m);
        }
        out
    }
}

fn snapshot(f: &Aiet, log_scale: f64, rv_steps: u64) -> AietLevel {
    AietLevel {
        perm: f.perm.clone(),
        log_len: f.ell.iter().map(|x| x.ln_f64() + log_scale).collect(),
        omega: f.omega.clone(),
        rv_steps,
    }
}

/// Runs the induction forward, grouping steps into Zorich blocks. Stops at
/// `n_blocks` complete blocks or at the first error, which is recorded.
pub fn aiet_orbit(f: &Aiet, n_blocks: usize, max_rv_steps: u64) -> AietOrbit {
    aiet_orbit_inspect(f, n_blocks, max_rv_steps, |_, _, _| {})
}

/// Same as [`aiet_orbit`], also handing each level's renormalized map and
/// its length `|I^(n)|` to `on_level`.
pub fn aiet_orbit_inspect(
    f: &Aiet,
    n_blocks: usize,
    max_rv_steps: u64,
    mut on_level: impl FnMut(usize, &Aiet, &BigReal),
) -> AietOrbit {
    let mut cur = f.clone();
    let mut log_scale = 0.0f64;
    let mut scale = BigReal::one(f.prec);
    let mut rv = 0u64;
    let mut levels = vec![snapshot(&cur, 0.0, 0)];
    on_level(0, &cur, &scale);
    let mut blocks = Vec::new();
    let mut pending: Option<BlockData> = None;
    loop {
        let eps = match cur.rv_type() {
            Ok(e) => e,
            Err(e) => return AietOrbit { levels, blocks, halted: Some(e) },
        };
        if let Some(b) = pending.take() {
            if b.eps != eps {
                let mut b = b;
                b.perm_after = cur.perm.clone();
                blocks.push(b);
                levels.push(snapshot(&cur, log_scale, rv));
                on_level(blocks.len(), &cur, &scale);
                if blocks.len() == n_blocks {
                    return AietOrbit { levels, blocks, halted: None };
                }
            } else {
                pending = Some(b);
            }
        }
        if n_blocks == 0 {
            return AietOrbit { levels, blocks, halted: None };
        }
        if rv >= max_rv_steps {
            let e = Error::ResourceGuard(format!("more than {max_rv_steps} induction steps"));
            return AietOrbit { levels, blocks, halted: Some(e) };
        }
        let (next, st) = match cur.rv_step() {
            Ok(x) => x,
            Err(e) => return AietOrbit { levels, blocks, halted: Some(e) },
        };
        let b = pending.get_or_insert_with(|| BlockData {
            z: 0,
            eps,
            winner: st.step.winner,
            first_loser: st.step.loser,
            loss_counts: vec![0; cur.d()],
            perm_before: cur.perm.clone(),
            perm_after: cur.perm.clone(),
        });
        b.z += 1;
        b.loss_counts[st.step.loser] += 1;
        log_scale += st.scale.ln_f64();
        scale = &scale * &st.scale;
        rv += 1;
        cur = next;
    }
}

pub const DEFAULT_MAX_RV_STEPS: u64 = 5_000_000;

/// Result of comparing tracked log-slopes with `B^(n)ᵀ ω`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlopeCocycleReport {
    pub blocks_checked: usize,
    pub max_rel_deviation: f64,
    pub per_block: Vec<f64>,
    pub halted: Option<String>,
}

/// Tracked slopes against the cocycle applied to the initial slopes, with
/// `B^(n)` rebuilt from the recorded path.
pub fn log_slope_cocycle_check(f: &Aiet, n_blocks: usize) -> SlopeCocycleReport {
    let orb = aiet_orbit(f, n_blocks, DEFAULT_MAX_RV_STEPS);
    slope_deviation(&orb, f.precision())
}

pub fn slope_deviation(orb: &AietOrbit, p: usize) -> SlopeCocycleReport {
    let omega0 = &orb.levels[0].omega;
    let mut per_block = Vec::new();
    for (n, b) in orb.cumulative().iter().enumerate().skip(1) {
        let d = b.dim();
        let pred: Vec<BigReal> = (0..d)
            .map(|a| {
                let mut s = BigReal::zero(p);
                for (i, w) in omega0.iter().enumerate() {
                    let e = b.get(i, a);
                    if !e.is_zero() {
                        s = &s + &(&BigReal::from_bigint(e, p) * w);
                    }
                }
                s
            })
            .collect();
        let scale = pred.iter().map(|x| x.abs()).reduce(BigReal::max).unwrap();
        let diff = pred.iter().zip(&orb.levels[n].omega).map(|(x, y)| (x - y).abs()).reduce(BigReal::max).unwrap();
        let rel = if scale.is_zero() { diff.to_f64() } else { (&diff / &scale).to_f64() };
        per_block.push(rel);
    }
    SlopeCocycleReport {
        blocks_checked: per_block.len(),
        max_rel_deviation: per_block.iter().cloned().fold(0.0, f64::max),
        per_block,
        halted: orb.halted.as_ref().map(|e| e.to_string()),
    }
}

/// Elementary moves of a Zorich block, in order.
pub fn block_moves(b: &BlockData) -> Vec<RvStep> {
    let moving = match b.eps {
        RvType::Top => b.perm_before.bottom(),
        RvType::Bottom => b.perm_before.top(),
    };
    let wpos = moving.iter().position(|&x| x == b.winner).unwrap();
    let mut tail = moving[wpos + 1..].to_vec();
    let mut out = Vec::with_capacity(b.z as usize);
    for _ in 0..b.z {
        out.push(RvStep { eps: b.eps, winner: b.winner, loser: *tail.last().unwrap() });
        tail.rotate_right(1);
    }
    out
}

fn phi(x: &BigReal) -> BigReal {
    let p = x.precision();
    if x.is_zero() {
        return BigReal::one(p);
    }
    x / &(&x.exp() - &BigReal::one(p))
}

/// AIET with combinatorics `perm`, log-slope `ω` and lengths proportional
/// to `λ_α φ(ω_α)`, `φ(x) = x/(eˣ − 1)`. Tiles whenever `ω ⊥ λ`.
pub fn aiet_over(lambda: &[Rational], perm: Perm, omega: &[Rational], prec: usize) -> Result<Aiet> {
    if lambda.len() != perm.d() || omega.len() != perm.d() {
        return Err(Error::DimensionMismatch { expected: perm.d(), got: lambda.len().min(omega.len()) });
    }
    let om: Vec<BigReal> = omega.iter().map(|x| BigReal::from_rational(x, prec)).collect();
    let ell = lambda.iter().zip(&om).map(|(l, w)| &BigReal::from_rational(l, prec) * &phi(w)).collect();
    build_aiet(perm, ell, om, prec)
}

/// An AIET constructed to follow the Rauzy path of an IET.
#[derive(Debug, Clone)]
pub struct Realization {
    pub aiet: Aiet,
    pub iet_orbit: OrbitRecord,
    /// Zorich-level trace from the backward construction pass.
    pub trace: AietOrbit,
    /// Blocks along which a forward run reproduces the path.
    pub verified_blocks: usize,
    pub forward_halt: Option<String>,
}

/// Builds an AIET with log-slope close to `ω` whose first `n_blocks`
/// Zorich blocks follow those of the IET `t`. `ω` must be orthogonal to λ.
pub fn realize_along_path(t: &Iet, omega: &[Rational], n_blocks: usize, prec: usize) -> Result<Realization> {
    let d = t.d();
    if omega.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: omega.len() });
    }
    if !crate::num::dot(omega, t.lambda()).is_zero() {
        return Err(Error::Invalid("log-slope must be orthogonal to the lengths".into()));
    }
    let rec = orbit(t, n_blocks)?;
    let total: u64 = rec.blocks.iter().map(|b| b.z).sum();
    if total > DEFAULT_MAX_RV_STEPS {
        return Err(Error::ResourceGuard(format!("path has {total} induction steps")));
    }
    let n = rec.n_blocks();
    let omega_n = rec.cumulative[n].tmul_vec_rat(omega);
    let lam_n = rec.lambda(n);
    let mut om: Vec<BigReal> = omega_n.iter().map(|x| BigReal::from_rational(x, prec)).collect();
    let mut ell: Vec<BigReal> =
        lam_n.iter().zip(&om).map(|(l, w)| &BigReal::from_rational(l, prec) * &phi(w)).collect();
    let s = BigReal::sum(&ell, prec);
    ell.iter_mut().for_each(|x| *x = &*x / &s);

    // Backward pass, one block at a time; level snapshots store normalized
    // logs and the log of each block's length ratio.
    let mut snaps: Vec<(Vec<f64>, Vec<BigReal>)> = vec![(ell.iter().map(|x| x.ln_f64()).collect(), om.clone())];
    let mut block_logs = Vec::with_capacity(n);
    for b in rec.blocks.iter().rev() {
        let mut acc = 0.0;
        for st in block_moves(b).iter().rev() {
            let (w, l) = (st.winner, st.loser);
            om[l] = &om[l] - &om[w];
            match st.eps {
                RvType::Top => ell[w] = &ell[w] + &(&ell[l] * &om[l].exp()),
                RvType::Bottom => {
                    ell[w] = &ell[w] + &ell[l];
                    ell[l] = &ell[l] * &om[w].exp();
                }
            }
            let s = BigReal::sum(&ell, prec);
            if !s.is_positive() || !s.is_finite() {
                return Err(Error::PrecisionExhausted(format!("backward pass lost the lengths at {prec} bits")));
            }
            ell.iter_mut().for_each(|x| *x = &*x / &s);
            acc += s.ln_f64();
        }
        block_logs.push(acc);
        snaps.push((ell.iter().map(|x| x.ln_f64()).collect(), om.clone()));
    }
    snaps.reverse();
    block_logs.reverse();
    // a length rounded away or a broken tiling here means the pass ran out of bits
    let aiet = build_aiet(t.perm().clone(), ell, om, prec).map_err(|e| match e {
        Error::NonPositive(_) | Error::TilingViolation(_) => {
            Error::PrecisionExhausted(format!("realized AIET is degenerate at {prec} bits: {e}"))
        }
        e => e,
    })?;

    let mut levels = Vec::with_capacity(n + 1);
    let mut log_scale = 0.0;
    for (k, (logs, omk)) in snaps.into_iter().enumerate() {
        levels.push(AietLevel {
            perm: rec.perms[k].clone(),
            log_len: logs.iter().map(|x| x + log_scale).collect(),
            omega: omk,
            rv_steps: rec.rv_steps[k],
        });
        if k < n {
            log_scale -= block_logs[k];
        }
    }
    let trace = AietOrbit { levels, blocks: rec.blocks.clone(), halted: None };

    let fwd = aiet_orbit(&aiet, n, total + 1);
    let verified_blocks =
        fwd.blocks.iter().zip(&rec.blocks).take_while(|(a, b)| a.eps == b.eps && a.loss_counts == b.loss_counts).count();
    let forward_halt = fwd.halted.as_ref().map(|e| e.to_string());
    Ok(Realization { aiet, iet_orbit: rec, trace, verified_blocks, forward_halt })
}

/// Wire form of an AIET.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AietDescriptor {
    pub perm: Perm,
    pub lengths: Vec<String>,
    pub log_slope: Vec<String>,
    pub precision_bits: usize,
}

impl AietDescriptor {
    pub fn build(&self) -> Result<Aiet> {
        let p = self.precision_bits;
        let parse = |v: &[String]| v.iter().map(|s| BigReal::parse(s, p)).collect::<Result<Vec<_>>>();
        build_aiet(self.perm.clone(), parse(&self.lengths)?, parse(&self.log_slope)?, p)
    }
}

impl Aiet {
    pub fn descriptor(&self) -> AietDescriptor {
        AietDescriptor {
            perm: self.perm.clone(),
            lengths: self.ell.iter().map(|x| x.to_decimal_string()).collect(),
            log_slope: self.omega.iter().map(|x| x.to_decimal_string()).collect(),
            precision_bits: self.prec,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iet::build_iet;
    use crate::num::rat;
    use crate::renorm::rv_step;

    #[test]
    fn zero_slope_step_matches_iet() {
        let t = build_iet(vec![rat(1, 7), rat(2, 7), rat(4, 7)], Perm::parse("A B C / C A B").unwrap()).unwrap();
        let f = aiet_from_iet(&t, 256);
        let (g, st) = f.rv_step().unwrap();
        let (t2, s2) = rv_step(&t).unwrap();
        assert_eq!(st.step, s2);
        for (x, y) in g.lengths().iter().zip(t2.lambda()) {
            assert!((x - &BigReal::from_rational(y, 256)).abs().log2_abs() < -240.0);
        }
    }

    #[test]
    fn tiling_violation_detected() {
        let p = 128;
        let ell = vec![BigReal::from_f64(0.5, p), BigReal::from_f64(0.5, p)];
        let om = vec![BigReal::from_f64(0.1, p), BigReal::from_f64(0.1, p)];
        assert!(matches!(build_aiet(Perm::parse("A B / B A").unwrap(), ell, om, p), Err(Error::TilingViolation(_))));
    }

    #[test]
    fn realization_follows_path() {
        let t = build_iet(
            vec![rat(123457, 1000000), rat(345679, 1000000), rat(530864, 1000000)],
            Perm::parse("A B C / B C A").unwrap(),
        )
        .unwrap();
        let lam = t.lambda();
        let u = [rat(1, 3), rat(-1, 2), rat(1, 5)];
        let c = crate::num::dot(&u, lam) / crate::num::dot(lam, lam);
        let omega: Vec<Rational> = u.iter().zip(lam).map(|(x, l)| x - &c * l).collect();
        let r = realize_along_path(&t, &omega, 6, 256).unwrap();
        assert_eq!(r.verified_blocks, r.iet_orbit.n_blocks());
    }
}
