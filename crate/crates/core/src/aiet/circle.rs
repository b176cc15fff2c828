//! Piecewise-linear circle homeomorphisms: lifts, rotation numbers, the
//! translation to AIETs, dynamical partitions and renormalizations.

use super::{build_aiet, Aiet};
use crate::combinat::{default_alphabet, Perm};
use crate::error::{Error, Result};
use crate::num::BigReal;
use serde::{Deserialize, Serialize};
use std::cell::Cell;

/// Orientation-preserving PL circle map `f`. Slope `slopes[i]` applies on
/// `[breaks[i], breaks[i+1])`; `shift = f(0)`.
#[derive(Debug, Clone)]
pub struct PLCircleMap {
    breaks: Vec<BigReal>,
    slopes: Vec<BigReal>,
    shift: BigReal,
    /// `F(breaks[i]) - shift`.
    rise: Vec<BigReal>,
    prec: usize,
}

fn frac(x: &BigReal) -> BigReal {
    x - &x.floor()
}

/// `(b - a) mod 1`.
fn circ_dist(a: &BigReal, b: &BigReal) -> BigReal {
    frac(&(b - a))
}

impl PLCircleMap {
    pub fn new(breaks: Vec<BigReal>, slopes: Vec<BigReal>, shift: BigReal, prec: usize) -> Result<Self> {
        if breaks.is_empty() || !breaks[0].is_zero() {
            return Err(Error::Invalid("break points must start with 0".into()));
        }
        if breaks.len() != slopes.len() {
            return Err(Error::DimensionMismatch { expected: breaks.len(), got: slopes.len() });
        }
        let one = BigReal::one(prec);
        if breaks.windows(2).any(|w| w[0] >= w[1]) || breaks.last().unwrap() >= &one {
            return Err(Error::Invalid("break points must increase strictly inside [0,1)".into()));
        }
        if let Some(i) = slopes.iter().position(|s| !s.is_positive()) {
            return Err(Error::NonPositive(i));
        }
        let breaks: Vec<BigReal> = breaks.iter().map(|x| x.with_precision(prec)).collect();
        let slopes: Vec<BigReal> = slopes.iter().map(|x| x.with_precision(prec)).collect();
        let mut rise = Vec::with_capacity(breaks.len() + 1);
        let mut acc = BigReal::zero(prec);
        for i in 0..breaks.len() {
            rise.push(acc.clone());
            let end = breaks.get(i + 1).cloned().unwrap_or_else(|| one.clone());
            acc = &acc + &(&slopes[i] * &(&end - &breaks[i]));
        }
        let defect = (&acc - &one).abs();
        if defect > BigReal::pow2(-((prec - 8) as i64), prec) {
            return Err(Error::TilingViolation(defect.to_f64()));
        }
        rise.push(one);
        Ok(PLCircleMap { breaks, slopes, shift: frac(&shift.with_precision(prec)), rise, prec })
    }

    /// Rigid rotation by `alpha` with the artificial break at 0.
    pub fn rotation(alpha: &BigReal, prec: usize) -> Self {
        Self::new(vec![BigReal::zero(prec)], vec![BigReal::one(prec)], alpha.clone(), prec).unwrap()
    }

    /// Slope `s1` on `[0,c)` and the complementary slope on `[c,1)`, then
    /// translation by `shift`.
    pub fn two_break(c: &BigReal, s1: &BigReal, shift: &BigReal, prec: usize) -> Result<Self> {
        let one = BigReal::one(prec);
        let s2 = (&one - &(s1 * c)) / (&one - c);
        Self::new(vec![BigReal::zero(prec), c.clone()], vec![s1.clone(), s2], shift.clone(), prec)
    }

    /// Builds from lift values `F(x_i)` at increasing nodes `x_0 = 0 < … < 1`.
    pub fn from_nodes(xs: &[BigReal], fs: &[BigReal], prec: usize) -> Result<Self> {
        if xs.len() != fs.len() || xs.is_empty() {
            return Err(Error::DimensionMismatch { expected: xs.len(), got: fs.len() });
        }
        let one = BigReal::one(prec);
        let mut slopes = Vec::new();
        for i in 0..xs.len() {
            let (x1, f1) = match xs.get(i + 1) {
                Some(x) => (x.clone(), fs[i + 1].clone()),
                None => (one.clone(), &fs[0] + &one),
            };
            slopes.push((&f1 - &fs[i]) / (&x1 - &xs[i]));
        }
        Self::new(xs.to_vec(), slopes, fs[0].clone(), prec)
    }

    pub fn precision(&self) -> usize {
        self.prec
    }

    pub fn breaks(&self) -> &[BigReal] {
        &self.breaks
    }

    pub fn slopes(&self) -> &[BigReal] {
        &self.slopes
    }

    pub fn shift(&self) -> &BigReal {
        &self.shift
    }

    fn piece(&self, y: &BigReal) -> usize {
        self.breaks.iter().rposition(|b| b <= y).unwrap_or(0)
    }

    /// Slope of `f` at `x` (right derivative).
    pub fn slope_at(&self, x: &BigReal) -> &BigReal {
        &self.slopes[self.piece(&frac(x))]
    }

    /// Lift `F` with `F(0) = shift ∈ [0,1)`.
    pub fn lift(&self, x: &BigReal) -> BigReal {
        let k = x.floor();
        let y = x - &k;
        let i = self.piece(&y);
        &(&(&self.shift + &self.rise[i]) + &(&self.slopes[i] * &(&y - &self.breaks[i]))) + &k
    }

    pub fn eval(&self, x: &BigReal) -> BigReal {
        frac(&self.lift(x))
    }

    /// `f^{-1}(y)` for `y ∈ [0,1)`.
    pub fn inverse(&self, y: &BigReal) -> BigReal {
        let mut t = y - &self.shift;
        if t.is_negative() {
            t = &t + &BigReal::one(self.prec);
        }
        let i = self.rise[..self.breaks.len()].iter().rposition(|r| r <= &t).unwrap_or(0);
        frac(&(&self.breaks[i] + &(&(&t - &self.rise[i]) / &self.slopes[i])))
    }

    /// `F^n(x)`.
    pub fn lift_iter(&self, x: &BigReal, n: u64) -> BigReal {
        let mut y = x.clone();
        for _ in 0..n {
            y = self.lift(&y);
        }
        y
    }

    /// Branch data of `f` as a piecewise-C² descriptor.
    pub fn c2_branches(&self) -> Vec<C2Branch> {
        (0..self.breaks.len())
            .map(|i| {
                let s = self.slopes[i].to_f64();
                C2Branch {
                    start: self.breaks[i].to_f64(),
                    end: self.breaks.get(i + 1).map(|b| b.to_f64()).unwrap_or(1.0),
                    df: Box::new(move |_| s),
                    d2f: Box::new(|_| 0.0),
                }
            })
            .collect()
    }
}

/// Wire form `{"breaks": [...], "slopes": [...], "shift": "..."}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PLDescriptor {
    pub breaks: Vec<String>,
    pub slopes: Vec<String>,
    #[serde(default)]
    pub shift: Option<String>,
}

impl PLDescriptor {
    pub fn build(&self, prec: usize) -> Result<PLCircleMap> {
        let parse = |v: &[String]| v.iter().map(|s| BigReal::parse(s, prec)).collect::<Result<Vec<_>>>();
        let shift = match &self.shift {
            Some(s) => BigReal::parse(s, prec)?,
            None => BigReal::zero(prec),
        };
        PLCircleMap::new(parse(&self.breaks)?, parse(&self.slopes)?, shift, prec)
    }
}

/// `F^n(0)/n` and the bound `1/n` on its distance to the rotation number.
pub fn rotation_number(f: &PLCircleMap, n_iter: u64) -> Result<(BigReal, BigReal)> {
    if n_iter == 0 {
        return Err(Error::Invalid("n_iter must be at least 1".into()));
    }
    let p = f.prec;
    let nn = BigReal::from_i64(n_iter as i64, p);
    let est = &f.lift_iter(&BigReal::zero(p), n_iter) / &nn;
    Ok((est, nn.recip()))
}

/// The AIET obtained by cutting the circle at the break points and at
/// `f^{-1}(0)`; letters follow the domain order.
pub fn pl_to_aiet(f: &PLCircleMap) -> Result<Aiet> {
    let p = f.prec;
    let mut cuts = f.breaks.clone();
    let z = f.inverse(&BigReal::zero(p));
    if !cuts.iter().any(|c| c == &z) {
        cuts.push(z);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    let m = cuts.len();
    let one = BigReal::one(p);
    let ends: Vec<BigReal> = (0..m).map(|i| cuts.get(i + 1).cloned().unwrap_or_else(|| one.clone())).collect();
    let ell: Vec<BigReal> = (0..m).map(|i| &ends[i] - &cuts[i]).collect();
    let omega: Vec<BigReal> = cuts.iter().map(|c| f.slope_at(c).ln()).collect();
    let images: Vec<BigReal> = cuts.iter().map(|c| f.eval(c)).collect();
    let mut bottom: Vec<usize> = (0..m).collect();
    bottom.sort_by(|&a, &b| images[a].partial_cmp(&images[b]).unwrap());
    let perm = Perm::new(default_alphabet(m), (0..m).collect(), bottom)?;
    build_aiet(perm, ell, omega, p)
}

/// Arc `I_m^i` of a dynamical partition, stored by the orbit indices of its
/// endpoints in counterclockwise order.
#[derive(Debug, Clone)]
pub struct Arc {
    pub level: usize,
    pub index: u64,
    pub start: u64,
    pub end: u64,
    pub left: BigReal,
    pub length: BigReal,
}

impl Arc {
    pub fn contains(&self, x: &BigReal) -> bool {
        circ_dist(&self.left, x) < self.length
    }
}

/// Dynamical partition `P_n(x_0)`.
#[derive(Debug, Clone)]
pub struct DynamicalPartition {
    pub x0: BigReal,
    pub n: usize,
    /// `a_1..a_{n+1}`.
    pub quotients: Vec<u64>,
    /// `q_0..q_{n+1}`.
    pub q: Vec<u64>,
    /// `f^k(x_0)` for `k < q_{n+1} + q_n`.
    pub points: Vec<BigReal>,
    pub long_arcs: Vec<Arc>,
    pub short_arcs: Vec<Arc>,
}

pub const DEFAULT_ITER_BUDGET: u64 = 50_000_000;

/// Partial quotients read off the orbit of `x0` with the functions
/// `G_m = F^{q_m} - p_m`.
pub fn dynamic_quotients(f: &PLCircleMap, x0: &BigReal, terms: usize, budget: u64) -> Result<(Vec<u64>, Vec<u64>)> {
    let p = f.prec;
    let eps = BigReal::pow2(-((p - 24) as i64), p);
    let one = BigReal::one(p);
    let (mut q_prev, mut q_cur) = (0u64, 1u64);
    let (mut p_prev, mut p_cur) = (1i64, 0i64);
    let mut g_prev = x0 - &one;
    let mut g_cur = f.lift(x0);
    let mut quotients = Vec::new();
    let mut q = vec![1u64];
    let mut spent = 0u64;
    let side = |y: &BigReal| -> Result<bool> {
        let d = y - x0;
        if d.abs() <= eps {
            return Err(Error::RationalRotation(format!("orbit returns within 2^{:.0} of x0", d.log2_abs())));
        }
        Ok(d.is_positive())
    };
    while quotients.len() < terms {
        let s0 = side(&g_prev)?;
        let mut y = g_prev.clone();
        let mut j = 0u64;
        loop {
            spent += q_cur;
            if spent > budget {
                return Err(Error::ResourceGuard(format!("dynamic continued fraction exceeds {budget} iterations")));
            }
            let next = &f.lift_iter(&y, q_cur) - &BigReal::from_i64(p_cur, p);
            if side(&next)? != s0 {
                break;
            }
            y = next;
            j += 1;
        }
        if j == 0 {
            return Err(Error::RationalRotation("zero partial quotient".into()));
        }
        quotients.push(j);
        let qn = j * q_cur + q_prev;
        let pn = j as i64 * p_cur + p_prev;
        (q_prev, q_cur, p_prev, p_cur) = (q_cur, qn, p_cur, pn);
        q.push(qn);
        g_prev = g_cur;
        g_cur = y;
    }
    Ok((quotients, q))
}

fn arc(points: &[BigReal], q: &[u64], m: usize, i: u64) -> Arc {
    let (start, end) = if m % 2 == 0 { (i, i + q[m]) } else { (i + q[m], i) };
    let left = points[start as usize].clone();
    let length = circ_dist(&left, &points[end as usize]);
    Arc { level: m, index: i, start, end, left, length }
}

pub fn dynamical_partition(f: &PLCircleMap, x0: &BigReal, n: usize) -> Result<DynamicalPartition> {
    dynamical_partition_with_budget(f, x0, n, DEFAULT_ITER_BUDGET)
}

pub fn dynamical_partition_with_budget(f: &PLCircleMap, x0: &BigReal, n: usize, budget: u64) -> Result<DynamicalPartition> {
    if n == 0 {
        return Err(Error::Invalid("partition level must be at least 1".into()));
    }
    let x0 = frac(&x0.with_precision(f.prec));
    let (quotients, q) = dynamic_quotients(f, &x0, n + 1, budget)?;
    let count = q[n + 1] + q[n];
    if count > budget {
        return Err(Error::ResourceGuard(format!("partition needs {count} orbit points")));
    }
    let mut points = Vec::with_capacity(count as usize);
    let mut y = x0.clone();
    for _ in 0..count {
        points.push(y.clone());
        y = f.eval(&y);
    }
    let long_arcs = (0..q[n]).map(|i| arc(&points, &q, n - 1, i)).collect();
    let short_arcs = (0..q[n - 1]).map(|j| arc(&points, &q, n, j)).collect();
    Ok(DynamicalPartition { x0, n, quotients, q, points, long_arcs, short_arcs })
}

impl DynamicalPartition {
    pub fn counts(&self) -> (usize, usize) {
        (self.long_arcs.len(), self.short_arcs.len())
    }

    pub fn total_length(&self) -> BigReal {
        let p = self.x0.precision();
        let all: Vec<BigReal> = self.long_arcs.iter().chain(&self.short_arcs).map(|a| a.length.clone()).collect();
        BigReal::sum(&all, p)
    }

    /// Arcs are contiguous around the circle by shared orbit-index endpoints,
    /// every orbit point starts exactly one arc, and lengths sum to 1.
    pub fn check_partition(&self) -> std::result::Result<(), String> {
        let p = self.x0.precision();
        let mut arcs: Vec<&Arc> = self.long_arcs.iter().chain(&self.short_arcs).collect();
        let k = arcs.len();
        if k as u64 != self.q[self.n] + self.q[self.n - 1] {
            return Err(format!("{k} arcs"));
        }
        let mut starts: Vec<u64> = arcs.iter().map(|a| a.start).collect();
        starts.sort();
        if starts != (0..k as u64).collect::<Vec<_>>() {
            return Err("orbit points do not start one arc each".into());
        }
        arcs.sort_by(|a, b| a.left.partial_cmp(&b.left).unwrap());
        for w in 0..k {
            let (a, b) = (arcs[w], arcs[(w + 1) % k]);
            if a.end != b.start {
                return Err(format!("arc ending at orbit point {} is followed by one starting at {}", a.end, b.start));
            }
            if !a.length.is_positive() {
                return Err(format!("empty arc at orbit point {}", a.start));
            }
        }
        let defect = (&self.total_length() - &BigReal::one(p)).abs();
        if defect > BigReal::pow2(-((p - 16) as i64), p) {
            return Err(format!("total length off by {:e}", defect.to_f64()));
        }
        Ok(())
    }

    /// `I_{n-1}^i` is `I_{n+1}^i` together with the `a_{n+1}` adjacent arcs
    /// `I_n^{i + q_{n-1} + s q_n}`.
    pub fn check_refining(&self, i: u64) -> std::result::Result<(), String> {
        let n = self.n;
        let p = self.x0.precision();
        if i >= self.q[n] {
            return Err(format!("index {i} out of range"));
        }
        let a = self.quotients[n];
        if self.q[n + 1] != a * self.q[n] + self.q[n - 1] {
            return Err("denominator recursion broken".into());
        }
        let big = arc(&self.points, &self.q, n - 1, i);
        let top = arc(&self.points, &self.q, n + 1, i);
        let pieces: Vec<Arc> = (0..a).map(|s| arc(&self.points, &self.q, n, i + self.q[n - 1] + s * self.q[n])).collect();
        // Walk the pieces in the arc's orientation and require shared endpoints.
        let mut seq: Vec<&Arc> = pieces.iter().collect();
        seq.push(&top);
        seq.sort_by(|x, y| circ_dist(&big.left, &x.left).partial_cmp(&circ_dist(&big.left, &y.left)).unwrap());
        if seq[0].start != big.start || seq.last().unwrap().end != big.end {
            return Err("pieces do not reach both ends of the arc".into());
        }
        for w in seq.windows(2) {
            if w[0].end != w[1].start {
                return Err(format!("gap between orbit points {} and {}", w[0].end, w[1].start));
            }
        }
        let mut acc = BigReal::zero(p);
        for x in &seq {
            let off = circ_dist(&big.left, &x.left);
            if off >= big.length || !x.length.is_positive() {
                return Err("piece leaves the arc".into());
            }
            acc = &acc + &x.length;
        }
        let defect = (&acc - &big.length).abs();
        if defect > BigReal::pow2(-((p - 16) as i64), p) {
            return Err(format!("lengths differ by {:e}", defect.to_f64()));
        }
        Ok(())
    }
}

/// Branch of a renormalization: `f^{time}` on an arc, affine on pieces.
#[derive(Debug, Clone)]
pub struct RenormBranch {
    pub level: usize,
    pub arc_left: BigReal,
    pub arc_length: BigReal,
    pub return_time: u64,
    pub image_left: BigReal,
    /// `(offset from arc_left, slope of f^{time})` at the start of each piece.
    pub pieces: Vec<(BigReal, BigReal)>,
}

impl RenormBranch {
    pub fn eval(&self, x: &BigReal) -> BigReal {
        let off = circ_dist(&self.arc_left, x);
        let mut y = self.image_left.clone();
        for (k, (o, s)) in self.pieces.iter().enumerate() {
            let end = self.pieces.get(k + 1).map(|n| n.0.clone()).unwrap_or_else(|| self.arc_length.clone());
            if &off <= o {
                break;
            }
            let seg = if off < end { &off - o } else { &end - o };
            y = &y + &(s * &seg);
        }
        frac(&y)
    }
}

#[derive(Debug, Clone)]
pub struct CircleRenormalization {
    pub n: usize,
    pub x0: BigReal,
    /// `f^{q_{n-1}}` on `I_n`, then `f^{q_n}` on `I_{n-1}`.
    pub branches: [RenormBranch; 2],
    pub samples_checked: usize,
    pub sample_failures: usize,
}

fn branch(f: &PLCircleMap, a: &Arc, time: u64) -> RenormBranch {
    let p = f.prec;
    // (offset in arc, current image point of the piece start, slope product)
    let mut pieces: Vec<(BigReal, BigReal, BigReal)> = vec![(BigReal::zero(p), a.left.clone(), BigReal::one(p))];
    let mut len_img = a.length.clone();
    let mut img_left = a.left.clone();
    for _ in 0..time {
        let mut next = Vec::new();
        for (k, (off, y, s)) in pieces.iter().enumerate() {
            next.push((off.clone(), f.eval(y), s * f.slope_at(y)));
            let end_y = match pieces.get(k + 1) {
                Some(nx) => circ_dist(&img_left, &nx.1),
                None => len_img.clone(),
            };
            let start_y = circ_dist(&img_left, y);
            for b in &f.breaks {
                let pos = circ_dist(&img_left, b);
                if pos > start_y && pos < end_y {
                    let off_b = off + &(&(&pos - &start_y) / s);
                    next.push((off_b, f.eval(b), s * f.slope_at(b)));
                }
            }
        }
        next.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let new_left = f.eval(&img_left);
        len_img = (f.lift(&(&img_left + &len_img)) - f.lift(&img_left)).with_precision(p);
        img_left = new_left;
        pieces = next;
    }
    RenormBranch {
        level: a.level,
        arc_left: a.left.clone(),
        arc_length: a.length.clone(),
        return_time: time,
        image_left: img_left,
        pieces: pieces.into_iter().map(|(o, _, s)| (o, s)).collect(),
    }
}

/// First-return map of `f` to `I_{n-1}(x_0) ∪ I_n(x_0)`, checked on
/// `samples` points per branch.
pub fn circle_renormalization(f: &PLCircleMap, x0: &BigReal, n: usize, samples: usize) -> Result<CircleRenormalization> {
    let part = dynamical_partition(f, x0, n)?;
    let p = f.prec;
    let short = part.short_arcs[0].clone();
    let long = part.long_arcs[0].clone();
    let branches = [branch(f, &short, part.q[n - 1]), branch(f, &long, part.q[n])];
    let tol = BigReal::pow2(-((p - 40) as i64), p);
    let in_union = |x: &BigReal| short.contains(x) || long.contains(x);
    let mut failures = 0;
    let mut checked = 0;
    for br in &branches {
        let limit = part.q[n] + part.q[n - 1];
        for s in 0..samples {
            let t = BigReal::from_f64((s as f64 + 0.5) / samples as f64, p);
            let x = frac(&(&br.arc_left + &(&br.arc_length * &t)));
            let mut y = f.eval(&x);
            let mut k = 1;
            while !in_union(&y) && k < limit {
                y = f.eval(&y);
                k += 1;
            }
            checked += 1;
            let d = circ_dist(&br.eval(&x), &y);
            let close = d < tol || (&BigReal::one(p) - &d) < tol;
            if k != br.return_time || !close {
                failures += 1;
            }
        }
    }
    Ok(CircleRenormalization { n, x0: part.x0, branches, samples_checked: checked, sample_failures: failures })
}

/// `ρ(f)` is at least `num/den` if `F^den(0) ≥ num`, at most if `≤`.
fn compare_rotation(f: &PLCircleMap, num: u64, den: u64) -> std::cmp::Ordering {
    let p = f.prec;
    let v = f.lift_iter(&BigReal::zero(p), den);
    v.partial_cmp(&BigReal::from_i64(num as i64, p)).unwrap()
}

/// Two-break PL map whose rotation number is certified to lie between
/// `lo = lo_num/lo_den` and `hi = hi_num/hi_den`, found by bisection on
/// the translation part.
pub fn two_break_with_rotation(
    c: &BigReal,
    s1: &BigReal,
    lo: (u64, u64),
    hi: (u64, u64),
    prec: usize,
    max_iter: usize,
) -> Result<PLCircleMap> {
    use std::cmp::Ordering::*;
    let mut a = BigReal::zero(prec);
    let mut b = BigReal::one(prec);
    let half = BigReal::from_f64(0.5, prec);
    for _ in 0..max_iter {
        let t = &(&a + &b) * &half;
        let f = PLCircleMap::two_break(c, s1, &t, prec)?;
        let above_lo = compare_rotation(&f, lo.0, lo.1) == Greater;
        let below_hi = compare_rotation(&f, hi.0, hi.1) == Less;
        match (above_lo, below_hi) {
            (true, true) => return Ok(f),
            (false, _) => a = t,
            (_, false) => b = t,
        }
    }
    Err(Error::PrecisionExhausted("bisection did not isolate the rotation interval".into()))
}

/// Branch of a piecewise-C² circle map descriptor.
pub struct C2Branch {
    pub start: f64,
    pub end: f64,
    pub df: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub d2f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

/// `∫ D log Df` summed over branches by double-exponential quadrature.
pub fn mean_nonlinearity(branches: &[C2Branch]) -> Result<f64> {
    let mut total = 0.0;
    for (k, br) in branches.iter().enumerate() {
        let bad = Cell::new(false);
        for i in 0..=64 {
            let x = br.start + (br.end - br.start) * i as f64 / 64.0;
            if (br.df)(x) <= 0.0 {
                bad.set(true);
            }
        }
        let out = quadrature::integrate(
            |x| {
                let d = (br.df)(x);
                if d <= 0.0 {
                    bad.set(true);
                    return 0.0;
                }
                (br.d2f)(x) / d
            },
            br.start,
            br.end,
            1e-12,
        );
        if bad.get() {
            return Err(Error::NonPositive(k));
        }
        total += out.integral;
    }
    Ok(total)
}
