//! Rohlin towers of the induction, the zero-dimension criterion checker,
//! s-content accounting, and the generic-condition scanner.

use crate::aiet::measure::measure_from_blocks;
use crate::aiet::{aiet_orbit_inspect, Aiet, DEFAULT_MAX_RV_STEPS};
use crate::combinat::{canonical_rotation_perm, canonical_rotation_perm_in, rauzy_class, star_letters, Perm, RvType};
use crate::error::{Error, Result};
use crate::iet::{build_iet, Iet, Interval};
use crate::num::{common_denominator, format_rational, ln_bigint, rat_int, rational_to_f64, BigReal, IntMatrix, Rational};
use crate::renorm::{integer_lengths, orbit, rv_step, rv_type, OrbitRecord, ZorichWalker};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

pub const DEFAULT_FLOOR_CAP: u64 = 100_000;
pub const DEFAULT_M_CAP: u64 = 1_000_000;

/// Tower `⨆_{0≤k<h} T^k(base)` over a level-`n` base interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RohlinTower {
    pub letter: usize,
    pub level: usize,
    pub height: BigInt,
    pub base: Interval,
    /// Present when the floors were materialized.
    pub floors: Option<Floors>,
}

/// Floors `[left_k, left_k + len_k) / denom` with integer numerators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Floors {
    pub denom: BigInt,
    pub lefts: Vec<BigInt>,
    pub lens: Vec<BigInt>,
}

impl Floors {
    pub fn len(&self) -> usize {
        self.lefts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lefts.is_empty()
    }

    pub fn interval(&self, k: usize) -> Interval {
        Interval {
            left: Rational::new(self.lefts[k].clone(), self.denom.clone()),
            right: Rational::new(&self.lefts[k] + &self.lens[k], self.denom.clone()),
        }
    }

    pub fn intervals(&self) -> Vec<Interval> {
        (0..self.len()).map(|k| self.interval(k)).collect()
    }

    /// `ln` of the length of floor `k`.
    pub fn ln_len(&self, k: usize) -> f64 {
        ln_bigint(&self.lens[k]) - ln_bigint(&self.denom)
    }

    fn from_intervals(v: &[Interval]) -> Floors {
        let ends: Vec<Rational> = v.iter().flat_map(|i| [i.left.clone(), i.right.clone()]).collect();
        let denom = common_denominator(&ends);
        let num = |x: &Rational| (x * &denom).to_integer();
        Floors {
            lefts: v.iter().map(|i| num(&i.left)).collect(),
            lens: v.iter().map(|i| num(&i.right) - num(&i.left)).collect(),
            denom,
        }
    }
}

/// Two floors that intersect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapWitness {
    /// `(tower index, floor index)`.
    pub first: (usize, u64),
    pub second: (usize, u64),
    pub left: String,
    pub right: String,
}

/// The `d` towers at one level of an IET.
#[derive(Debug, Clone)]
pub struct TowerSystem {
    pub level: usize,
    pub towers: Vec<RohlinTower>,
    /// `Σ_α h_α |base_α|`, exactly one.
    pub tiling_sum: Rational,
    pub floors_checked: bool,
}

/// An IET with lengths and translations as integers over a common denominator.
struct IntIet {
    denom: BigInt,
    /// Domain intervals `[left, right)` per letter.
    bounds: Vec<(BigInt, BigInt)>,
    shift: Vec<BigInt>,
}

impl IntIet {
    fn new(t: &Iet) -> IntIet {
        let denom = common_denominator(t.lambda());
        let num = |x: &Rational| (x * &denom).to_integer();
        IntIet {
            bounds: t.intervals().iter().map(|i| (num(&i.left), num(&i.right))).collect(),
            shift: t.translation_vector().iter().map(num).collect(),
            denom,
        }
    }

    fn letter_at(&self, x: &BigInt) -> Option<usize> {
        self.bounds.iter().position(|(l, r)| l <= x && x < r)
    }

    fn numerator(&self, x: &Rational) -> Result<BigInt> {
        let y = x * &self.denom;
        if y.is_integer() {
            Ok(y.to_integer())
        } else {
            Err(Error::Invalid("interval endpoint is not on the grid of the lengths".into()))
        }
    }
}

/// Iterates `t` on a whole interval, requiring each floor below the top to
/// lie in one continuity interval.
fn iterate_floors(t: &IntIet, base: &Interval, h: u64) -> Result<Floors> {
    let mut left = t.numerator(&base.left)?;
    let len = t.numerator(&base.right)? - &left;
    let mut lefts = Vec::with_capacity(h as usize);
    for k in 0..h {
        if k + 1 < h {
            let a = t.letter_at(&left).ok_or_else(|| Error::OutOfRange("floor leaves [0,1)".into()))?;
            if &left + &len > t.bounds[a].1 {
                return Err(Error::Invalid(format!("floor {k} straddles a discontinuity")));
            }
            let next = &left + &t.shift[a];
            lefts.push(left);
            left = next;
        } else {
            lefts.push(left.clone());
        }
    }
    Ok(Floors { denom: t.denom.clone(), lens: vec![len; lefts.len()], lefts })
}

/// Tower over an arbitrary base; fails if some floor below the top meets a
/// discontinuity.
pub fn tower_from_base(t: &Iet, base: Interval, height: u64, letter: usize, level: usize) -> Result<RohlinTower> {
    if height == 0 {
        return Err(Error::Invalid("height must be positive".into()));
    }
    let floors = iterate_floors(&IntIet::new(t), &base, height)?;
    Ok(RohlinTower { letter, level, height: BigInt::from(height), base, floors: Some(floors) })
}

/// All materialized floors as `(left, right, tower, floor)` over one
/// denominator, sorted by left endpoint.
fn sorted_floors(towers: &[RohlinTower]) -> (BigInt, Vec<(BigInt, BigInt, usize, u64)>) {
    let denom = towers.iter().flat_map(|t| &t.floors).fold(BigInt::one(), |acc, f| acc.lcm(&f.denom));
    let mut all = Vec::new();
    for (i, t) in towers.iter().enumerate() {
        if let Some(f) = &t.floors {
            let m = &denom / &f.denom;
            for (k, (l, w)) in f.lefts.iter().zip(&f.lens).enumerate() {
                let l = l * &m;
                let r = &l + w * &m;
                all.push((l, r, i, k as u64));
            }
        }
    }
    all.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    (denom, all)
}

/// First pair of intersecting floors among all materialized floors.
pub fn find_overlap(towers: &[RohlinTower]) -> Option<OverlapWitness> {
    let (denom, all) = sorted_floors(towers);
    let mut reach: Option<&(BigInt, BigInt, usize, u64)> = None;
    for cur in &all {
        if let Some(prev) = reach {
            let (l, r) = ((&prev.0).max(&cur.0), (&prev.1).min(&cur.1));
            if l < r {
                return Some(OverlapWitness {
                    first: (prev.2, prev.3),
                    second: (cur.2, cur.3),
                    left: format_rational(&Rational::new(l.clone(), denom.clone())),
                    right: format_rational(&Rational::new(r.clone(), denom.clone())),
                });
            }
            if cur.1 > prev.1 {
                reach = Some(cur);
            }
        } else {
            reach = Some(cur);
        }
    }
    None
}

/// True when the materialized floors cover `[0,1)` without gaps.
fn floors_tile_unit(towers: &[RohlinTower]) -> bool {
    let (denom, all) = sorted_floors(towers);
    let mut at = BigInt::zero();
    for (l, r, _, _) in all {
        if l != at {
            return false;
        }
        at = r;
    }
    at == denom
}

fn towers_from_record(rec: &OrbitRecord, n: usize, floor_cap: u64) -> Result<TowerSystem> {
    let t = IntIet::new(&rec.initial);
    let q = Rational::from_integer(rec.scale.clone());
    let perm = &rec.perms[n];
    let mut left = Rational::zero();
    let mut towers: Vec<RohlinTower> = Vec::with_capacity(perm.d());
    let mut bases = vec![None; perm.d()];
    for &a in perm.top() {
        let len = Rational::from_integer(rec.lengths[n][a].clone()) / &q;
        let right = &left + &len;
        bases[a] = Some(Interval { left: left.clone(), right: right.clone() });
        left = right;
    }
    let heights = &rec.heights[n];
    let total: BigInt = heights.iter().sum();
    let materialize = total <= BigInt::from(floor_cap);
    for (a, base) in bases.into_iter().enumerate() {
        let base = base.expect("every letter has a base");
        let h = heights[a].clone();
        let floors = if materialize { Some(iterate_floors(&t, &base, h.to_u64().unwrap())?) } else { None };
        towers.push(RohlinTower { letter: a, level: n, height: h, base, floors });
    }
    let tiling_sum: Rational =
        towers.iter().map(|t| Rational::from_integer(t.height.clone()) * t.base.len()).sum();
    if tiling_sum != Rational::one() {
        return Err(Error::Invalid(format!("towers cover {} of the interval", format_rational(&tiling_sum))));
    }
    if materialize {
        if let Some(w) = find_overlap(&towers) {
            return Err(Error::Invalid(format!("floors overlap: {w:?}")));
        }
        if !floors_tile_unit(&towers) {
            return Err(Error::Invalid("floors leave a gap".into()));
        }
    }
    Ok(TowerSystem { level: n, towers, tiling_sum, floors_checked: materialize })
}

/// Towers over the level-`n` bases `I^(n)_α` with heights `h^(n)_α`, in
/// original coordinates. Floors are materialized and checked when the total
/// height is at most `floor_cap`.
pub fn towers_at_level(t: &Iet, n_blocks: usize, floor_cap: u64) -> Result<TowerSystem> {
    let rec = orbit(t, n_blocks)?;
    towers_from_record(&rec, n_blocks, floor_cap)
}

/// Towers of an AIET in floating point. Floors are materialized when the
/// total height is at most `floor_cap`; `tiling_defect` is `|Σ floor lengths − 1|`.
#[derive(Debug, Clone)]
pub struct AietTowerSystem {
    pub level: usize,
    pub towers: Vec<RohlinTower>,
    pub tiling_defect: Option<f64>,
    /// Largest overlap between consecutive sorted floors.
    pub max_overlap: Option<f64>,
}

fn aiet_letter_at(f: &Aiet, lefts: &[BigReal], x: &BigReal) -> usize {
    let mut a = f.perm().top()[0];
    for &b in f.perm().top() {
        if &lefts[b] <= x {
            a = b;
        }
    }
    a
}

pub fn aiet_towers_at_level(f: &Aiet, n_blocks: usize, floor_cap: u64) -> Result<AietTowerSystem> {
    let mut snap: Option<(Aiet, BigReal)> = None;
    let orb = aiet_orbit_inspect(f, n_blocks, DEFAULT_MAX_RV_STEPS, |k, g, s| {
        if k == n_blocks {
            snap = Some((g.clone(), s.clone()));
        }
    });
    let (g, scale) = match (snap, orb.halted) {
        (Some(x), _) => x,
        (None, Some(e)) => return Err(e),
        (None, None) => unreachable!("orbit completes or halts"),
    };
    let mut heights = vec![BigInt::one(); f.d()];
    for b in &orb.blocks {
        b.transpose_apply(&mut heights);
    }
    let p = f.precision();
    let glefts = g.domain_lefts();
    let total: BigInt = heights.iter().sum();
    let materialize = total <= BigInt::from(floor_cap);
    let lefts0 = f.domain_lefts();
    let slopes0: Vec<BigReal> = f.log_slope().iter().map(|w| w.exp()).collect();
    let mut towers = Vec::new();
    let mut real_floors: Vec<(BigReal, BigReal)> = Vec::new();
    for a in 0..f.d() {
        let l = &glefts[a] * &scale;
        let len = &g.lengths()[a] * &scale;
        let base = Interval { left: l.to_rational(), right: (&l + &len).to_rational() };
        let floors = if materialize {
            let mut out = Vec::new();
            let (mut x, mut w) = (l.clone(), len.clone());
            for k in 0..heights[a].to_u64().unwrap() {
                out.push(Interval { left: x.to_rational(), right: (&x + &w).to_rational() });
                real_floors.push((x.clone(), &x + &w));
                if k + 1 < heights[a].to_u64().unwrap() {
                    let c = aiet_letter_at(f, &lefts0, &x);
                    w = &w * &slopes0[c];
                    x = f.evaluate(&x)?;
                }
            }
            Some(Floors::from_intervals(&out))
        } else {
            None
        };
        towers.push(RohlinTower { letter: a, level: n_blocks, height: heights[a].clone(), base, floors });
    }
    let (tiling_defect, max_overlap) = if materialize {
        real_floors.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let lens: Vec<BigReal> = real_floors.iter().map(|(a, b)| b - a).collect();
        let defect = (&BigReal::sum(&lens, p) - &BigReal::one(p)).abs().to_f64();
        let mut ov = 0.0f64;
        for w in real_floors.windows(2) {
            ov = ov.max((&w[0].1 - &w[1].0).to_f64());
        }
        (Some(defect), Some(ov))
    } else {
        (None, None)
    };
    Ok(AietTowerSystem { level: n_blocks, towers, tiling_defect, max_overlap })
}

/// `Σ_floors |floor|^s` over towers, using `h·|base|^s` when the floors are
/// translates of the base.
pub fn s_content(towers: &[RohlinTower], s: f64) -> f64 {
    towers
        .iter()
        .map(|t| match &t.floors {
            Some(fl) => (0..fl.len()).map(|k| (s * fl.ln_len(k)).exp()).sum(),
            None => (ln_bigint(&t.height) + s * rational_to_f64(&t.base.len()).ln()).exp(),
        })
        .sum()
}

pub fn s_content_lengths(lengths: &[f64], s: f64) -> f64 {
    lengths.iter().map(|l| l.powf(s)).sum()
}

/// Floor lengths `|F| σ^k`, `L ≤ k < M`, of a tower thinned to the
/// iterates contracted by `σ`.
pub fn thinned_floor_lengths(base_len: f64, sigma: f64, l: u64, m: u64) -> Vec<f64> {
    (l..m).map(|k| base_len * sigma.powi(k as i32)).collect()
}

/// `C(n)` in the large-ratio condition.
#[derive(Clone)]
pub enum Schedule {
    /// `⌈log₂(n+2)⌉`.
    Log2,
    Const(u64),
    Custom { name: String, f: Arc<dyn Fn(u64) -> u64 + Send + Sync> },
}

impl fmt::Debug for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

impl Schedule {
    pub fn parse(s: &str) -> Result<Schedule> {
        match s {
            "log2" => Ok(Schedule::Log2),
            _ => match s.strip_prefix("const:").map(|k| k.parse::<u64>()) {
                Some(Ok(k)) if k > 0 => Ok(Schedule::Const(k)),
                _ => Err(Error::Parse(format!("unknown schedule {s:?}; use log2 or const:K"))),
            },
        }
    }

    pub fn name(&self) -> String {
        match self {
            Schedule::Log2 => "log2".into(),
            Schedule::Const(k) => format!("const:{k}"),
            Schedule::Custom { name, .. } => name.clone(),
        }
    }

    pub fn c(&self, n: u64) -> u64 {
        match self {
            Schedule::Log2 => 64 - (n + 1).leading_zeros() as u64,
            Schedule::Const(k) => *k,
            Schedule::Custom { f, .. } => f(n),
        }
    }

    /// `nC(n)`.
    pub fn weight(&self, n: u64) -> BigInt {
        BigInt::from(n) * BigInt::from(self.c(n))
    }

    /// Whether `Σ 1/(nC(n))` diverges; unknown for custom schedules.
    pub fn diverges(&self) -> Option<bool> {
        match self {
            Schedule::Log2 | Schedule::Const(_) => Some(true),
            Schedule::Custom { .. } => None,
        }
    }
}

fn check_c0(c0: &Rational, d: usize) -> Result<()> {
    let bound = Rational::new(BigInt::one(), BigInt::from(10 * d));
    if !c0.is_positive() || c0 >= &bound {
        return Err(Error::OutOfRange(format!("c0 = {} must lie in (0, 1/{})", format_rational(c0), 10 * d)));
    }
    Ok(())
}

/// Data recorded at one level satisfying all four conditions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanHit {
    pub n: u64,
    pub rv_steps: u64,
    pub c: u64,
    /// `min_{α≠β*} λ_α / λ_{β*}`.
    pub min_length_ratio: f64,
    /// `min_{α≠β*} λ_α`.
    pub min_lambda: f64,
    /// `min h_α / max h_β`.
    pub min_height_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenericConditionReport {
    pub c0: String,
    pub schedule: String,
    pub schedule_diverges: Option<bool>,
    pub pi_star: Perm,
    pub max_blocks: usize,
    pub blocks_run: usize,
    /// Levels `n ≥ 1` with `π^(n) = π*`.
    pub visits: u64,
    pub hits: Vec<ScanHit>,
    pub halted: Option<String>,
    pub warning: Option<String>,
}

/// Verdicts on the four conditions at one level, from exact integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionVerdicts {
    pub at_pi_star: bool,
    pub large_ratio: bool,
    pub balanced_lengths: bool,
    pub balanced_heights: bool,
}

impl ConditionVerdicts {
    pub fn all(&self) -> bool {
        self.at_pi_star && self.large_ratio && self.balanced_lengths && self.balanced_heights
    }
}

/// Evaluates the conditions on integer lengths `L` (any positive multiple of
/// `λ^(n)`) and heights.
pub fn evaluate_conditions(
    perm: &Perm,
    pi_star: &Perm,
    len: &[BigInt],
    heights: &[BigInt],
    n: u64,
    c0: &Rational,
    schedule: &Schedule,
) -> ConditionVerdicts {
    let at_pi_star = perm == pi_star;
    let beta = pi_star.alpha_b();
    let (num, den) = (c0.numer(), c0.denom());
    let total: BigInt = len.iter().sum();
    let others = || (0..len.len()).filter(|&a| a != beta);
    let w = schedule.weight(n);
    let large_ratio = others().all(|a| len[a] > &w * &len[beta]);
    let balanced_lengths = others().all(|a| &len[a] * den > num * &total);
    let hmin = heights.iter().min().unwrap();
    let hmax = heights.iter().max().unwrap();
    let balanced_heights = hmin * den > num * hmax;
    ConditionVerdicts { at_pi_star, large_ratio, balanced_lengths, balanced_heights }
}

fn ratio(a: &BigInt, b: &BigInt) -> f64 {
    (ln_bigint(a) - ln_bigint(b)).exp()
}

/// Scans levels `1..=max_blocks` of the Zorich orbit of `t` for the four
/// conditions, with `π*` the canonical rotation datum over the alphabet of `t`.
pub fn generic_condition_scan(
    t: &Iet,
    c0: &Rational,
    schedule: &Schedule,
    max_blocks: usize,
) -> Result<GenericConditionReport> {
    let d = t.d();
    check_c0(c0, d)?;
    let pi_star = canonical_rotation_perm_in(t.perm().alphabet().to_vec())?;
    let beta = pi_star.alpha_b();
    let mut w = ZorichWalker::new(t);
    let (mut visits, mut hits, mut halted, mut blocks_run) = (0u64, Vec::new(), None, 0usize);
    for n in 1..=max_blocks as u64 {
        if let Err(e) = w.step() {
            halted = Some(e.to_string());
            break;
        }
        blocks_run = n as usize;
        if w.perm != pi_star {
            continue;
        }
        visits += 1;
        let v = evaluate_conditions(&w.perm, &pi_star, &w.len, &w.heights, n, c0, schedule);
        if v.all() {
            let total: BigInt = w.len.iter().sum();
            let others = (0..d).filter(|&a| a != beta);
            let amin = others.clone().map(|a| &w.len[a]).min().unwrap();
            hits.push(ScanHit {
                n,
                rv_steps: w.rv_steps,
                c: schedule.c(n),
                min_length_ratio: ratio(amin, &w.len[beta]),
                min_lambda: ratio(amin, &total),
                min_height_ratio: ratio(w.heights.iter().min().unwrap(), w.heights.iter().max().unwrap()),
            });
        }
    }
    let warning = (visits == 0).then(|| format!("π* = {pi_star} never visited in {blocks_run} blocks"));
    Ok(GenericConditionReport {
        c0: format_rational(c0),
        schedule: schedule.name(),
        schedule_diverges: schedule.diverges(),
        pi_star,
        max_blocks,
        blocks_run,
        visits,
        hits,
        halted,
        warning,
    })
}

/// Iterates of `I_{β*}` under a level map with datum `π*`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdjacencyReport {
    /// `l_j`: first iterate index inside `I_{A_{d−j}}`.
    pub markers: Vec<u64>,
    /// Letters `A_d, A_{d−1}, …, A_2`.
    pub letters: Vec<String>,
    /// Number of iterates contained in each letter's interval.
    pub counts: Vec<u64>,
    /// Iterates are consecutive translates sharing endpoints.
    pub adjacent: bool,
    /// Counts also confirmed by explicit rational iteration.
    pub explicit: bool,
    /// `nC(n) − 2`.
    pub threshold: i64,
    pub meets_threshold: bool,
}

/// Markers and per-letter counts of the iterates `T^i(I_{β*})`, `i ≥ 1`,
/// while they stay in `[λ_{β*}, 1)`. Explicit iteration runs when at most
/// `cap` iterates are involved.
pub fn adjacency_structure(t: &Iet, n: u64, schedule: &Schedule, cap: u64) -> Result<AdjacencyReport> {
    let d = t.d();
    let pi_star = canonical_rotation_perm_in(t.perm().alphabet().to_vec())?;
    if t.perm() != &pi_star {
        return Err(Error::Invalid(format!("level datum {} is not {}", t.perm(), pi_star)));
    }
    let lam = t.lambda();
    let b = &lam[0];
    let ivs = t.intervals();
    let one = Rational::one();
    let mut markers = Vec::new();
    let mut letters = Vec::new();
    let mut counts = Vec::new();
    for k in (1..d).rev() {
        let iv = &ivs[k];
        // T^i(I_{β*}) = [1 − iλ, 1 − (i−1)λ)
        let lo = ((&one - &iv.right) / b).ceil().to_integer() + 1;
        let hi = ((&one - &iv.left) / b).floor().to_integer();
        let c = if hi >= lo { (&hi - &lo + BigInt::one()).to_u64().unwrap_or(u64::MAX) } else { 0 };
        markers.push(lo.to_u64().unwrap_or(u64::MAX));
        letters.push(pi_star.symbol(k).to_string());
        counts.push(c);
    }
    let last = ((&one - b) / b).floor().to_integer();
    let mut explicit = false;
    let mut adjacent = true;
    if last <= BigInt::from(cap) {
        let it = IntIet::new(t);
        let width = &it.bounds[0].1 - &it.bounds[0].0;
        let mut left = &it.bounds[0].0 + &it.shift[0];
        let mut seen = vec![0u64; d];
        let last = last.to_u64().unwrap();
        for i in 1..=last {
            let a = it.letter_at(&left).ok_or_else(|| Error::OutOfRange("orbit leaves [0,1)".into()))?;
            if a != 0 && &left + &width <= it.bounds[a].1 {
                seen[a] += 1;
            }
            if i < last {
                let next = &left + &it.shift[a];
                adjacent &= &next + &width == left;
                left = next;
            }
        }
        let expected: Vec<u64> = (1..d).rev().map(|k| seen[k]).collect();
        explicit = expected == counts;
        if !explicit {
            return Err(Error::Invalid(format!("explicit counts {expected:?} disagree with {counts:?}")));
        }
    }
    let threshold = (schedule.weight(n) - BigInt::from(2)).to_i64().unwrap_or(i64::MAX);
    let meets_threshold = counts.iter().all(|&c| (c as i128) >= threshold as i128);
    Ok(AdjacencyReport { markers, letters, counts, adjacent, explicit, threshold, meets_threshold })
}

/// Letters of the canonical datum `π*` and its bottom predecessor `π_*`.
pub fn hat_a_context(d: usize) -> Result<(Perm, Perm)> {
    let pi_star = canonical_rotation_perm(d)?;
    let lower = pi_star.predecessor(RvType::Bottom).expect("rotation datum has a bottom predecessor");
    Ok((pi_star, lower))
}

/// `min{c0, 1/(nC(n))} > λ_{β*} − λ_{δ*} > 0` and `min λ > c0`, with `λ`
/// indexed over the default alphabet.
pub fn hat_a_membership(lambda: &[Rational], n: u64, c0: &Rational, schedule: &Schedule) -> Result<bool> {
    let d = lambda.len();
    let (pi_star, _) = hat_a_context(d)?;
    let s = star_letters(&pi_star);
    let gap = &lambda[s.beta_star] - &lambda[s.delta_star];
    let w = schedule.weight(n);
    if w.is_zero() {
        return Err(Error::OutOfRange("nC(n) must be positive".into()));
    }
    let bound = c0.clone().min(Rational::new(BigInt::one(), w));
    Ok(gap.is_positive() && gap < bound && lambda.iter().all(|x| x > c0))
}

/// Outcome of one induction step from `(λ, π_*)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HatAStep {
    pub bottom_type: bool,
    pub lands_on_pi_star: bool,
    /// `min_{α≠β*} λ'_α / (nC(n) λ'_{β*})`.
    pub c_d: f64,
    pub min_other: f64,
}

pub fn hat_a_step(lambda: &[Rational], n: u64, schedule: &Schedule) -> Result<HatAStep> {
    let (pi_star, lower) = hat_a_context(lambda.len())?;
    let t = build_iet(lambda.to_vec(), lower)?;
    let bottom_type = rv_type(&t)? == RvType::Bottom;
    let (next, _) = rv_step(&t)?;
    let beta = star_letters(&pi_star).beta_star;
    let l = next.lambda();
    let min_other = (0..l.len()).filter(|&a| a != beta).map(|a| l[a].clone()).min().unwrap();
    let w = Rational::from_integer(schedule.weight(n));
    Ok(HatAStep {
        bottom_type,
        lands_on_pi_star: next.perm() == &pi_star,
        c_d: rational_to_f64(&(&min_other / (&w * &l[beta]))),
        min_other: rational_to_f64(&min_other),
    })
}

/// A path in the Rauzy diagram with a positive matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaPath {
    pub start: Perm,
    pub moves: Vec<RvType>,
    pub perms: Vec<Perm>,
    pub matrix: IntMatrix,
}

/// Shortest path starting with a top move from a rotation-type datum,
/// ending at `π_*` through a bottom move, whose matrix is positive.
pub fn shortest_gamma(d: usize) -> Result<GammaPath> {
    if d * d > 64 {
        return Err(Error::OutOfRange("pattern search supports d ≤ 8".into()));
    }
    let (pi_star, lower) = hat_a_context(d)?;
    let class = rauzy_class(&pi_star, crate::combinat::DEFAULT_CLASS_CAP)?;
    let goal = class.index_of(&lower).expect("predecessor lies in the class");
    let full: u64 = if d * d == 64 { u64::MAX } else { (1u64 << (d * d)) - 1 };
    let ident: u64 = (0..d).map(|i| 1u64 << (i * d + i)).sum();
    let succ: HashMap<(usize, RvType), usize> = class.arcs.iter().map(|&(a, e, b)| ((a, e), b)).collect();
    let apply = |pat: u64, p: &Perm, eps: RvType| {
        let (w, l) = match eps {
            RvType::Top => (p.alpha_t(), p.alpha_b()),
            RvType::Bottom => (p.alpha_b(), p.alpha_t()),
        };
        let mut out = pat;
        for r in 0..d {
            if pat >> (r * d + w) & 1 == 1 {
                out |= 1 << (r * d + l);
            }
        }
        out
    };
    type State = (usize, u64, RvType);
    let mut parent: HashMap<State, Option<State>> = HashMap::new();
    let mut queue = VecDeque::new();
    for (i, p) in class.perms.iter().enumerate() {
        if p.is_rotation_type() {
            let s = (succ[&(i, RvType::Top)], apply(ident, p, RvType::Top), RvType::Top);
            let root = (i, ident, RvType::Top);
            parent.entry(root).or_insert(None);
            if let std::collections::hash_map::Entry::Vacant(e) = parent.entry(s) {
                e.insert(Some(root));
                queue.push_back(s);
            }
        }
    }
    let mut found = None;
    while let Some(s) = queue.pop_front() {
        if s.0 == goal && s.2 == RvType::Bottom && s.1 == full {
            found = Some(s);
            break;
        }
        for eps in [RvType::Top, RvType::Bottom] {
            let nxt = (succ[&(s.0, eps)], apply(s.1, &class.perms[s.0], eps), eps);
            if let std::collections::hash_map::Entry::Vacant(e) = parent.entry(nxt) {
                e.insert(Some(s));
                queue.push_back(nxt);
            }
        }
    }
    let mut s = found.ok_or_else(|| Error::Invalid("no positive path found".into()))?;
    let mut chain = vec![s];
    while let Some(Some(p)) = parent.get(&s) {
        chain.push(*p);
        s = *p;
    }
    chain.reverse();
    let perms: Vec<Perm> = chain.iter().map(|s| class.perms[s.0].clone()).collect();
    let moves: Vec<RvType> = chain[1..].iter().map(|s| s.2).collect();
    let mut matrix = IntMatrix::identity(d);
    for (p, &eps) in perms.iter().zip(&moves) {
        let (w, l) = match eps {
            RvType::Top => (p.alpha_t(), p.alpha_b()),
            RvType::Bottom => (p.alpha_b(), p.alpha_t()),
        };
        matrix.add_column(l, w, &BigInt::one());
    }
    Ok(GammaPath { start: perms[0].clone(), moves, perms, matrix })
}

/// How the first criterion condition was established.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Cond1Witness {
    /// All floors materialized and pairwise disjoint.
    Floors { count: u64 },
    /// Exact identity `Σ_α h_α μ(I^(n)_α) = 1` over induction bases.
    MeasureTiling,
    Overlap(OverlapWitness),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionEntry {
    pub level: usize,
    pub letter: String,
    pub height: String,
    pub designated: bool,
    pub cond1: bool,
    pub cond1_witness: Cond1Witness,
    pub cond2: bool,
    pub cond3: bool,
    /// Measure of the tower.
    pub measure: f64,
    pub cond4: bool,
    /// `|e^{ω^(n)_α} − 1|`.
    pub slope_gap: f64,
    pub m: u64,
    pub m_capped: bool,
    pub m_target: Option<i64>,
    pub cond5: Option<bool>,
    pub log_h: f64,
    /// `M_n / log h_n`; infinite when `h = 1`.
    pub m_over_log_h: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionReport {
    pub levels: Vec<usize>,
    pub entries: Vec<CriterionEntry>,
    /// Smallest tower measure over the checked levels, per letter.
    pub measure_inf: Vec<f64>,
    pub measure_floor: f64,
    /// False when the slope condition fails everywhere.
    pub applicable: bool,
    pub note: Option<String>,
}

impl CriterionReport {
    pub fn designated(&self, level: usize) -> impl Iterator<Item = &CriterionEntry> {
        self.entries.iter().filter(move |e| e.level == level && e.designated)
    }

    /// CSV rows `n,letter,M_n,log h_n,ratio`.
    pub fn csv_rows(&self) -> Vec<[String; 5]> {
        self.entries
            .iter()
            .map(|e| {
                [
                    e.level.to_string(),
                    e.letter.clone(),
                    e.m.to_string(),
                    format!("{:.17e}", e.log_h),
                    format!("{:.17e}", e.m_over_log_h),
                ]
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct CriterionOptions {
    pub m_cap: u64,
    pub floor_cap: u64,
    /// Lower bound a tower measure must exceed.
    pub measure_floor: Rational,
    /// Required `M_n`, as a function of `n`.
    pub m_target: Option<Schedule>,
    /// Extra blocks run past the deepest level to estimate the measure of an AIET.
    pub lookahead: usize,
}

impl Default for CriterionOptions {
    fn default() -> Self {
        CriterionOptions {
            m_cap: DEFAULT_M_CAP,
            floor_cap: DEFAULT_FLOOR_CAP,
            measure_floor: Rational::new(BigInt::one(), BigInt::from(4096)),
            m_target: None,
            lookahead: 40,
        }
    }
}

/// `M`: largest `k ≤ cap` with `⋂_{j≤k} g^j`-chains nonempty, for the affine
/// branch `g(x) = img + s(x − lo)` on `F = [lo, hi)`. Each image is shrunk
/// by a rounding margin, so the count never exceeds the true one.
pub fn rigidity_count_real(lo: &BigReal, hi: &BigReal, img: &BigReal, s: &BigReal, cap: u64) -> (u64, bool) {
    let p = lo.precision();
    let margin = BigReal::pow2(-((p as i64) - 4), p);
    let (mut jl, mut jr) = (lo.clone(), hi.clone());
    let (mut kl, mut kr) = (lo.clone(), hi.clone());
    for k in 1..=cap {
        let al = jl.max(lo.clone());
        let ar = jr.min(hi.clone());
        if al >= ar {
            return (k - 1, false);
        }
        jl = &(img + &(s * &(&al - lo))) + &margin;
        jr = &(img + &(s * &(&ar - lo))) - &margin;
        if jl >= jr {
            return (k - 1, false);
        }
        kl = kl.max(jl.clone());
        kr = kr.min(jr.clone());
        if kl >= kr {
            return (k - 1, false);
        }
    }
    (cap, true)
}

/// Exact version of [`rigidity_count_real`] over rationals.
pub fn rigidity_count_exact(f: &Interval, img: &Rational, s: &Rational, cap: u64) -> (u64, bool) {
    let mut j = f.clone();
    let mut k_int = f.clone();
    for k in 1..=cap {
        let Some(a) = j.intersect(f) else { return (k - 1, false) };
        j = Interval { left: img + s * (&a.left - &f.left), right: img + s * (&a.right - &f.left) };
        match k_int.intersect(&j) {
            Some(x) => k_int = x,
            None => return (k - 1, false),
        }
    }
    (cap, true)
}

/// `M = ⌈|F| / |w|⌉ − 1` for a translation by `w ≠ 0`.
pub fn rigidity_count_translation(len: &Rational, w: &Rational, cap: u64) -> (u64, bool) {
    if w.is_zero() {
        return (cap, true);
    }
    let m: BigInt = (len / w.abs()).ceil().to_integer() - BigInt::one();
    match m.to_u64() {
        Some(m) if m < cap => (m, false),
        _ => (cap, true),
    }
}

struct LevelView {
    level: usize,
    perm: Perm,
    heights: Vec<BigInt>,
    measures: Vec<f64>,
    measure_ok: Vec<bool>,
    cond1: Vec<(bool, Cond1Witness)>,
    cond2: bool,
    omega: Vec<f64>,
    /// Per letter: `(M, capped)`.
    rigidity: Vec<(u64, bool)>,
}

fn assemble(views: Vec<LevelView>, opts: &CriterionOptions) -> CriterionReport {
    let d = views.first().map(|v| v.perm.d()).unwrap_or(0);
    let mut entries = Vec::new();
    let mut measure_inf = vec![f64::INFINITY; d];
    for v in &views {
        let beta = v.perm.alpha_b();
        let designated = (0..d)
            .filter(|&a| a != beta)
            .max_by(|&a, &b| v.omega[a].abs().partial_cmp(&v.omega[b].abs()).unwrap().then(b.cmp(&a)));
        for a in 0..d {
            measure_inf[a] = measure_inf[a].min(v.measures[a]);
            let (m, m_capped) = v.rigidity[a];
            let log_h = ln_bigint(&v.heights[a]);
            let gap = v.omega[a].exp_m1().abs();
            let m_target = opts.m_target.as_ref().map(|s| (s.weight(v.level as u64) - BigInt::from(2)).to_i64().unwrap_or(i64::MAX));
            entries.push(CriterionEntry {
                level: v.level,
                letter: v.perm.symbol(a).to_string(),
                height: v.heights[a].to_string(),
                designated: Some(a) == designated,
                cond1: v.cond1[a].0,
                cond1_witness: v.cond1[a].1.clone(),
                cond2: v.cond2,
                cond3: v.measure_ok[a],
                measure: v.measures[a],
                cond4: v.omega[a] != 0.0 && gap > 0.0,
                slope_gap: gap,
                m,
                m_capped,
                m_target,
                cond5: m_target.map(|t| (m as i128) >= t as i128),
                log_h,
                m_over_log_h: if log_h > 0.0 { m as f64 / log_h } else { f64::INFINITY },
            });
        }
    }
    let applicable = entries.iter().any(|e| e.cond4);
    let note = (!applicable).then(|| "slope condition fails at every level: criterion inapplicable".to_string());
    CriterionReport {
        levels: views.iter().map(|v| v.level).collect(),
        entries,
        measure_inf,
        measure_floor: rational_to_f64(&opts.measure_floor),
        applicable,
        note,
    }
}

fn check_levels(levels: &[usize]) -> Result<usize> {
    levels.iter().copied().max().ok_or_else(|| Error::Invalid("no levels requested".into()))
}

/// Criterion check for the AIET with Rauzy path of `t` and log-slope `ω`.
/// Such an AIET is conjugate to `t`, so heights, tower measures and the
/// rigidity counts are those of `t`, computed exactly; the slopes at level
/// `n` are `e^{B^(n)ᵀ ω}`.
pub fn check_criterion_over_iet(
    t: &Iet,
    omega: &[Rational],
    levels: &[usize],
    opts: &CriterionOptions,
) -> Result<CriterionReport> {
    let d = t.d();
    if omega.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: omega.len() });
    }
    if !crate::num::dot(omega, t.lambda()).is_zero() {
        return Err(Error::Invalid("log-slope must be orthogonal to the lengths".into()));
    }
    let rec = orbit(t, check_levels(levels)?)?;
    let q = rat_int(rec.scale.clone());
    let mut views = Vec::new();
    for &n in levels {
        let heights = rec.heights[n].clone();
        let perm = rec.perms[n].clone();
        let measures_exact: Vec<Rational> =
            (0..d).map(|a| Rational::from_integer(&heights[a] * &rec.lengths[n][a]) / &q).collect();
        let ts = towers_from_record(&rec, n, opts.floor_cap)?;
        let cond1 = ts
            .towers
            .iter()
            .map(|tw| match &tw.floors {
                Some(f) => (true, Cond1Witness::Floors { count: f.len() as u64 }),
                None => (true, Cond1Witness::MeasureTiling),
            })
            .collect();
        let omega_n = rec.cumulative[n].tmul_vec_rat(omega);
        let tn = rec.iet(n);
        let rigidity = (0..d)
            .map(|a| rigidity_count_translation(&tn.lambda()[a], &tn.translation_vector()[a], opts.m_cap))
            .collect();
        views.push(LevelView {
            level: n,
            perm,
            heights,
            measures: measures_exact.iter().map(rational_to_f64).collect(),
            measure_ok: measures_exact.iter().map(|m| m > &opts.measure_floor).collect(),
            cond1,
            cond2: true,
            omega: omega_n.iter().map(rational_to_f64).collect(),
            rigidity,
        });
    }
    Ok(assemble(views, opts))
}

fn branch_rigidity(g: &Aiet, cap: u64) -> Vec<(u64, bool)> {
    let lefts = g.domain_lefts();
    let imgs = g.image_lefts();
    (0..g.d())
        .map(|a| {
            let hi = &lefts[a] + &g.lengths()[a];
            rigidity_count_real(&lefts[a], &hi, &imgs[a], &g.log_slope()[a].exp(), cap)
        })
        .collect()
}

/// Criterion check for an IET, where every branch is a translation.
pub fn check_criterion_iet(t: &Iet, levels: &[usize], opts: &CriterionOptions) -> Result<CriterionReport> {
    let d = t.d();
    let rec = orbit(t, check_levels(levels)?)?;
    let q = rat_int(rec.scale.clone());
    let mut views = Vec::new();
    for &n in levels {
        let tn = rec.iet(n);
        let heights = rec.heights[n].clone();
        let measures_exact: Vec<Rational> =
            (0..d).map(|a| Rational::from_integer(&heights[a] * &rec.lengths[n][a]) / &q).collect();
        let ts = towers_from_record(&rec, n, opts.floor_cap)?;
        let cond1 = ts
            .towers
            .iter()
            .map(|tw| match &tw.floors {
                Some(f) => (true, Cond1Witness::Floors { count: f.len() as u64 }),
                None => (true, Cond1Witness::MeasureTiling),
            })
            .collect();
        let rigidity = (0..d)
            .map(|a| rigidity_count_translation(&tn.lambda()[a], &tn.translation_vector()[a], opts.m_cap))
            .collect();
        views.push(LevelView {
            level: n,
            perm: rec.perms[n].clone(),
            heights,
            measures: measures_exact.iter().map(rational_to_f64).collect(),
            measure_ok: measures_exact.iter().map(|m| m > &opts.measure_floor).collect(),
            cond1,
            cond2: true,
            omega: vec![0.0; d],
            rigidity,
        });
    }
    Ok(assemble(views, opts))
}

/// Criterion check running the AIET forward. Tower measures use the path
/// estimate over `opts.lookahead` further blocks.
pub fn check_criterion(f: &Aiet, levels: &[usize], opts: &CriterionOptions) -> Result<CriterionReport> {
    let d = f.d();
    let deepest = check_levels(levels)?;
    let mut snaps: HashMap<usize, Aiet> = HashMap::new();
    let orb = aiet_orbit_inspect(f, deepest + opts.lookahead, DEFAULT_MAX_RV_STEPS, |k, g, _| {
        if levels.contains(&k) {
            snaps.insert(k, g.clone());
        }
    });
    if orb.n_blocks() < deepest {
        return Err(orb.halted.unwrap_or_else(|| Error::Invalid("orbit ended early".into())));
    }
    let weights = measure_from_blocks(&orb.blocks, d, f64::INFINITY)?;
    let floor = rational_to_f64(&opts.measure_floor);
    let mut views = Vec::new();
    for &n in levels {
        let g = &snaps[&n];
        let heights = weights.heights[n].clone();
        let measures = weights.tower_weights(n);
        let total: BigInt = heights.iter().sum();
        let cond1 = if total <= BigInt::from(opts.floor_cap) {
            let ts = aiet_towers_at_level(f, n, opts.floor_cap)?;
            let tol = BigReal::pow2(-((f.precision() as i64) - 16), 64).to_f64();
            let ok = ts.max_overlap.unwrap_or(0.0) <= tol && ts.tiling_defect.unwrap_or(0.0) <= tol;
            let w = match (ok, find_overlap(&ts.towers)) {
                (false, Some(w)) => Cond1Witness::Overlap(w),
                _ => Cond1Witness::Floors { count: total.to_u64().unwrap() },
            };
            vec![(ok, w); d]
        } else {
            vec![(weights.tower_sum_is_one(n), Cond1Witness::MeasureTiling); d]
        };
        views.push(LevelView {
            level: n,
            perm: g.perm().clone(),
            heights,
            measure_ok: measures.iter().map(|m| *m > floor).collect(),
            measures,
            cond1,
            cond2: true,
            omega: g.log_slope().iter().map(|w| w.to_f64()).collect(),
            rigidity: branch_rigidity(g, opts.m_cap),
        });
    }
    Ok(assemble(views, opts))
}

/// Renormalized IET `R^n(T)` (normalized).
pub fn level_iet(t: &Iet, n: usize) -> Result<Iet> {
    Ok(orbit(t, n)?.iet(n))
}

/// Exact re-check of the four conditions at level `n` from a fresh orbit.
pub fn recheck_conditions(t: &Iet, n: usize, c0: &Rational, schedule: &Schedule) -> Result<ConditionVerdicts> {
    let rec = orbit(t, n)?;
    let pi_star = canonical_rotation_perm_in(t.perm().alphabet().to_vec())?;
    let (len, _) = integer_lengths(&rec.lambda(n));
    Ok(evaluate_conditions(&rec.perms[n], &pi_star, &len, &rec.heights[n], n as u64, c0, schedule))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rat;

    fn rot3() -> Iet {
        build_iet(vec![rat(314159, 1000000), rat(271828, 1000000), rat(414213, 1000000)], Perm::parse("A B C / B C A").unwrap())
            .unwrap()
    }

    #[test]
    fn level_zero_towers_are_branches() {
        let t = rot3();
        let ts = towers_at_level(&t, 0, 10).unwrap();
        assert!(ts.towers.iter().all(|x| x.height == BigInt::one()));
        assert_eq!(ts.tiling_sum, Rational::one());
    }

    #[test]
    fn towers_tile_at_depth() {
        let ts = towers_at_level(&rot3(), 6, 100_000).unwrap();
        assert!(ts.floors_checked);
    }

    #[test]
    fn log2_schedule() {
        let s = Schedule::Log2;
        assert_eq!((s.c(0), s.c(1), s.c(2), s.c(6), s.c(7)), (1, 2, 2, 3, 4));
    }

    #[test]
    fn translation_count_matches_iteration() {
        let f = Interval::new(rat(0, 1), rat(1, 3)).unwrap();
        let w = rat(1, 20);
        let (m, _) = rigidity_count_translation(&f.len(), &w, 1000);
        let (m2, _) = rigidity_count_exact(&f, &(&f.left + &w), &Rational::one(), 1000);
        assert_eq!((m, m2), (6, 6));
    }

    #[test]
    fn gamma_exists_for_three() {
        let g = shortest_gamma(3).unwrap();
        assert!(g.matrix.is_positive());
        assert_eq!(g.moves[0], RvType::Top);
        assert_eq!(*g.moves.last().unwrap(), RvType::Bottom);
    }
}
