//! Combinatorial data of interval exchanges: permutations over an ordered
//! alphabet, monodromy, rotation type, the intersection matrix and its kernel,
//! Rauzy moves and Rauzy classes.

use crate::error::{Error, Result};
use crate::num::{null_space, primitive_integer, IntMatrix, Rational};
use num_bigint::BigInt;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::{HashMap, VecDeque};
use std::fmt;

/// Type of a Rauzy–Veech move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum RvType {
    Top,
    Bottom,
}

impl RvType {
    pub fn flip(self) -> RvType {
        match self {
            RvType::Top => RvType::Bottom,
            RvType::Bottom => RvType::Top,
        }
    }

    /// 0 for top, 1 for bottom.
    pub fn index(self) -> u8 {
        match self {
            RvType::Top => 0,
            RvType::Bottom => 1,
        }
    }
}

impl fmt::Display for RvType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RvType::Top => "top",
            RvType::Bottom => "bottom",
        })
    }
}

/// Combinatorial datum: the letters of an ordered alphabet listed in the
/// order of the top row (before the map) and of the bottom row (after).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Perm {
    alphabet: Vec<String>,
    top: Vec<usize>,
    bottom: Vec<usize>,
}

fn default_symbol(i: usize) -> String {
    if i < 26 {
        ((b'A' + i as u8) as char).to_string()
    } else {
        format!("L{i}")
    }
}

pub fn default_alphabet(d: usize) -> Vec<String> {
    (0..d).map(default_symbol).collect()
}

fn is_bijection(row: &[usize], d: usize) -> bool {
    let mut seen = vec![false; d];
    row.len() == d && row.iter().all(|&x| x < d && !std::mem::replace(&mut seen[x], true))
}

impl Perm {
    /// Rows are given as letter indices into `alphabet`.
    pub fn new(alphabet: Vec<String>, top: Vec<usize>, bottom: Vec<usize>) -> Result<Perm> {
        let d = alphabet.len();
        if d < 2 {
            return Err(Error::InvalidPerm(format!("need at least 2 letters, got {d}")));
        }
        let mut names = alphabet.clone();
        names.sort();
        names.dedup();
        if names.len() != d {
            return Err(Error::InvalidPerm("repeated symbol in alphabet".into()));
        }
        if !is_bijection(&top, d) || !is_bijection(&bottom, d) {
            return Err(Error::InvalidPerm("rows are not bijections onto the alphabet".into()));
        }
        Ok(Perm { alphabet, top, bottom })
    }

    /// Builds from symbol rows; the alphabet order is the top-row order.
    pub fn from_rows<S: AsRef<str>>(top: &[S], bottom: &[S]) -> Result<Perm> {
        let alphabet: Vec<String> = top.iter().map(|s| s.as_ref().to_string()).collect();
        Self::from_rows_in(alphabet, top, bottom)
    }

    /// Builds from symbol rows over a given alphabet order.
    pub fn from_rows_in<S: AsRef<str>>(alphabet: Vec<String>, top: &[S], bottom: &[S]) -> Result<Perm> {
        let index: HashMap<&str, usize> =
            alphabet.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let lookup = |row: &[S]| -> Result<Vec<usize>> {
            row.iter()
                .map(|s| {
                    index
                        .get(s.as_ref())
                        .copied()
                        .ok_or_else(|| Error::InvalidPerm(format!("unknown symbol {:?}", s.as_ref())))
                })
                .collect()
        };
        let t = lookup(top)?;
        let b = lookup(bottom)?;
        Perm::new(alphabet.clone(), t, b)
    }

    /// Parses `"A B C / C A B"`.
    pub fn parse(s: &str) -> Result<Perm> {
        let (t, b) = s
            .split_once('/')
            .ok_or_else(|| Error::Parse(format!("expected 'top / bottom', got {s:?}")))?;
        let t: Vec<&str> = t.split_whitespace().collect();
        let b: Vec<&str> = b.split_whitespace().collect();
        Perm::from_rows(&t, &b)
    }

    pub fn d(&self) -> usize {
        self.alphabet.len()
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn symbol(&self, letter: usize) -> &str {
        &self.alphabet[letter]
    }

    pub fn letter(&self, symbol: &str) -> Option<usize> {
        self.alphabet.iter().position(|s| s == symbol)
    }

    pub fn top(&self) -> &[usize] {
        &self.top
    }

    pub fn bottom(&self) -> &[usize] {
        &self.bottom
    }

    /// π_t(α), 1-based.
    pub fn pos_top(&self, letter: usize) -> usize {
        self.top.iter().position(|&x| x == letter).unwrap() + 1
    }

    /// π_b(α), 1-based.
    pub fn pos_bottom(&self, letter: usize) -> usize {
        self.bottom.iter().position(|&x| x == letter).unwrap() + 1
    }

    fn positions(row: &[usize]) -> Vec<usize> {
        let mut p = vec![0; row.len()];
        for (i, &a) in row.iter().enumerate() {
            p[a] = i;
        }
        p
    }

    /// 0-based top positions indexed by letter.
    pub fn top_positions(&self) -> Vec<usize> {
        Self::positions(&self.top)
    }

    pub fn bottom_positions(&self) -> Vec<usize> {
        Self::positions(&self.bottom)
    }

    /// Last letter of the top row.
    pub fn alpha_t(&self) -> usize {
        *self.top.last().unwrap()
    }

    /// Last letter of the bottom row.
    pub fn alpha_b(&self) -> usize {
        *self.bottom.last().unwrap()
    }

    /// π_b ∘ π_t⁻¹ on {1..d}; entry `i-1` holds the image of `i`.
    pub fn monodromy(&self) -> Vec<usize> {
        let pb = self.bottom_positions();
        self.top.iter().map(|&a| pb[a] + 1).collect()
    }

    /// The shift `k` with `m(i) - 1 ≡ i + k (mod d)` for all `i`, if any.
    pub fn rotation_shift(&self) -> Option<usize> {
        let d = self.d();
        let m = self.monodromy();
        (0..d).find(|&k| (1..=d).all(|i| (m[i - 1] + d - 1) % d == (i + k) % d))
    }

    pub fn is_rotation_type(&self) -> bool {
        self.rotation_shift().is_some()
    }

    pub fn is_irreducible(&self) -> bool {
        let m = self.monodromy();
        let mut max = 0;
        for (k, &v) in m.iter().enumerate().take(self.d() - 1) {
            max = max.max(v);
            if max == k + 1 {
                return false;
            }
        }
        true
    }

    /// Intersection matrix Ω_π indexed by letters.
    pub fn omega_matrix(&self) -> IntMatrix {
        let d = self.d();
        let pt = self.top_positions();
        let pb = self.bottom_positions();
        let mut m = IntMatrix::zeros(d);
        for a in 0..d {
            for b in 0..d {
                let v = if pb[a] > pb[b] && pt[a] < pt[b] {
                    1
                } else if pb[a] < pb[b] && pt[a] > pt[b] {
                    -1
                } else {
                    0
                };
                if v != 0 {
                    m.set(a, b, BigInt::from(v));
                }
            }
        }
        m
    }

    /// Integer basis of Ker Ω_π: content-free rows from the reduced echelon
    /// form (pivots taken from the last letters), sorted lexicographically
    /// in decreasing order.
    pub fn kernel_basis(&self) -> Vec<Vec<BigInt>> {
        let d = self.d();
        let om = self.omega_matrix().to_rational();
        let mut basis: Vec<Vec<BigInt>> =
            null_space(&om, d).iter().map(|v| primitive_integer(v)).collect();
        basis.sort_by(|a, b| b.cmp(a));
        basis
    }

    pub fn kernel_basis_rational(&self) -> Vec<Vec<Rational>> {
        self.kernel_basis()
            .into_iter()
            .map(|v| v.into_iter().map(Rational::from_integer).collect())
            .collect()
    }

    /// Combinatorial datum after a Rauzy–Veech move of type `eps`.
    pub fn successor(&self, eps: RvType) -> Perm {
        let mut p = self.clone();
        match eps {
            RvType::Top => {
                let w = self.alpha_t();
                let l = p.bottom.pop().unwrap();
                let at = p.bottom.iter().position(|&x| x == w).unwrap();
                p.bottom.insert(at + 1, l);
            }
            RvType::Bottom => {
                let w = self.alpha_b();
                let l = p.top.pop().unwrap();
                let at = p.top.iter().position(|&x| x == w).unwrap();
                p.top.insert(at + 1, l);
            }
        }
        p
    }

    /// The unique π with `π.successor(eps) == self`, when it exists.
    pub fn predecessor(&self, eps: RvType) -> Option<Perm> {
        let mut p = self.clone();
        let (fixed, moved) = match eps {
            RvType::Top => (&self.top, &mut p.bottom),
            RvType::Bottom => (&self.bottom, &mut p.top),
        };
        let w = *fixed.last().unwrap();
        let at = moved.iter().position(|&x| x == w).unwrap();
        if at + 1 == moved.len() {
            return None;
        }
        let l = moved.remove(at + 1);
        moved.push(l);
        Some(p)
    }

    /// Relabels letters so that the alphabet order equals the top row.
    pub fn with_top_alphabet(&self) -> Perm {
        let alphabet: Vec<String> = self.top.iter().map(|&a| self.alphabet[a].clone()).collect();
        let top: Vec<&str> = self.top.iter().map(|&a| self.symbol(a)).collect();
        let bottom: Vec<&str> = self.bottom.iter().map(|&a| self.symbol(a)).collect();
        Perm::from_rows_in(alphabet, &top, &bottom).unwrap()
    }

    pub fn top_symbols(&self) -> Vec<&str> {
        self.top.iter().map(|&a| self.symbol(a)).collect()
    }

    pub fn bottom_symbols(&self) -> Vec<&str> {
        self.bottom.iter().map(|&a| self.symbol(a)).collect()
    }
}

impl fmt::Display for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} / {}", self.top_symbols().join(" "), self.bottom_symbols().join(" "))
    }
}

impl fmt::Debug for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({self})")
    }
}

#[derive(Serialize, Deserialize)]
struct PermRows {
    top: Vec<String>,
    bottom: Vec<String>,
}

impl Serialize for Perm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PermRows {
            top: self.top_symbols().iter().map(|x| x.to_string()).collect(),
            bottom: self.bottom_symbols().iter().map(|x| x.to_string()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Perm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Perm, D::Error> {
        let rows = PermRows::deserialize(d)?;
        Perm::from_rows(&rows.top, &rows.bottom).map_err(serde::de::Error::custom)
    }
}

/// `(A₁…A_d / A₂…A_d A₁)` over the default alphabet.
pub fn canonical_rotation_perm(d: usize) -> Result<Perm> {
    if d < 2 {
        return Err(Error::InvalidPerm(format!("need d >= 2, got {d}")));
    }
    canonical_rotation_perm_in(default_alphabet(d))
}

/// Same representative with identity top row over a given alphabet.
pub fn canonical_rotation_perm_in(alphabet: Vec<String>) -> Result<Perm> {
    let d = alphabet.len();
    let top: Vec<usize> = (0..d).collect();
    let bottom: Vec<usize> = (1..d).chain([0]).collect();
    Perm::new(alphabet, top, bottom)
}

/// Letters distinguished by the canonical rotation datum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StarLetters {
    /// Last letter of the top row.
    pub alpha_star: usize,
    /// Last letter of the bottom row.
    pub beta_star: usize,
    /// Last top letter of the bottom-move predecessor.
    pub delta_star: usize,
}

pub fn star_letters(pi_star: &Perm) -> StarLetters {
    let pred = pi_star.predecessor(RvType::Bottom).expect("rotation datum has a bottom predecessor");
    StarLetters {
        alpha_star: pi_star.alpha_t(),
        beta_star: pi_star.alpha_b(),
        delta_star: pred.alpha_t(),
    }
}

/// Rauzy class with arcs between discovery indices.
#[derive(Debug, Clone)]
pub struct RauzyClass {
    pub perms: Vec<Perm>,
    pub arcs: Vec<(usize, RvType, usize)>,
    index: HashMap<Perm, usize>,
}

pub const DEFAULT_CLASS_CAP: usize = 1_000_000;

/// Breadth-first closure of `pi` under both moves; top successors are
/// discovered before bottom ones.
pub fn rauzy_class(pi: &Perm, cap: usize) -> Result<RauzyClass> {
    if !pi.is_irreducible() {
        return Err(Error::Reducible);
    }
    let mut perms = vec![pi.clone()];
    let mut index = HashMap::from([(pi.clone(), 0usize)]);
    let mut arcs = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        for eps in [RvType::Top, RvType::Bottom] {
            let next = perms[i].successor(eps);
            let j = match index.get(&next) {
                Some(&j) => j,
                None => {
                    if perms.len() >= cap {
                        return Err(Error::ResourceGuard(format!("Rauzy class exceeds {cap} permutations")));
                    }
                    perms.push(next.clone());
                    index.insert(next, perms.len() - 1);
                    queue.push_back(perms.len() - 1);
                    perms.len() - 1
                }
            };
            arcs.push((i, eps, j));
        }
    }
    Ok(RauzyClass { perms, arcs, index })
}

impl RauzyClass {
    pub fn len(&self) -> usize {
        self.perms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perms.is_empty()
    }

    pub fn index_of(&self, p: &Perm) -> Option<usize> {
        self.index.get(p).copied()
    }

    pub fn contains(&self, p: &Perm) -> bool {
        self.index.contains_key(p)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "nodes": self.perms,
            "edges": self.arcs.iter().map(|(a, e, b)| serde_json::json!({"from": a, "type": e, "to": b})).collect::<Vec<_>>(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Perm {
        Perm::parse(s).unwrap()
    }

    #[test]
    fn monodromy_examples() {
        assert_eq!(p("A B C D / B C D A").monodromy(), vec![4, 1, 2, 3]);
        assert_eq!(p("A B / B A").monodromy(), vec![2, 1]);
        assert_eq!(p("A B C / A B C").monodromy(), vec![1, 2, 3]);
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(p("A B C D / B C D A").rotation_shift(), Some(2));
        assert!(p("A C B D / C B D A").is_rotation_type());
        assert!(!p("A B C D / D C B A").is_rotation_type());
    }

    #[test]
    fn irreducibility_examples() {
        assert!(p("A B / B A").is_irreducible());
        assert!(!p("A B / A B").is_irreducible());
        assert!(!p("A B C D / B A D C").is_irreducible());
    }

    #[test]
    fn omega_d2() {
        assert_eq!(p("A B / B A").omega_matrix(), IntMatrix::from_i64(&[&[0, 1], &[-1, 0]]));
    }

    #[test]
    fn kernel_of_canonical_d4() {
        let k = p("A B C D / B C D A").kernel_basis();
        let want: Vec<Vec<BigInt>> = vec![
            [0, 1, 0, -1].iter().map(|&x| BigInt::from(x)).collect(),
            [0, 0, 1, -1].iter().map(|&x| BigInt::from(x)).collect(),
        ];
        assert_eq!(k, want);
        assert!(p("A B / B A").kernel_basis().is_empty());
    }

    #[test]
    fn successor_moves() {
        let pi = p("A B / B A");
        assert_eq!(pi.successor(RvType::Top), pi);
        assert_eq!(pi.successor(RvType::Bottom), pi);
        let q = p("A B C D / D C B A");
        assert_eq!(q.successor(RvType::Top).top(), q.top());
        assert_eq!(q.successor(RvType::Top).to_string(), "A B C D / D A C B");
        assert_eq!(q.successor(RvType::Bottom).to_string(), "A D B C / D C B A");
    }

    #[test]
    fn canonical_predecessor() {
        let star = canonical_rotation_perm(4).unwrap();
        assert_eq!(star.to_string(), "A B C D / B C D A");
        let pred = star.predecessor(RvType::Bottom).unwrap();
        assert_eq!(pred.successor(RvType::Bottom), star);
        let s = star_letters(&star);
        assert_eq!((s.alpha_star, s.beta_star, s.delta_star), (3, 0, 1));
    }

    #[test]
    fn d2_class_is_single() {
        let c = rauzy_class(&p("A B / B A"), 10).unwrap();
        assert_eq!(c.len(), 1);
        assert!(rauzy_class(&p("A B C D / D C B A"), 3).is_err());
    }

    #[test]
    fn json_round_trip() {
        let pi = p("X Y Z / Z X Y");
        let s = serde_json::to_string(&pi).unwrap();
        assert_eq!(s, r#"{"top":["X","Y","Z"],"bottom":["Z","X","Y"]}"#);
        let back: Perm = serde_json::from_str(&s).unwrap();
        assert_eq!(back, pi);
    }
}
