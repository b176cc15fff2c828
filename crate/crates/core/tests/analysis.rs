use iet_core::aiet::realize_along_path;
use iet_core::analysis::{
    adjacency_structure, check_criterion, check_criterion_iet, check_criterion_over_iet, evaluate_conditions,
    find_overlap, generic_condition_scan, hat_a_context, hat_a_membership, hat_a_step, recheck_conditions,
    s_content, s_content_lengths, shortest_gamma, thinned_floor_lengths, tower_from_base, towers_at_level,
    CriterionOptions, Schedule,
};
use iet_core::combinat::{canonical_rotation_perm, rauzy_class, star_letters, Perm, RvType};
use iet_core::iet::{build_iet, Iet, Interval};
use iet_core::num::{random_simplex_point, rat, sample_rng, IntMatrix, Rational};
use iet_core::Error;
use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use proptest::prelude::*;

fn random_iet(seed: u64, perm: &str, bits: u64) -> Iet {
    let p = Perm::parse(perm).unwrap();
    let mut rng = sample_rng(seed, 3);
    build_iet(random_simplex_point(&mut rng, p.d(), bits), p).unwrap()
}

fn rotation_iet(seed: u64, d: usize, bits: u64) -> Iet {
    let p = canonical_rotation_perm(d).unwrap();
    let mut rng = sample_rng(seed, 4);
    build_iet(random_simplex_point(&mut rng, d, bits), p).unwrap()
}

fn pairwise_overlap(ivs: &[Interval]) -> bool {
    for i in 0..ivs.len() {
        for j in i + 1..ivs.len() {
            if ivs[i].left.clone().max(ivs[j].left.clone()) < ivs[i].right.clone().min(ivs[j].right.clone()) {
                return true;
            }
        }
    }
    false
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Level towers partition the interval: floors are disjoint and cover it.
    #[test]
    fn level_towers_partition_the_interval(seed in any::<u64>(), n in 1usize..6) {
        let t = random_iet(seed, "A B C D / D C B A", 256);
        let ts = towers_at_level(&t, n, 1_000_000).unwrap();
        prop_assert_eq!(ts.tiling_sum.clone(), rat(1, 1));
        let mut all: Vec<Interval> = Vec::new();
        for tw in &ts.towers {
            let fl = tw.floors.as_ref().unwrap();
            prop_assert_eq!(BigInt::from(fl.len()), tw.height.clone());
            prop_assert_eq!(fl.interval(0), tw.base.clone());
            all.extend(fl.intervals());
        }
        all.sort_by(|a, b| a.left.cmp(&b.left));
        let mut at = Rational::zero();
        for iv in &all {
            prop_assert_eq!(&iv.left, &at);
            at = iv.right.clone();
        }
        prop_assert_eq!(at, rat(1, 1));
        // s = 1 measures the union; s = 0 counts floors
        prop_assert!((s_content(&ts.towers, 1.0) - 1.0).abs() < 1e-9);
        let h: u64 = ts.towers.iter().map(|t| t.height.to_u64().unwrap()).sum();
        prop_assert!((s_content(&ts.towers, 0.0) - h as f64).abs() < 1e-6);
    }

    /// The overlap finder agrees with a pairwise oracle on arbitrary towers.
    #[test]
    fn overlap_finder_matches_pairwise(seed in any::<u64>(), a in 0i64..90, w in 1i64..40, h in 1u64..12) {
        let t = random_iet(seed, "A B C / C B A", 32);
        let base = Interval::new(rat(a, 100), rat((a + w).min(100), 100)).unwrap();
        if let Ok(tw) = tower_from_base(&t, base, h, 0, 0) {
            let ivs = tw.floors.as_ref().unwrap().intervals();
            let found = find_overlap(std::slice::from_ref(&tw));
            prop_assert_eq!(found.is_some(), pairwise_overlap(&ivs));
        }
    }

    #[test]
    fn scan_hits_survive_an_exact_recheck(seed in any::<u64>()) {
        let t = rotation_iet(seed, 3, 2048);
        let c0 = rat(1, 31);
        let sched = Schedule::Const(1);
        let rep = generic_condition_scan(&t, &c0, &sched, 150).unwrap();
        prop_assert!(rep.hits.len() as u64 <= rep.visits);
        for hit in rep.hits.iter().take(4) {
            let v = recheck_conditions(&t, hit.n as usize, &c0, &sched).unwrap();
            prop_assert!(v.all(), "n={}", hit.n);
            prop_assert!(hit.min_length_ratio > hit.c as f64 * hit.n as f64);
            prop_assert!(hit.min_lambda > 1.0 / 31.0 && hit.min_height_ratio > 1.0 / 31.0);
        }
    }

    /// Inside the region `Â` the next move is of bottom type and lands on `π*`.
    #[test]
    fn hat_a_moves_to_pi_star(d in 3usize..=6, n in 1u64..200, seed in any::<u64>()) {
        let (pi_star, _) = hat_a_context(d).unwrap();
        let s = star_letters(&pi_star);
        let c0 = Rational::new(BigInt::from(1), BigInt::from(20 * d as u64));
        let sched = Schedule::Log2;
        let mut rng = sample_rng(seed, 5);
        let mut lambda = random_simplex_point(&mut rng, d, 64);
        // pull λ toward the barycenter so every entry exceeds c0
        let bary = rat(1, d as i64);
        for x in lambda.iter_mut() {
            *x = (&*x + &bary * rat(3, 1)) / rat(4, 1);
        }
        let gap = Rational::new(BigInt::from(1), sched.weight(n) * BigInt::from(100 * d as u64));
        let mid = (&lambda[s.beta_star] + &lambda[s.delta_star]) / rat(2, 1);
        lambda[s.beta_star] = &mid + &gap / rat(2, 1);
        lambda[s.delta_star] = &mid - &gap / rat(2, 1);
        prop_assert!(hat_a_membership(&lambda, n, &c0, &sched).unwrap());
        let step = hat_a_step(&lambda, n, &sched).unwrap();
        prop_assert!(step.bottom_type && step.lands_on_pi_star);
        prop_assert!(step.c_d > 1.0);
    }
}

#[test]
fn overlapping_tower_yields_a_witness() {
    let t = build_iet(vec![rat(9, 10), rat(1, 10)], Perm::parse("A B / B A").unwrap()).unwrap();
    let tw = tower_from_base(&t, Interval::new(rat(0, 1), rat(3, 10)).unwrap(), 2, 0, 0).unwrap();
    let w = find_overlap(&[tw]).unwrap();
    assert_eq!((w.left.as_str(), w.right.as_str()), ("1/10", "3/10"));
    let e = tower_from_base(&t, Interval::new(rat(8, 10), rat(95, 100)).unwrap(), 3, 0, 0).unwrap_err();
    assert!(matches!(e, Error::Invalid(_)));
}

#[test]
fn content_of_thinned_towers() {
    let lens = thinned_floor_lengths(0.5, 0.25, 2, 7);
    assert_eq!(lens.len(), 5);
    assert!((lens[0] - 0.5 / 16.0).abs() < 1e-15);
    // geometric series Σ_{k=L}^{M-1} (bσ^k)^s
    for s in [0.3, 0.5, 1.0] {
        let r: f64 = 0.25f64.powf(s);
        let want = 0.5f64.powf(s) * (r.powi(2) - r.powi(7)) / (1.0 - r);
        assert!((s_content_lengths(&lens, s) - want).abs() < 1e-12);
    }
}

#[test]
fn schedules() {
    for n in 0..2000u64 {
        assert_eq!(Schedule::Log2.c(n), ((n + 2) as f64).log2().ceil() as u64, "n={n}");
    }
    assert_eq!(Schedule::parse("const:3").unwrap().weight(5), BigInt::from(15));
    assert_eq!(Schedule::parse("log2").unwrap().name(), "log2");
    for bad in ["const:0", "const:x", "linear"] {
        assert!(matches!(Schedule::parse(bad), Err(Error::Parse(_))));
    }
    assert_eq!(Schedule::Log2.diverges(), Some(true));
    let custom = Schedule::Custom { name: "sq".into(), f: std::sync::Arc::new(|n| n * n) };
    assert_eq!(custom.diverges(), None);
    assert_eq!(custom.c(4), 16);
}

#[test]
fn condition_verdicts_on_integers() {
    let pi = canonical_rotation_perm(3).unwrap();
    let beta = pi.alpha_b();
    let mut len = vec![BigInt::from(400); 3];
    len[beta] = BigInt::from(3);
    let h = vec![BigInt::from(10), BigInt::from(11), BigInt::from(12)];
    let c0 = rat(1, 31);
    let v = evaluate_conditions(&pi, &pi, &len, &h, 10, &c0, &Schedule::Log2);
    assert!(v.all());
    // 10·C(10) = 40; 400 is not above 40·10
    len[beta] = BigInt::from(10);
    assert!(!evaluate_conditions(&pi, &pi, &len, &h, 10, &c0, &Schedule::Log2).large_ratio);
    let hh = vec![BigInt::from(1), BigInt::from(11), BigInt::from(400)];
    assert!(!evaluate_conditions(&pi, &pi, &len, &hh, 10, &c0, &Schedule::Log2).balanced_heights);
    let t = rotation_iet(0, 3, 64);
    assert!(matches!(generic_condition_scan(&t, &rat(1, 30), &Schedule::Log2, 5), Err(Error::OutOfRange(_))));
}

/// Two letters at `π*` with `λ_{β*}` small: iterates of `I_{β*}` step down
/// from the right end by `λ_{β*}`.
#[test]
fn adjacency_counts_match_explicit_orbits() {
    for (d, seed) in [(3, 1u64), (4, 2), (5, 3)] {
        let pi = canonical_rotation_perm(d).unwrap();
        let beta = pi.alpha_b();
        let mut rng = sample_rng(seed, 6);
        let mut lambda = random_simplex_point(&mut rng, d, 32);
        lambda[beta] = rat(1, 997);
        let t = build_iet(lambda, pi.clone()).unwrap();
        let rep = adjacency_structure(&t, 3, &Schedule::Log2, 100_000).unwrap();
        assert!(rep.explicit && rep.adjacent);
        // oracle: walk the orbit and count whole iterates in each interval
        let b = t.lambda()[beta].clone();
        let ivs = t.intervals();
        let mut x = t.evaluate(&ivs[beta].left).unwrap();
        let mut seen = vec![0u64; d];
        while x >= b {
            let a = (0..d).find(|&a| ivs[a].contains(&x)).unwrap();
            if &x + &b <= ivs[a].right {
                seen[a] += 1;
            }
            x = t.evaluate(&x).unwrap();
        }
        let want: Vec<u64> = (1..d).rev().map(|k| seen[pi.top()[k]]).collect();
        assert_eq!(rep.counts, want, "d={d}");
        assert_eq!(rep.threshold, 3 * 3 - 2);
    }
    let t = random_iet(0, "A B C / C B A", 32);
    assert!(adjacency_structure(&t, 1, &Schedule::Log2, 10).is_err());
}

#[test]
fn shortest_gamma_is_a_positive_path() {
    for d in 2..=5 {
        let g = shortest_gamma(d).unwrap();
        assert!(g.matrix.is_positive(), "d={d}");
        assert_eq!(g.moves.first(), Some(&RvType::Top));
        assert_eq!(g.moves.last(), Some(&RvType::Bottom));
        assert!(g.start.is_rotation_type());
        let (_, lower) = hat_a_context(d).unwrap();
        assert_eq!(g.perms.last(), Some(&lower));
        let mut m = IntMatrix::identity(d);
        let mut p = g.start.clone();
        for (k, &eps) in g.moves.iter().enumerate() {
            let (w, l) = match eps {
                RvType::Top => (p.alpha_t(), p.alpha_b()),
                RvType::Bottom => (p.alpha_b(), p.alpha_t()),
            };
            m = m.mul(&IntMatrix::elementary(d, w, l));
            p = p.successor(eps);
            assert_eq!(p, g.perms[k + 1]);
        }
        assert_eq!(m, g.matrix);
        if d <= 4 {
            assert!(!shorter_positive_path_exists(d, g.moves.len(), &lower), "d={d}");
        }
    }
}

/// Exhaustive search over move words shorter than `len`.
fn shorter_positive_path_exists(d: usize, len: usize, lower: &Perm) -> bool {
    let class = rauzy_class(&canonical_rotation_perm(d).unwrap(), 1_000_000).unwrap();
    for start in class.perms.iter().filter(|p| p.is_rotation_type()) {
        for k in 1..len {
            for word in 0u64..(1 << k) {
                let mut p = start.clone();
                let mut m = IntMatrix::identity(d);
                let mut eps = RvType::Top;
                for i in 0..k {
                    eps = if word >> i & 1 == 0 { RvType::Top } else { RvType::Bottom };
                    let (w, l) = match eps {
                        RvType::Top => (p.alpha_t(), p.alpha_b()),
                        RvType::Bottom => (p.alpha_b(), p.alpha_t()),
                    };
                    m = m.mul(&IntMatrix::elementary(d, w, l));
                    p = p.successor(eps);
                }
                if word & 1 == 0 && eps == RvType::Bottom && &p == lower && m.is_positive() {
                    return true;
                }
            }
        }
    }
    false
}

#[test]
fn criterion_on_an_iet_is_inapplicable() {
    let t = rotation_iet(2, 3, 512);
    let rep = check_criterion_iet(&t, &[2, 4], &CriterionOptions::default()).unwrap();
    assert!(!rep.applicable);
    assert!(rep.note.is_some());
    assert!(rep.entries.iter().all(|e| e.cond1 && !e.cond4));
    assert_eq!(rep.levels, vec![2, 4]);
    assert!(matches!(check_criterion_iet(&t, &[], &CriterionOptions::default()), Err(Error::Invalid(_))));
}

/// A realized AIET is conjugate to its IET: its forward rigidity counts,
/// which round inward, stay at or below the exact IET counts, and the
/// heights agree.
#[test]
fn forward_check_agrees_with_conjugate_iet() {
    let t = rotation_iet(11, 3, 1024);
    let l = t.lambda();
    let omega = vec![l[1].clone(), -l[0].clone(), Rational::zero()];
    let opts = CriterionOptions { lookahead: 20, ..CriterionOptions::default() };
    let levels = [4usize, 8];
    let r = realize_along_path(&t, &omega, 40, 1024).unwrap();
    assert!(r.verified_blocks >= 30);
    let fwd = check_criterion(&r.aiet, &levels, &opts).unwrap();
    let exact = check_criterion_over_iet(&t, &omega, &levels, &opts).unwrap();
    assert_eq!(fwd.entries.len(), exact.entries.len());
    for (a, b) in fwd.entries.iter().zip(&exact.entries) {
        assert_eq!((a.level, &a.letter, &a.height), (b.level, &b.letter, &b.height));
        assert!(a.m <= b.m, "level {} letter {}: {} > {}", a.level, a.letter, a.m, b.m);
        assert!(b.m - a.m <= 1 + b.m / 10, "level {} letter {}: {} vs {}", a.level, a.letter, a.m, b.m);
        assert!((a.slope_gap - b.slope_gap).abs() < 1e-9 * (1.0 + b.slope_gap));
    }
    assert!(exact.applicable);
}

#[test]
fn scanner_finds_hits_on_rotation_data() {
    let c0 = rat(1, 31);
    let sched = Schedule::Const(1);
    let mut total = 0;
    for seed in 0..10 {
        let t = rotation_iet(seed, 3, 2048);
        let rep = generic_condition_scan(&t, &c0, &sched, 150).unwrap();
        assert!(rep.visits > 0 && rep.warning.is_none());
        for hit in &rep.hits {
            assert!(recheck_conditions(&t, hit.n as usize, &c0, &sched).unwrap().all());
        }
        total += rep.hits.len();
    }
    assert!(total > 0);
}
