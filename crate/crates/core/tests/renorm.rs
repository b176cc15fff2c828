use iet_core::combinat::{canonical_rotation_perm, Perm, RvType};
use iet_core::iet::{build_iet, Iet, Interval};
use iet_core::num::{random_simplex_point, rat, sample_rng, IntMatrix, Rational};
use iet_core::renorm::{
    euclid_quotients, is_infinity_complete, orbit, orbit_with_guard, rv_preimage, rv_step, rv_type, win_counts,
};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn random_iet(seed: u64, perm: &str, bits: u64) -> Iet {
    let p = Perm::parse(perm).unwrap();
    let mut rng = sample_rng(seed, 0);
    build_iet(random_simplex_point(&mut rng, p.d(), bits), p).unwrap()
}

const PERMS: [&str; 4] = ["A B / B A", "A B C / C B A", "A B C D / D C B A", "A B C D E / B C D E A"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn orbit_identities(seed in any::<u64>(), which in 0usize..4) {
        let t = random_iet(seed, PERMS[which], 512);
        let rec = orbit(&t, 12).unwrap();
        let d = t.d();
        for n in 0..=rec.n_blocks() {
            let b = &rec.cumulative[n];
            // λ = B^(n) ℓ^(n)
            prop_assert_eq!(b.mul_vec(&rec.lengths[n]), rec.lengths[0].clone());
            // h^(n) = B^(n)ᵀ 1
            prop_assert_eq!(b.tmul_vec(&vec![BigInt::one(); d]), rec.heights[n].clone());
            prop_assert_eq!(b.det(), BigInt::one());
            prop_assert!(b.is_nonnegative());
            prop_assert_eq!(rec.tiling_sum(n), Rational::one());
        }
    }

    #[test]
    fn preimage_undoes_step(seed in any::<u64>(), which in 0usize..4) {
        let t = random_iet(seed, PERMS[which], 128);
        let (next, step) = rv_step(&t).unwrap();
        prop_assert_eq!(rv_preimage(&next, step.eps).unwrap(), t);
    }

    /// A Zorich block is a maximal run of RV moves of one type.
    #[test]
    fn zorich_block_is_a_run_of_rv_moves(seed in any::<u64>(), which in 0usize..4) {
        let t = random_iet(seed, PERMS[which], 256);
        let rec = orbit(&t, 6).unwrap();
        let mut cur = t.clone();
        for b in &rec.blocks {
            let eps = rv_type(&cur).unwrap();
            prop_assert_eq!(eps, b.eps);
            let mut m = IntMatrix::identity(t.d());
            let mut z = 0;
            while rv_type(&cur).unwrap() == eps {
                let (next, step) = rv_step(&cur).unwrap();
                m = m.mul(&step.matrix(t.d()));
                cur = next;
                z += 1;
            }
            prop_assert_eq!(z, b.z);
            prop_assert_eq!(m, b.matrix());
            prop_assert_eq!(cur.perm(), &b.perm_after);
        }
    }
}

/// The induced map on `I^(n)` is the level-`n` IET: each base returns at its
/// height, and the return map rescaled to unit length is `T^(n)`.
#[test]
fn heights_are_return_times_of_the_induced_map() {
    for (i, p) in PERMS.iter().enumerate() {
        let t = random_iet(100 + i as u64, p, 256);
        let rec = orbit(&t, 5).unwrap();
        for n in [1, 3, 5] {
            let ell = rec.ell(n);
            let total: Rational = ell.iter().sum();
            let j = Interval::new(Rational::zero(), total.clone()).unwrap();
            let branches = t.first_return_map(&j, 1_000_000).unwrap();
            let perm = &rec.perms[n];
            let tn = rec.iet(n);
            let mut left = Rational::zero();
            for &a in perm.top() {
                let base = Interval::new(left.clone(), &left + &ell[a]).unwrap();
                let br = branches.iter().find(|b| b.domain.contains(&base.left)).unwrap();
                assert!(br.domain.right >= base.right);
                assert_eq!(BigInt::from(br.time), rec.heights[n][a]);
                assert_eq!(&br.translation / &total, tn.translation_vector()[a]);
                left = base.right;
            }
            assert_eq!(left, total);
        }
    }
}

/// `(λ, 1 − λ)` on the symmetric 2-permutation runs Euclid on the pair.
#[test]
fn two_letter_path_is_euclid() {
    let x = rat(355, 1468);
    let t = build_iet(vec![x.clone(), rat(1, 1) - &x], Perm::parse("A B / B A").unwrap()).unwrap();
    let quotients = euclid_quotients(&BigInt::from(1468 - 355), &BigInt::from(355));
    let (rec, _) = iet_core::renorm::orbit_partial(&t, 100, 1_000_000);
    let z: Vec<BigInt> = rec.z_sequence().into_iter().map(BigInt::from).collect();
    // the final quotient ends in a tie and is not a complete block
    assert_eq!(z.as_slice(), &quotients[..quotients.len() - 1]);
}

fn fib(k: usize) -> BigInt {
    let (mut a, mut b) = (BigInt::zero(), BigInt::one());
    for _ in 0..k {
        let c = &a + &b;
        a = b;
        b = c;
    }
    a
}

#[test]
fn golden_heights_are_fibonacci() {
    // F_80 / F_81 agrees with the golden mean far beyond 20 blocks
    let g = Rational::new(fib(80), fib(81));
    let t = build_iet(vec![&g * &g, g.clone()], Perm::parse("A B / B A").unwrap()).unwrap();
    let rec = orbit(&t, 20).unwrap();
    assert!(rec.z_sequence().iter().all(|&z| z == 1));
    for n in 0..=20 {
        let mut h = rec.heights[n].clone();
        h.sort();
        assert_eq!(h, vec![fib(n + 1), fib(n + 2)], "n={n}");
    }
    let mut h5 = rec.heights[5].clone();
    h5.sort();
    assert_eq!(h5, vec![BigInt::from(8), BigInt::from(13)]);
}

#[test]
fn rotation_type_paths_are_complete() {
    let t = random_iet(5, "A B C D / B C D A", 1024);
    let rec = orbit(&t, 60).unwrap();
    assert!(is_infinity_complete(&rec.path(), 10_000));
    let wins = win_counts(&rec.path(), u64::MAX);
    let z: u64 = rec.z_sequence().iter().sum();
    assert_eq!(wins.iter().sum::<u64>(), z);
    assert!(rec.perms.iter().any(|p| p == &rec.perms[0] && p.is_rotation_type()));
    assert_eq!(rec.perms[0], canonical_rotation_perm(4).unwrap());
}

#[test]
fn ties_and_guards() {
    let t = build_iet(vec![rat(1, 2), rat(1, 2)], Perm::parse("A B / B A").unwrap()).unwrap();
    assert!(matches!(rv_type(&t), Err(iet_core::Error::NotRenormalizable { step: 0 })));
    let t = random_iet(9, "A B C D / D C B A", 4096);
    let e = orbit_with_guard(&t, 200, 64).unwrap_err();
    assert!(e.is_resource());
    assert_eq!(RvType::Top.flip(), RvType::Bottom);
}
