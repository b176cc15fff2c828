use iet_core::combinat::{canonical_rotation_perm, rauzy_class, Perm};
use iet_core::iet::{build_iet, Iet};
use iet_core::num::{dot, random_simplex_point, rat, sample_rng, Rational};
use iet_core::renorm::orbit;
use iet_core::spectral::{
    kernel_projection_check_with, kernel_projection_invariance_check, kernel_subspace, log_slope_membership,
    lyapunov_top, project_kernel, rotation_stable_spaces, CovectorAction, Membership, Normalization,
};
use iet_core::Error;
use num_traits::Zero;
use proptest::prelude::*;

fn rotation_iet(seed: u64, d: usize, bits: u64) -> Iet {
    let class = rauzy_class(&canonical_rotation_perm(d).unwrap(), 1_000_000).unwrap();
    let rot: Vec<Perm> = class.perms.into_iter().filter(|p| p.is_rotation_type()).collect();
    let mut rng = sample_rng(seed, 1);
    let p = rot[(seed as usize) % rot.len()].clone();
    build_iet(random_simplex_point(&mut rng, d, bits), p).unwrap()
}

fn covector(d: usize) -> impl Strategy<Value = Vec<Rational>> {
    prop::collection::vec((-50i64..=50, 1i64..20), d).prop_map(|v| v.into_iter().map(|(p, q)| rat(p, q)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kernel_projection_is_invariant_under_transpose(seed in any::<u64>(), omega in covector(4)) {
        let t = rotation_iet(seed, 4, 64 + 8 * 40);
        let rep = kernel_projection_invariance_check(&t, &omega, 40).unwrap();
        prop_assert!(rep.all_pass());
    }

    #[test]
    fn projection_is_orthogonal_and_idempotent(seed in any::<u64>(), v in covector(5)) {
        let t = rotation_iet(seed, 5, 64);
        let p = project_kernel(&v, t.perm());
        prop_assert_eq!(project_kernel(&p, t.perm()), p.clone());
        let r: Vec<Rational> = v.iter().zip(&p).map(|(a, b)| a - b).collect();
        for k in kernel_subspace(t.perm()).basis {
            prop_assert!(dot(&k, &r).is_zero());
        }
    }

    #[test]
    fn stable_spaces_have_rotation_dimensions(seed in any::<u64>(), d in 2usize..=6) {
        let t = rotation_iet(seed, d, 128);
        let (es, ecs) = rotation_stable_spaces(&t).unwrap();
        prop_assert_eq!((es.dim(), ecs.dim()), (1, d - 1));
        for v in es.basis.iter().chain(&ecs.basis) {
            prop_assert!(dot(v, t.lambda()).is_zero());
        }
        prop_assert!(ecs.contains(&es.basis[0]));
        prop_assert!(project_kernel(&es.basis[0], t.perm()).iter().all(|x| x.is_zero()));
    }

    /// `E_s` is mapped into itself by the cocycle along the orbit.
    #[test]
    fn stable_direction_is_equivariant(seed in any::<u64>()) {
        let t = rotation_iet(seed, 3, 512);
        let (es, _) = rotation_stable_spaces(&t).unwrap();
        let rec = orbit(&t, 10).unwrap();
        for n in [3, 10] {
            let w = rec.cumulative[n].tmul_vec_rat(&es.basis[0]);
            prop_assert!(dot(&w, &rec.ell(n)).is_zero());
            prop_assert!(project_kernel(&w, &rec.perms[n]).iter().all(|x| x.is_zero()));
        }
    }
}

/// The inverse action is the wrong one: projections drift on return.
#[test]
fn inverse_action_is_not_invariant() {
    let mut failed = 0;
    for seed in 0..10 {
        let t = rotation_iet(seed, 4, 64 + 8 * 30);
        let omega = vec![rat(1, 1), rat(-2, 3), rat(0, 1), rat(1, 5)];
        let rep = kernel_projection_check_with(&t, &omega, 30, CovectorAction::Inverse).unwrap();
        if !rep.all_pass() {
            failed += 1;
        }
        assert!(kernel_projection_check_with(&t, &omega, 30, CovectorAction::Transpose).unwrap().all_pass());
    }
    assert!(failed > 0);
}

#[test]
fn membership_classes() {
    let t = rotation_iet(3, 4, 128);
    let (es, ecs) = rotation_stable_spaces(&t).unwrap();
    assert_eq!(log_slope_membership(&es.basis[0], &t).unwrap(), Membership::InEs);
    let mix: Vec<Rational> = ecs.basis[0].iter().zip(&ecs.basis[1]).map(|(a, b)| a + b * rat(2, 3)).collect();
    assert_eq!(log_slope_membership(&mix, &t).unwrap(), Membership::InEcsNotEs);
    assert_eq!(log_slope_membership(&vec![rat(1, 1); 4], &t).unwrap(), Membership::OutsideEcs);
    let symmetric = build_iet(vec![rat(1, 3); 3], Perm::parse("A B C / C B A").unwrap()).unwrap();
    assert!(matches!(rotation_stable_spaces(&symmetric), Err(Error::NotRotationType)));
    assert!(matches!(log_slope_membership(&[rat(0, 1)], &t), Err(Error::DimensionMismatch { .. })));
}

/// For two letters the Zorich cocycle is the Gauss map, whose exponent per
/// step is the Lévy constant `π² / (12 ln 2)`.
#[test]
fn two_letter_exponent_is_levy() {
    let p = Perm::parse("A B / B A").unwrap();
    let est = lyapunov_top(&p, 300, 60, 3, Normalization::PerZorichBlock).unwrap();
    let levy = std::f64::consts::PI.powi(2) / (12.0 * std::f64::consts::LN_2);
    assert!((est.theta_top - levy).abs() < 0.05, "{}", est.theta_top);
    assert_eq!(est.failures, 0);
    assert!(est.per_rv_step < est.per_block);
    assert!(lyapunov_top(&p, 10, 0, 3, Normalization::PerRvStep).is_err());
}
