//! Quaternion identities, the bracket of `u(n+1,H)`, its refined closed forms
//! and the Killing form, checked against component-level oracles.

mod common;

use common::*;
use hpn::quat_core::{qmul, Quaternion};
use hpn::symm_lie::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn q_strategy() -> impl Strategy<Value = Quaternion> {
    prop::array::uniform4(-3.0f64..3.0).prop_map(quat)
}

fn imag_strategy() -> impl Strategy<Value = Quaternion> {
    prop::array::uniform3(-3.0f64..3.0).prop_map(|a| Quaternion::new(0.0, a[0], a[1], a[2]))
}

proptest! {
    #[test]
    fn product_matches_hamilton_table(a in q_strategy(), b in q_strategy()) {
        let lib = arr(qmul(a, b));
        prop_assert!(max_abs4(sub(lib, hamilton(arr(a), arr(b)))) < 1e-12);
    }

    #[test]
    fn norm_is_multiplicative(a in q_strategy(), b in q_strategy()) {
        let lhs = (a * b).norm();
        prop_assert!((lhs - a.norm() * b.norm()).abs() < 1e-12 * (1.0 + lhs));
    }

    #[test]
    fn conjugation_reverses_products(a in q_strategy(), b in q_strategy()) {
        let lhs = arr((a * b).conj());
        let rhs = arr(b.conj() * a.conj());
        prop_assert!(max_abs4(sub(lhs, rhs)) < 1e-12);
    }

    #[test]
    fn cyclic_trace(a in imag_strategy(), b in imag_strategy(), c in imag_strategy()) {
        let abc = hamilton(hamilton(arr(a), arr(b)), arr(c))[0];
        let bca = hamilton(hamilton(arr(b), arr(c)), arr(a))[0];
        let bac = hamilton(hamilton(arr(b), arr(a)), arr(c))[0];
        prop_assert!((abc - bca).abs() < 1e-12 * (1.0 + abc.abs()));
        prop_assert!((abc + bac).abs() < 1e-12 * (1.0 + abc.abs()));
        prop_assert!((arr(a * b * c)[0] - abc).abs() < 1e-11);
    }

    #[test]
    fn inverse_is_two_sided(a in q_strategy()) {
        prop_assume!(a.norm() > 1e-3);
        let inv = a.inverse().unwrap();
        prop_assert!(max_abs4(sub(arr(a * inv), [1.0, 0.0, 0.0, 0.0])) < 1e-12);
        prop_assert!(max_abs4(sub(arr(inv * a), [1.0, 0.0, 0.0, 0.0])) < 1e-12);
    }

    #[test]
    fn bracket_is_matrix_commutator(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g1, g2) = (rand_lie(n, &mut rng), rand_lie(n, &mut rng));
        let lib = pack(&bracket(&g1, &g2).unwrap());
        let oracle = mat_comm(&pack(&g1), &pack(&g2));
        prop_assert!(mat_max_abs(&mat_sub(&lib, &oracle)) < 1e-12 * (1.0 + mat_max_abs(&oracle)));
    }

    #[test]
    fn packing_round_trips(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = rand_lie(n, &mut rng);
        prop_assert!(mat_max_abs(&mat_sub(&to_mat(&g.to_matrix()), &pack(&g))) == 0.0);
        let back = LieElement::from_matrix(&g.to_matrix()).unwrap();
        prop_assert!(lie_diff(&back, &g) < 1e-15);
    }

    #[test]
    fn killing_is_ad_invariant(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (z, g1, g2) = (rand_lie(n, &mut rng), rand_lie(n, &mut rng), rand_lie(n, &mut rng));
        let a = killing(&bracket(&z, &g1).unwrap(), &g2).unwrap();
        let b = killing(&g1, &bracket(&z, &g2).unwrap()).unwrap();
        prop_assert!((a + b).abs() < 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn killing_is_negative_definite(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = rand_lie(n, &mut rng);
        prop_assert!(killing(&g, &g).unwrap() < 0.0);
    }
}

#[test]
fn ad_e_maps_are_mutually_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 1..=3 {
        let e = LieElement::cartan(n);
        for _ in 0..100 {
            let x = rand_hperp(n, &mut rng);
            let m = ad_e_hperp(&x);
            let via_bracket = bracket(&e, &LieElement::from_hperp(x.clone())).unwrap();
            assert!(lie_diff(&via_bracket, &LieElement::from_mperp(m.clone())) < 1e-14);
            let back = ad_e_inv_mperp(&m);
            assert!(lie_diff(&LieElement::from_hperp(back), &LieElement::from_hperp(x)) < 1e-14);
            let y = rand_mperp(n, &mut rng);
            let h = ad_e_mperp(&y);
            let back = ad_e_inv_hperp(&h);
            assert!(lie_diff(&LieElement::from_mperp(back), &LieElement::from_mperp(y)) < 1e-14);
        }
    }
}

#[test]
fn basis_of_m_is_killing_orthogonal() {
    for n in 1..=3 {
        let basis = basis_m(n).unwrap();
        assert_eq!(basis.len(), 4 * n);
        for (a, x) in basis.iter().enumerate() {
            for (b, y) in basis.iter().enumerate() {
                let k = killing(x, y).unwrap();
                if a == b {
                    assert!(k < 0.0);
                } else {
                    assert!(k.abs() < 1e-12, "n={n} ({a},{b}) {k}");
                }
            }
        }
    }
}

#[test]
fn gauge_action_preserves_killing_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in 1..=3 {
        for _ in 0..100 {
            let a = rand_quat(&mut rng);
            let a = a * (1.0 / a.norm());
            let big_a = exp_matrix(&rand_anti_hermitian(n - 1, &mut rng));
            let x = rand_hperp(n, &mut rng);
            let y = equivalence_action(a, &big_a, &x).unwrap();
            assert!((x.killing(&x) - y.killing(&y)).abs() < 1e-12 * x.killing(&x).abs());
        }
    }
}

#[test]
fn gauge_action_rejects_non_unit_quaternion() {
    let x = HPerp::zero(2);
    let err = equivalence_action(Quaternion::new(2.0, 0.0, 0.0, 0.0), &exp_matrix(&rand_anti_hermitian(1, &mut ChaCha8Rng::seed_from_u64(0))), &x);
    assert!(matches!(err, Err(LieError::NotUnit { .. })));
}

#[test]
fn non_anti_hermitian_matrix_is_rejected() {
    let mut g = LieElement::cartan(2).to_matrix();
    g.set(0, 0, Quaternion::ONE);
    assert!(matches!(LieElement::from_matrix(&g), Err(LieError::NotAntiHermitian { .. })));
}

#[test]
fn forbidden_projection_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = SubspaceElement::MPerp(rand_mperp(2, &mut rng));
    let b = SubspaceElement::MPerp(rand_mperp(2, &mut rng));
    assert!(matches!(bracket_projected(2, &a, &b, Subspace::MPerp), Err(LieError::Subspace { .. })));
}
