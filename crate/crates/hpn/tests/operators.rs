//! Operator identities for the Hamiltonian pair, the recursion operator and
//! the hierarchy.

use hpn::biham_ops::*;
use hpn::grid_calculus::{Anchor, Field, MeanPolicy, PeriodicGrid};
use hpn::quat_core::{QMatrix, Quaternion};
use hpn::symm_lie::exp_matrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn periodic(n: usize, seed: u64) -> (OpContext, StatePair, ChaCha8Rng) {
    let grid = PeriodicGrid::new(256, 2.0 * std::f64::consts::PI).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ctx = OpContext::new(grid).with_policy(MeanPolicy::Project, Anchor::ZeroMean);
    let st = random_band_limited(grid, n, 5, 1.0, &mut rng).into();
    (ctx, st, rng)
}

fn localized(n: usize, seed: u64) -> (OpContext, StatePair, ChaCha8Rng) {
    let grid = PeriodicGrid::new(256, 40.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ctx = OpContext::new(grid).with_policy(MeanPolicy::Strict { tol: 1e-8 }, Anchor::Left);
    let st = random_localized(grid, n, 20.0, 3.0, 0.5, &mut rng).into();
    (ctx, st, rng)
}

fn rel(a: &Pair, b: &Pair) -> f64 {
    a.sub(b).max_abs() / b.max_abs().max(1.0)
}

#[test]
fn h_and_j_agree_with_ad_form() {
    for n in 1..=3 {
        let (ctx, st, mut rng) = periodic(n, 10 + n as u64);
        let w: CovectorPair = random_band_limited(st.grid(), n, 5, 1.0, &mut rng).into();
        let a = apply_h(&ctx, &st, &w).unwrap().as_pair();
        let b = apply_h_via_k(&ctx, &st, &w).unwrap().as_pair();
        assert!(rel(&a, &b) < 1e-10, "n={n} H: {}", rel(&a, &b));
        let h: FlowPair = w.as_pair().into();
        let a = apply_j(&ctx, &st, &h).unwrap().as_pair();
        let b = apply_j_via_k(&ctx, &st, &h).unwrap().as_pair();
        assert!(rel(&a, &b) < 1e-10, "n={n} J: {}", rel(&a, &b));
    }
}

#[test]
fn explicit_recursion_blocks_match_composition() {
    for n in 1..=3 {
        let (ctx, st, mut rng) = periodic(n, 20 + n as u64);
        let h: FlowPair = random_band_limited(st.grid(), n, 5, 1.0, &mut rng).into();
        let a = apply_r(&ctx, &st, &h).unwrap().as_pair();
        let b = apply_r_explicit(&ctx, &st, &h).unwrap().as_pair();
        assert!(rel(&a, &b) < 1e-9, "n={n}: {}", rel(&a, &b));
    }
}

#[test]
fn operators_are_skew_adjoint() {
    for n in 1..=3 {
        let (ctx, st, mut rng) = periodic(n, 30 + n as u64);
        let a = random_band_limited(st.grid(), n, 5, 1.0, &mut rng);
        let b = random_band_limited(st.grid(), n, 5, 1.0, &mut rng);
        let hb = apply_h(&ctx, &st, &b.clone().into()).unwrap().as_pair();
        let ha = apply_h(&ctx, &st, &a.clone().into()).unwrap().as_pair();
        let s = a.pairing(&hb);
        assert!((s + b.pairing(&ha)).abs() < 1e-9 * s.abs().max(1.0));
        let jb = apply_j(&ctx, &st, &b.clone().into()).unwrap().as_pair();
        let ja = apply_j(&ctx, &st, &a.clone().into()).unwrap().as_pair();
        let s = a.pairing(&jb);
        assert!((s + b.pairing(&ja)).abs() < 1e-9 * s.abs().max(1.0));
    }
}

#[test]
fn recursion_of_translation_is_mkdv() {
    for n in 1..=3 {
        let (ctx, st, _) = localized(n, 40 + n as u64);
        let h1 = hierarchy_flow(&ctx, &st, 1).unwrap().as_pair();
        let cf = mkdv_closed_form(&ctx, &st).as_pair();
        assert!(rel(&h1, &cf) < 1e-8, "n={n}: {}", rel(&h1, &cf));
    }
}

#[test]
fn densities_match_closed_forms() {
    for n in 1..=3 {
        let (ctx, st, _) = localized(n, 50 + n as u64);
        let d0 = hamiltonian_density(&ctx, &st, 0).unwrap();
        let c0 = h0_density(&st);
        assert!(d0.sub(&c0).max_abs() < 1e-9 * c0.max_abs().max(1.0));
        let d1 = hamiltonian_density(&ctx, &st, 1).unwrap();
        let c1 = h1_density(&ctx, &st);
        assert!((d1.integrate() - c1.integrate()).abs() < 1e-9 * c1.max_abs().max(1.0), "n={n}");
    }
}

#[test]
fn gauge_action_commutes_with_operators() {
    let n = 3;
    let (ctx, st, mut rng) = periodic(n, 60);
    let h = random_band_limited(st.grid(), n, 5, 1.0, &mut rng);
    let a = Quaternion::new(0.3, -0.5, 0.7, 0.2);
    let a = a * (1.0 / a.norm());
    let mut x = QMatrix::zeros(2, 2);
    x.set(0, 0, Quaternion::new(0.0, 0.4, -0.1, 0.3));
    x.set(0, 1, Quaternion::new(0.2, 0.5, 0.1, -0.3));
    x.set(1, 0, Quaternion::new(-0.2, 0.5, 0.1, -0.3));
    x.set(1, 1, Quaternion::new(0.0, -0.2, 0.6, 0.1));
    let big_a = exp_matrix(&x);
    assert!(big_a.unitarity_defect() < 1e-12);
    let gst: StatePair = gauge_pair(&st.as_pair(), a, &big_a).into();
    let gh = gauge_pair(&h, a, &big_a);
    let ops: [fn(&OpContext, &StatePair, &Pair) -> Pair; 3] = [
        |c, s, x| apply_h(c, s, &x.into()).unwrap().as_pair(),
        |c, s, x| apply_j(c, s, &x.into()).unwrap().as_pair(),
        |c, s, x| apply_r(c, s, &x.into()).unwrap().as_pair(),
    ];
    for op in ops {
        let lhs = gauge_pair(&op(&ctx, &st, &h), a, &big_a);
        let rhs = op(&ctx, &gst, &gh);
        assert!(rel(&lhs, &rhs) < 1e-10, "{}", rel(&lhs, &rhs));
    }
}

#[test]
fn hamiltonians_are_in_involution() {
    for n in 1..=3 {
        let (ctx, st, _) = localized(n, 70 + n as u64);
        let g0: CovectorPair = st.as_pair().into();
        let g1 = apply_r_adjoint(&ctx, &st, &g0).unwrap();
        let b = poisson_bracket(&ctx, &st, &g0, &g1).unwrap();
        let scale = g1.as_pair().pairing(&g1.as_pair()).sqrt();
        assert!(b.abs() < 1e-8 * scale.max(1.0), "n={n}: {b}");
        assert!(poisson_bracket(&ctx, &st, &g1, &g1).unwrap().abs() < 1e-8 * scale.max(1.0));
    }
}

#[test]
fn symplectic_form_is_closed() {
    let n = 2;
    let (ctx, st, mut rng) = periodic(n, 80);
    let xs: Vec<FlowPair> = (0..3).map(|_| random_band_limited(st.grid(), n, 4, 1.0, &mut rng).into()).collect();
    let r = symplectic_closure_residual(&ctx, &st, [&xs[0], &xs[1], &xs[2]], 1e-4).unwrap();
    assert!(r < 1e-7, "{r}");
}

#[test]
fn first_two_flows_commute() {
    let n = 2;
    let (ctx, st, _) = localized(n, 90);
    let p = st.as_pair();
    let eps = 1e-4;
    let x0 = p.deriv(&ctx);
    let x1 = mkdv_closed_form(&ctx, &st).as_pair();
    let d_x1_along_x0 = mkdv_closed_form(&ctx, &p.axpy(eps, &x0).into())
        .as_pair()
        .sub(&mkdv_closed_form(&ctx, &p.axpy(-eps, &x0).into()).as_pair())
        .scale(0.5 / eps);
    let d_x0_along_x1 = x1.deriv(&ctx);
    let r = rel(&d_x1_along_x0, &d_x0_along_x1);
    assert!(r < 1e-7, "{r}");
}

#[test]
fn finite_difference_gradients() {
    let n = 2;
    let grid = PeriodicGrid::new(128, 40.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let ctx = OpContext::new(grid).with_policy(MeanPolicy::Strict { tol: 1e-8 }, Anchor::Left);
    let st: StatePair = random_localized(grid, n, 20.0, 5.0, 0.4, &mut rng).into();
    let f0 = |s: &StatePair| Ok(h0_density(s).integrate());
    let w0 = variational_derivative_fd(&f0, &st, 1e-5).unwrap().as_pair();
    assert!(rel(&w0, &st.as_pair()) < 1e-6);
    let c = ctx.clone();
    let f1 = move |s: &StatePair| Ok(h1_density(&c, s).integrate());
    let w1 = variational_derivative_fd(&f1, &st, 1e-5).unwrap().as_pair();
    let expect = apply_r_adjoint(&ctx, &st, &st.as_pair().into()).unwrap().as_pair();
    assert!(rel(&w1, &expect) < 1e-6, "{}", rel(&w1, &expect));
}

#[test]
fn hierarchy_scaling_weight() {
    // u -> lam^{-1} u(lam^{-1} x) with lam = 1/2: same samples times 2 on a grid of half length.
    let (ctx, st, _) = localized(2, 110);
    let base = hierarchy_flow(&ctx, &st, 1).unwrap().as_pair();
    let half = OpContext::new(PeriodicGrid::new(256, 20.0).unwrap())
        .with_policy(MeanPolicy::Strict { tol: 1e-8 }, Anchor::Left);
    let p = st.as_pair().scale(2.0);
    let squeezed = Pair { s: Field { grid: half.grid(), ..p.s }, v: Field { grid: half.grid(), ..p.v } };
    let out = hierarchy_flow(&half, &squeezed.into(), 1).unwrap().as_pair();
    let expect = base.scale(16.0);
    let expect = Pair { s: Field { grid: half.grid(), ..expect.s }, v: Field { grid: half.grid(), ..expect.v } };
    assert!(rel(&out, &expect) < 1e-8, "{}", rel(&out, &expect));
}
