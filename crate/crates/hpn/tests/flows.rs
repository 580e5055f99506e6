//! mKdV and sine-Gordon dynamics.

use hpn::biham_ops::{gauge_pair, random_band_limited, random_localized, OpContext, Pair, StatePair};
use hpn::grid_calculus::{Anchor, MeanPolicy, PeriodicGrid};
use hpn::quat_core::{QMatrix, Quaternion};
use hpn::soliton_flows::*;
use hpn::symm_lie::{chi, exp_matrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ctx(grid: PeriodicGrid) -> OpContext {
    OpContext::new(grid).with_policy(MeanPolicy::Project, Anchor::ZeroMean)
}

fn run_mkdv(c: &OpContext, p: &Pair, dt: f64, t_end: f64) -> Pair {
    let steps = (t_end / dt).round() as usize;
    let dt = t_end / steps as f64;
    let mut rhs = |x: &Pair| Ok(mkdv_rhs(c, x, true, false));
    let mut s = p.clone();
    for k in 0..steps {
        s = step_rk4(&s, &mut rhs, dt, k as f64 * dt).unwrap();
    }
    s
}

#[test]
fn soliton_returns_after_one_period() {
    let grid = PeriodicGrid::new(256, 32.0).unwrap();
    let c = ctx(grid);
    let a = 2.0;
    let q = Quaternion::new(0.0, 0.3, -0.8, 0.5);
    let p0 = mkdv_soliton(grid, 1, a, 16.0, 0.0, q);
    let period = 4.0 * grid.length / (a * a);
    let p1 = run_mkdv(&c, &p0, 0.25 * grid.dx().powi(3), period);
    let err = p1.sub(&p0).max_abs() / p0.max_abs();
    assert!(err < 1e-4, "shape error {err}");
    assert!(p1.max_re() < 1e-10);
}

#[test]
fn rk4_converges_at_fourth_order() {
    let grid = PeriodicGrid::new(64, 32.0).unwrap();
    let c = ctx(grid);
    let p0 = mkdv_soliton(grid, 1, 1.0, 16.0, 0.0, Quaternion::K);
    let dt = 0.05 * grid.dx().powi(3);
    let t = 0.5;
    let reference = run_mkdv(&c, &p0, dt / 8.0, t);
    let e1 = run_mkdv(&c, &p0, dt, t).sub(&reference).max_abs();
    let e2 = run_mkdv(&c, &p0, dt / 2.0, t).sub(&reference).max_abs();
    let ratio = e1 / e2;
    assert!((12.0..20.0).contains(&ratio), "ratio {ratio}, errors {e1:e} {e2:e}");
}

#[test]
fn coupled_system_conserves_hamiltonians() {
    let grid = PeriodicGrid::new(64, 2.0 * std::f64::consts::PI).unwrap();
    let c = ctx(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p0 = random_band_limited(grid, 2, 3, 0.5, &mut rng);
    let mut cfg = SimConfig::new(2, grid, FlowKind::Mkdv);
    cfg.t_end = 0.5;
    cfg.output_every = 1000;
    let traj = simulate(&c, &cfg, &p0.into()).unwrap();
    let rep = conserved_report(&c, &traj);
    assert!(rep.max_drift_h0 < 1e-6, "{}", rep.max_drift_h0);
    assert!(rep.max_drift_h1 < 1e-6, "{}", rep.max_drift_h1);
    let last = traj.states.last().unwrap();
    assert!(last.max_re() < 1e-10);
}

#[test]
fn scalar_reduction_is_invariant() {
    let grid = PeriodicGrid::new(128, 32.0).unwrap();
    let c = ctx(grid);
    let p0 = mkdv_soliton(grid, 3, 1.5, 16.0, 0.0, Quaternion::I);
    let p1 = run_mkdv(&c, &p0, 0.05 * grid.dx().powi(3), 0.2);
    assert_eq!(p1.v.max_abs(), 0.0);
}

#[test]
fn vector_data_sources_scalar_part() {
    let grid = PeriodicGrid::new(128, 2.0 * std::f64::consts::PI).unwrap();
    let c = ctx(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut p = random_band_limited(grid, 2, 3, 1.0, &mut rng);
    p.s = p.s.map(|_| Quaternion::ZERO);
    let ut = mkdv_rhs(&c, &p, true, false);
    assert!(ut.s.max_abs() > 1e-3);
}

#[test]
fn mkdv_commutes_with_gauge_action() {
    let grid = PeriodicGrid::new(64, 2.0 * std::f64::consts::PI).unwrap();
    let c = ctx(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p0 = random_band_limited(grid, 3, 3, 0.5, &mut rng);
    let a = Quaternion::new(0.5, 0.5, -0.5, 0.5);
    let mut x = QMatrix::zeros(2, 2);
    x.set(0, 1, Quaternion::new(0.3, 0.1, 0.2, 0.0));
    x.set(1, 0, Quaternion::new(-0.3, 0.1, 0.2, 0.0));
    x.set(1, 1, Quaternion::new(0.0, 0.4, 0.0, -0.2));
    let big_a = exp_matrix(&x);
    let dt = 0.05 * grid.dx().powi(3);
    let lhs = gauge_pair(&run_mkdv(&c, &p0, dt, 0.05), a, &big_a);
    let rhs = run_mkdv(&c, &gauge_pair(&p0, a, &big_a), dt, 0.05);
    assert!(lhs.sub(&rhs).max_abs() < 1e-8);
}

fn kink_residual(branch: Branch) -> f64 {
    let grid = PeriodicGrid::new(256, 40.0).unwrap();
    let c = ctx(grid);
    let (a, x0) = (1.0, 24.0);
    let q = Quaternion::J;
    let mut worst: f64 = 0.0;
    for t in [0.0, 0.25, 0.5] {
        let eps = 1e-4;
        let exact_t = sg_kink(grid, 1, a, x0, t + eps, q, branch)
            .sub(&sg_kink(grid, 1, a, x0, t - eps, q, branch))
            .scale(0.5 / eps);
        let rhs = sg_rhs(&c, &sg_kink(grid, 1, a, x0, t, q, branch), branch, SgMode::Line, 8).unwrap();
        worst = worst.max(rhs.sub(&exact_t).max_abs() / exact_t.max_abs());
    }
    worst
}

fn kink_trajectory_error(branch: Branch, t_end: f64) -> f64 {
    let grid = PeriodicGrid::new(256, 40.0).unwrap();
    let c = ctx(grid);
    let (a, x0) = (1.0, 24.0);
    let q = Quaternion::J;
    let mut cfg = SimConfig::new(1, grid, FlowKind::SineGordon);
    cfg.sg_branch = branch;
    cfg.sg_substeps = 8;
    cfg.dt = 0.01;
    cfg.t_end = t_end;
    cfg.output_every = 5;
    let p0 = sg_kink(grid, 1, a, x0, 0.0, q, branch);
    let traj = simulate(&c, &cfg, &p0.into()).unwrap();
    assert!(traj.sg_constraint.iter().all(|&d| d < 1e-8));
    let mut worst: f64 = 0.0;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let exact = sg_kink(grid, 1, a, x0, *t, q, branch);
        worst = worst.max(s.sub(&exact).max_abs());
    }
    worst
}

#[test]
fn sine_gordon_kink_on_both_branches() {
    for b in [Branch::Minus, Branch::Plus] {
        let r = kink_residual(b);
        assert!(r < 1e-6, "{b:?} residual {r}");
        let e = kink_trajectory_error(b, 0.1);
        assert!(e < 1e-6, "{b:?} trajectory {e}");
    }
}

#[test]
fn kink_branches_are_distinct() {
    let grid = PeriodicGrid::new(128, 40.0).unwrap();
    let c = ctx(grid);
    let p = sg_kink(grid, 1, 1.0, 20.0, 0.0, Quaternion::K, Branch::Minus);
    let exact_t = sg_kink(grid, 1, 1.0, 20.0, 1e-4, Quaternion::K, Branch::Minus)
        .sub(&sg_kink(grid, 1, 1.0, 20.0, -1e-4, Quaternion::K, Branch::Minus))
        .scale(0.5e4);
    let wrong = sg_rhs(&c, &p, Branch::Plus, SgMode::Line, 8).unwrap();
    assert!(wrong.sub(&exact_t).max_abs() > 0.5 * exact_t.max_abs());
}

#[test]
fn sg_constraint_holds_for_vector_data() {
    let grid = PeriodicGrid::new(128, 40.0).unwrap();
    let c = ctx(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let p: StatePair = random_localized(grid, 3, 20.0, 3.0, 0.4, &mut rng).into();
    for b in [Branch::Plus, Branch::Minus] {
        let sol = sg_solve_h(&c, &p, b, SgMode::Line, 4).unwrap();
        assert!(sol.constraint_deviation(3) < 1e-8);
        assert!((sol.h_par.samples[0] - b.sign() * chi(3)).abs() < 1e-12);
    }
}

#[test]
fn periodic_shooting_closes() {
    let grid = PeriodicGrid::new(64, 2.0 * std::f64::consts::PI).unwrap();
    let c = ctx(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let p: StatePair = random_band_limited(grid, 2, 2, 0.3, &mut rng).into();
    match sg_solve_h(&c, &p, Branch::Plus, SgMode::Periodic, 4) {
        Ok(sol) => assert!(sol.constraint_deviation(2) < 1e-8),
        Err(FlowError::Shooting { sigma }) => assert!(sigma > 1e-6),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn scalar_sg_relation_between_parallel_and_normal_parts() {
    let grid = PeriodicGrid::new(128, 40.0).unwrap();
    let c = ctx(grid);
    let p: StatePair = sg_kink(grid, 1, 1.2, 20.0, 0.0, Quaternion::I, Branch::Minus).into();
    let sol = sg_solve_h(&c, &p, Branch::Minus, SgMode::Line, 4).unwrap();
    let ch = chi(1);
    for (hp, h) in sol.h_par.samples.iter().zip(&sol.flow.s.samples) {
        let expect = (ch * ch - 0.25 * h.norm_sqr()).sqrt();
        assert!((hp.abs() - expect).abs() < 1e-8 * ch);
    }
}
