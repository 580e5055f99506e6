//! Verification suites run by `hpn verify`. Every check is seeded, so a
//! report is reproducible; each entry carries its tolerance and the observed
//! residual.

use std::time::Instant;

use hpn::biham_ops::*;
use hpn::curve_geometry::*;
use hpn::grid_calculus::{Anchor, MeanPolicy, PeriodicGrid};
use hpn::quat_core::{QMatrix, Quaternion, QuaternionVector};
use hpn::soliton_flows::*;
use hpn::symm_lie::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::CliError;

/// Which suites to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Algebra,
    Operators,
    Flows,
    Geometry,
    All,
}

impl std::str::FromStr for Scope {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "algebra" => Ok(Scope::Algebra),
            "operators" => Ok(Scope::Operators),
            "flows" => Ok(Scope::Flows),
            "geometry" => Ok(Scope::Geometry),
            "all" => Ok(Scope::All),
            other => Err(CliError::Config(format!(
                "unknown scope {other:?}; expected algebra, operators, flows, geometry or all"
            ))),
        }
    }
}

impl Scope {
    fn suites(self) -> Vec<&'static str> {
        match self {
            Scope::Algebra => vec!["algebra"],
            Scope::Operators => vec!["operators"],
            Scope::Flows => vec!["flows"],
            Scope::Geometry => vec!["geometry"],
            Scope::All => vec!["algebra", "operators", "flows", "geometry"],
        }
    }
}

/// One invariant with its bound.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub suite: &'static str,
    pub name: String,
    /// `le`: observed must not exceed the tolerance; `ge`: must reach it.
    pub relation: &'static str,
    pub tolerance: f64,
    pub observed: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub scope: Vec<&'static str>,
    pub seed: u64,
    pub passed: bool,
    pub seconds: f64,
    pub checks: Vec<CheckResult>,
}

struct Suite {
    name: &'static str,
    checks: Vec<CheckResult>,
}

impl Suite {
    fn new(name: &'static str) -> Self {
        Self { name, checks: Vec::new() }
    }

    fn le(&mut self, name: impl Into<String>, observed: f64, tolerance: f64) {
        let passed = observed <= tolerance;
        self.checks.push(CheckResult { suite: self.name, name: name.into(), relation: "le", tolerance, observed, passed });
    }

    fn ge(&mut self, name: impl Into<String>, observed: f64, tolerance: f64) {
        let passed = observed >= tolerance;
        self.checks.push(CheckResult { suite: self.name, name: name.into(), relation: "ge", tolerance, observed, passed });
    }

    /// Records a library error as a failed check instead of aborting the run.
    fn attempt(&mut self, name: &str, f: impl FnOnce(&mut Suite) -> Result<(), String>) {
        if let Err(e) = f(self) {
            self.checks.push(CheckResult {
                suite: self.name,
                name: format!("{name}: {e}"),
                relation: "le",
                tolerance: 0.0,
                observed: f64::NAN,
                passed: false,
            });
        }
    }
}

/// Runs the suites in `scope` with the given seed.
pub fn run(scope: Scope, seed: u64) -> VerifyReport {
    let start = Instant::now();
    let mut checks = Vec::new();
    for name in scope.suites() {
        let mut s = Suite::new(name);
        match name {
            "algebra" => algebra(&mut s, seed),
            "operators" => operators(&mut s, seed),
            "flows" => flows(&mut s, seed),
            _ => geometry(&mut s, seed),
        }
        checks.extend(s.checks);
    }
    VerifyReport {
        scope: scope.suites(),
        seed,
        passed: checks.iter().all(|c| c.passed),
        seconds: start.elapsed().as_secs_f64(),
        checks,
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

fn rand_quat(rng: &mut ChaCha8Rng) -> Quaternion {
    Quaternion::new(gauss(rng), gauss(rng), gauss(rng), gauss(rng))
}

fn rand_imag(rng: &mut ChaCha8Rng) -> Quaternion {
    Quaternion::new(0.0, gauss(rng), gauss(rng), gauss(rng))
}

fn rand_vec(n: usize, rng: &mut ChaCha8Rng) -> QuaternionVector {
    QuaternionVector::new((0..n - 1).map(|_| rand_quat(rng)).collect())
}

fn rand_anti_hermitian(m: usize, rng: &mut ChaCha8Rng) -> QMatrix {
    let mut a = QMatrix::zeros(m, m);
    for r in 0..m {
        a.set(r, r, rand_imag(rng));
        for c in r + 1..m {
            let q = rand_quat(rng);
            a.set(r, c, q);
            a.set(c, r, -q.conj());
        }
    }
    a
}

fn rand_sub(n: usize, tag: Subspace, rng: &mut ChaCha8Rng) -> SubspaceElement {
    match tag {
        Subspace::MPar => SubspaceElement::MPar(MPar { m_par: gauss(rng) }),
        Subspace::MPerp => SubspaceElement::MPerp(MPerp { s: rand_imag(rng), v: rand_vec(n, rng) }),
        Subspace::HPar => SubspaceElement::HPar(HPar { p: rand_imag(rng), m: rand_anti_hermitian(n - 1, rng) }),
        Subspace::HPerp => SubspaceElement::HPerp(HPerp { s: rand_imag(rng), v: rand_vec(n, rng) }),
    }
}

fn rand_lie(n: usize, rng: &mut ChaCha8Rng) -> LieElement {
    let mut g = LieElement::zero(n);
    for tag in [Subspace::MPar, Subspace::MPerp, Subspace::HPar, Subspace::HPerp] {
        g = g.add(&rand_sub(n, tag, rng).to_lie(n));
    }
    g
}

fn diff(a: &LieElement, b: &LieElement) -> f64 {
    a.add(&b.scale(-1.0)).max_abs()
}

/// Hamilton product from the multiplication table.
fn hamilton(a: Quaternion, b: Quaternion) -> Quaternion {
    Quaternion::new(
        a.re * b.re - a.i * b.i - a.j * b.j - a.k * b.k,
        a.re * b.i + a.i * b.re + a.j * b.k - a.k * b.j,
        a.re * b.j - a.i * b.k + a.j * b.re + a.k * b.i,
        a.re * b.k + a.i * b.j - a.j * b.i + a.k * b.re,
    )
}

const TRIPLES: [(Subspace, Subspace, Subspace); 13] = [
    (Subspace::MPar, Subspace::MPar, Subspace::HPar),
    (Subspace::MPar, Subspace::HPar, Subspace::MPar),
    (Subspace::HPar, Subspace::HPar, Subspace::HPar),
    (Subspace::MPar, Subspace::MPerp, Subspace::HPerp),
    (Subspace::MPar, Subspace::HPerp, Subspace::MPerp),
    (Subspace::HPar, Subspace::MPerp, Subspace::MPerp),
    (Subspace::HPar, Subspace::HPerp, Subspace::HPerp),
    (Subspace::MPerp, Subspace::MPerp, Subspace::HPar),
    (Subspace::MPerp, Subspace::MPerp, Subspace::HPerp),
    (Subspace::HPerp, Subspace::HPerp, Subspace::HPar),
    (Subspace::HPerp, Subspace::HPerp, Subspace::HPerp),
    (Subspace::MPerp, Subspace::HPerp, Subspace::MPar),
    (Subspace::MPerp, Subspace::HPerp, Subspace::MPerp),
];

fn algebra(s: &mut Suite, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (i, j, k) = (Quaternion::I, Quaternion::J, Quaternion::K);
    let mut gens: f64 = [i * i, j * j, k * k, i * j * k].iter().fold(0.0, |m, q| m.max((*q + Quaternion::ONE).max_abs()));
    let mut worst = [0.0f64; 7];
    for n in 1..=3 {
        let e = LieElement::cartan(n);
        for _ in 0..1000 {
            let (a, b) = (rand_quat(&mut rng), rand_quat(&mut rng));
            gens = gens.max((a * b - hamilton(a, b)).max_abs() / (a.norm() * b.norm()));

            let (x, y, z) = (rand_imag(&mut rng), rand_imag(&mut rng), rand_imag(&mut rng));
            let sc = x.norm() * y.norm() * z.norm();
            let xyz = (x * y * z).re;
            worst[0] = worst[0].max((xyz - (y * z * x).re).abs() / sc).max((xyz + (y * x * z).re).abs() / sc);

            let (g1, g2, g3) = (rand_lie(n, &mut rng), rand_lie(n, &mut rng), rand_lie(n, &mut rng));
            let br = |a: &LieElement, b: &LieElement| bracket(a, b).expect("same rank");
            let jac = br(&g1, &br(&g2, &g3)).add(&br(&g2, &br(&g3, &g1))).add(&br(&g3, &br(&g1, &g2)));
            worst[1] = worst[1].max(jac.max_abs() / (g1.max_abs() * g2.max_abs() * g3.max_abs()));

            let sc = g1.max_abs() * g2.max_abs();
            let (m1, m2, h1, h2) = (g1.m_part(), g2.m_part(), g1.h_part(), g2.h_part());
            worst[2] = worst[2]
                .max(br(&m1, &m2).m_part().max_abs() / sc)
                .max(br(&h1, &m2).h_part().max_abs() / sc)
                .max(br(&h1, &h2).m_part().max_abs() / sc);

            let mp = g1.m_part().mperp;
            let twice = br(&e, &br(&e, &LieElement::from_mperp(mp.clone())));
            let expect = LieElement::from_mperp(MPerp { s: mp.s * -4.0, v: mp.v.scale(-1.0) });
            let hp = g1.hperp.clone();
            let twice_h = br(&e, &br(&e, &LieElement::from_hperp(hp.clone())));
            let expect_h = LieElement::from_hperp(HPerp { s: hp.s * -4.0, v: hp.v.scale(-1.0) });
            worst[3] = worst[3].max(diff(&twice, &expect) / sc).max(diff(&twice_h, &expect_h) / sc);

            let csc = chi(n) * sc;
            let km = killing(&m1, &m2).expect("same rank");
            let km_comp = killing_on_m(
                n,
                Quaternion::real(g1.mpar.m_par) + g1.mperp.s,
                &g1.mperp.v,
                Quaternion::real(g2.mpar.m_par) + g2.mperp.s,
                &g2.mperp.v,
            );
            let kh = killing(&LieElement::from_hperp(g1.hperp.clone()), &LieElement::from_hperp(g2.hperp.clone()))
                .expect("same rank");
            worst[4] = worst[4].max((km - km_comp).abs() / csc).max((kh - g1.hperp.killing(&g2.hperp)).abs() / csc);

            let a1 = killing(&br(&g3, &g1), &g2).expect("same rank");
            let a2 = killing(&g1, &br(&g3, &g2)).expect("same rank");
            worst[5] = worst[5].max((a1 + a2).abs() / (csc * g3.max_abs()));
        }
    }
    for (t, (a_tag, b_tag, target)) in TRIPLES.iter().enumerate() {
        for inst in 0..500 {
            let n = 1 + (inst + t) % 3;
            let (a, b) = (rand_sub(n, *a_tag, &mut rng), rand_sub(n, *b_tag, &mut rng));
            let (ga, gb) = (a.to_lie(n), b.to_lie(n));
            let closed = bracket_projected(n, &a, &b, *target).expect("covered pair").to_lie(n);
            let full = SubspaceElement::project(&bracket(&ga, &gb).expect("same rank"), *target).to_lie(n);
            worst[6] = worst[6].max(diff(&closed, &full) / (ga.max_abs() * gb.max_abs()).max(1.0));
        }
    }
    s.le("generator relations and product table", gens, 1e-12);
    s.le("cyclic trace Re(abc) = Re(bca) = -Re(bac)", worst[0], 1e-12);
    s.le("Jacobi identity", worst[1], 1e-12);
    s.le("symmetric-space inclusions", worst[2], 1e-12);
    s.le("ad(e)^2 eigenvalues -4, -1", worst[3], 1e-12);
    s.le("Killing trace form against component forms", worst[4], 1e-12);
    s.le("Killing Ad-invariance", worst[5], 1e-12);
    s.le("closed-form brackets (13 x 500)", worst[6], 1e-12);
}

fn rel(a: &Pair, b: &Pair) -> f64 {
    a.sub(b).max_abs() / b.max_abs().max(1.0)
}

fn periodic_ctx(grid: PeriodicGrid) -> OpContext {
    OpContext::new(grid).with_policy(MeanPolicy::Project, Anchor::ZeroMean)
}

fn line_ctx(grid: PeriodicGrid) -> OpContext {
    OpContext::new(grid).with_policy(MeanPolicy::Strict { tol: 1e-8 }, Anchor::Left)
}

fn grid(n: usize, l: f64) -> PeriodicGrid {
    PeriodicGrid::new(n, l).expect("fixed valid grid")
}

fn operators(s: &mut Suite, seed: u64) {
    let n = 2;
    let g = grid(256, 2.0 * std::f64::consts::PI);
    let ctx = periodic_ctx(g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = random_band_limited(g, n, 5, 1.0, &mut rng);
    let st: StatePair = p.clone().into();
    let w = random_band_limited(g, n, 5, 1.0, &mut rng);
    let w2 = random_band_limited(g, n, 5, 1.0, &mut rng);
    s.attempt("operator identities", |s| {
        let e = |e: OpError| e.to_string();
        let hu = apply_h(&ctx, &st, &p.clone().into()).map_err(e)?.as_pair();
        s.le("H(u)(u, uv) = (u_x, uv_x)", rel(&hu, &p.deriv(&ctx)), 1e-10);
        let a = apply_h(&ctx, &st, &w.clone().into()).map_err(e)?.as_pair();
        let b = apply_h_via_k(&ctx, &st, &w.clone().into()).map_err(e)?.as_pair();
        s.le("H against its ad(e)-form", rel(&a, &b), 1e-10);
        let a = apply_j(&ctx, &st, &w.clone().into()).map_err(e)?.as_pair();
        let b = apply_j_via_k(&ctx, &st, &w.clone().into()).map_err(e)?.as_pair();
        s.le("J against its ad(e)-form", rel(&a, &b), 1e-10);
        let a = apply_r(&ctx, &st, &w.clone().into()).map_err(e)?.as_pair();
        let b = apply_r_explicit(&ctx, &st, &w.clone().into()).map_err(e)?.as_pair();
        s.le("R = H J against explicit blocks", rel(&a, &b), 1e-9);
        let mut skew: f64 = 0.0;
        for op in [0, 1] {
            let ap = |x: &Pair| -> Result<Pair, OpError> {
                Ok(if op == 0 {
                    apply_h(&ctx, &st, &x.into())?.as_pair()
                } else {
                    apply_j(&ctx, &st, &x.into())?.as_pair()
                })
            };
            let ab = w.pairing(&ap(&w2).map_err(e)?);
            let ba = w2.pairing(&ap(&w).map_err(e)?);
            skew = skew.max((ab + ba).abs() / ab.abs().max(1.0));
        }
        s.le("H and J skew-adjoint", skew, 1e-9);
        let a = {
            let q = rand_quat(&mut rng);
            q * (1.0 / q.norm())
        };
        let big_a = exp_matrix(&rand_anti_hermitian(n - 1, &mut rng));
        let gst: StatePair = gauge_pair(&p, a, &big_a).into();
        let gw = gauge_pair(&w, a, &big_a);
        let mut eq: f64 = 0.0;
        for op in 0..3 {
            let ap = |st: &StatePair, x: &Pair| -> Result<Pair, OpError> {
                Ok(match op {
                    0 => apply_h(&ctx, st, &x.into())?.as_pair(),
                    1 => apply_j(&ctx, st, &x.into())?.as_pair(),
                    _ => apply_r(&ctx, st, &x.into())?.as_pair(),
                })
            };
            let lhs = gauge_pair(&ap(&st, &w).map_err(e)?, a, &big_a);
            eq = eq.max(rel(&ap(&gst, &gw).map_err(e)?, &lhs));
        }
        s.le("gauge equivariance of H, J, R", eq, 1e-10);
        let xs: Vec<FlowPair> = (0..3).map(|_| random_band_limited(g, n, 4, 1.0, &mut rng).into()).collect();
        let closure = symplectic_closure_residual(&ctx, &st, [&xs[0], &xs[1], &xs[2]], 1e-4).map_err(e)?;
        s.le("symplectic form closed", closure, 1e-7);
        Ok(())
    });

    let lg = grid(256, 40.0);
    let lctx = line_ctx(lg);
    s.attempt("hierarchy", |s| {
        let e = |e: OpError| e.to_string();
        let mut closed: f64 = 0.0;
        let mut d0: f64 = 0.0;
        let mut d1: f64 = 0.0;
        let mut invol: f64 = 0.0;
        for n in 1..=3 {
            let st: StatePair = random_localized(lg, n, 20.0, 3.0, 0.5, &mut rng).into();
            let h1 = hierarchy_flow(&lctx, &st, 1).map_err(e)?.as_pair();
            closed = closed.max(rel(&h1, &mkdv_closed_form(&lctx, &st).as_pair()));
            let c0 = h0_density(&st);
            d0 = d0.max(hamiltonian_density(&lctx, &st, 0).map_err(e)?.sub(&c0).max_abs() / c0.max_abs().max(1.0));
            let c1 = h1_density(&lctx, &st).integrate();
            let i1 = hamiltonian_density(&lctx, &st, 1).map_err(e)?.integrate();
            d1 = d1.max((i1 - c1).abs() / c1.abs().max(1.0));
            let g0: CovectorPair = st.as_pair().into();
            let g1 = apply_r_adjoint(&lctx, &st, &g0).map_err(e)?;
            let sc = g1.as_pair().pairing(&g1.as_pair()).sqrt().max(1.0);
            invol = invol.max(poisson_bracket(&lctx, &st, &g0, &g1).map_err(e)?.abs() / sc);
        }
        s.le("l = 1 flow against the mKdV closed form", closed, 1e-8);
        s.le("density identity l = 0", d0, 1e-9);
        s.le("density identity l = 1 (integrated)", d1, 1e-9);
        s.le("{H0, H1} = 0", invol, 1e-8);
        let fg = grid(128, 40.0);
        let fctx = line_ctx(fg);
        let st: StatePair = random_localized(fg, 2, 20.0, 5.0, 0.4, &mut rng).into();
        let f0 = |x: &StatePair| Ok(h0_density(x).integrate());
        let w0 = variational_derivative_fd(&f0, &st, 1e-5).map_err(e)?.as_pair();
        let c = fctx.clone();
        let f1 = move |x: &StatePair| Ok(h1_density(&c, x).integrate());
        let w1 = variational_derivative_fd(&f1, &st, 1e-5).map_err(e)?.as_pair();
        let expect = apply_r_adjoint(&fctx, &st, &st.as_pair().into()).map_err(e)?.as_pair();
        s.le("finite-difference gradients give w0, w1", rel(&w0, &st.as_pair()).max(rel(&w1, &expect)), 1e-6);
        Ok(())
    });
}

fn flows(s: &mut Suite, seed: u64) {
    let e = |e: FlowError| e.to_string();
    s.attempt("mKdV", |s| {
        let start = Instant::now();
        let g = grid(256, 32.0);
        let ctx = periodic_ctx(g);
        let a = 2.0;
        let p0 = mkdv_soliton(g, 1, a, 16.0, 0.0, Quaternion::new(0.0, 0.3, -0.8, 0.5));
        let mut cfg = SimConfig::new(1, g, FlowKind::Mkdv);
        cfg.cfl_c = 0.25;
        cfg.dt = 0.25 * g.dx().powi(3);
        cfg.t_end = 4.0 * g.length / (a * a);
        cfg.output_every = usize::MAX;
        let traj = simulate(&ctx, &cfg, &p0.clone().into()).map_err(e)?;
        let last = traj.states.last().expect("final state");
        s.le("soliton shape after one period, N = 256", last.sub(&p0).max_abs() / p0.max_abs(), 1e-4);

        let cg = grid(64, 2.0 * std::f64::consts::PI);
        let cctx = periodic_ctx(cg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_band_limited(cg, 2, 3, 0.5, &mut rng);
        let mut cfg = SimConfig::new(2, cg, FlowKind::Mkdv);
        cfg.t_end = 0.5;
        cfg.output_every = 500;
        let rep = conserved_report(&cctx, &simulate(&cctx, &cfg, &p.into()).map_err(e)?);
        s.le("H0 drift, coupled random data", rep.max_drift_h0, 1e-6);
        s.le("H1 drift, coupled random data", rep.max_drift_h1, 1e-6);
        s.le("mKdV runtime (s)", start.elapsed().as_secs_f64(), 120.0);

        let ng = grid(128, 2.0 * std::f64::consts::PI);
        let mut p = random_band_limited(ng, 2, 3, 1.0, &mut ChaCha8Rng::seed_from_u64(seed ^ 9));
        p.s = p.s.map(|_| Quaternion::ZERO);
        let ut = mkdv_rhs(&periodic_ctx(ng), &p, true, false);
        s.ge("u = 0 with generic uv gives nonzero u_t", ut.s.max_abs(), 1e-3);
        Ok(())
    });

    s.attempt("sine-Gordon", |s| {
        let g = grid(256, 40.0);
        let ctx = periodic_ctx(g);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p: StatePair = random_localized(g, 3, 20.0, 3.0, 0.3, &mut rng).into();
        let mut in_x: f64 = 0.0;
        let mut in_t: f64 = 0.0;
        for b in [Branch::Plus, Branch::Minus] {
            in_x = in_x.max(sg_solve_h(&ctx, &p, b, SgMode::Line, 4).map_err(e)?.constraint_deviation(3));
            let mut cfg = SimConfig::new(3, g, FlowKind::SineGordon);
            cfg.sg_branch = b;
            cfg.dt = 0.01;
            cfg.t_end = 0.05;
            cfg.output_every = 1;
            let traj = simulate(&ctx, &cfg, &p).map_err(e)?;
            in_t = in_t.max(traj.sg_constraint.iter().fold(0.0, |m: f64, c| m.max(*c)));
        }
        s.le("SG constraint constant in x", in_x, 1e-8);
        s.le("SG constraint constant in t", in_t, 1e-7);
        let (a, x0, q) = (1.0, 24.0, Quaternion::J);
        let mut kink: f64 = 0.0;
        for b in [Branch::Minus, Branch::Plus] {
            for t in [0.0, 0.25, 0.5] {
                let eps = 1e-4;
                let exact = sg_kink(g, 1, a, x0, t + eps, q, b).sub(&sg_kink(g, 1, a, x0, t - eps, q, b)).scale(0.5 / eps);
                let rhs = sg_rhs(&ctx, &sg_kink(g, 1, a, x0, t, q, b), b, SgMode::Line, 8).map_err(e)?;
                kink = kink.max(rhs.sub(&exact).max_abs() / exact.max_abs());
            }
        }
        s.le("SG kink residual on both branches", kink, 1e-6);
        Ok(())
    });
}

fn geometry(s: &mut Suite, seed: u64) {
    let e = |e: GeometryError| e.to_string();
    let g = grid(256, 40.0);
    let ctx = line_ctx(g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin = VerifyOptions::default().margin;
    s.attempt("frames", |s| {
        let mut unit: f64 = 0.0;
        let mut speed: f64 = 0.0;
        let mut inv: f64 = 0.0;
        for n in 1..=3 {
            let st: StatePair = random_localized(g, n, 20.0, 3.0, 0.3, &mut rng).into();
            let frame = transport_frame(&ctx, &st, &QMatrix::identity(n + 1), 16).map_err(e)?;
            unit = unit.max(frame.unitarity_defect());
            let sp = curve_speed(&reconstruct_curve(&frame));
            speed = (margin..sp.len() - margin).fold(speed, |m, i| m.max((sp.samples[i] - 1.0).abs()));
            let frame = transport_frame(&ctx, &st, &QMatrix::identity(n + 1), 8).map_err(e)?;
            let fc = curve_invariants(&reconstruct_curve(&frame));
            let cf = geometric_invariants(&ctx, &st);
            for (f, c) in [(&fc.g_nn, &cf.g_nn), (&fc.g_nnx, &cf.g_nnx), (&fc.g_nxnx, &cf.g_nxnx)] {
                let scale = c.max_abs().max(1.0);
                for i in (margin..f.len() - margin).step_by(8) {
                    inv = inv.max((f.samples[i] - c.samples[i / 8]).abs() / scale);
                }
            }
        }
        s.le("frame unitarity", unit, 1e-9);
        s.le("|gamma_x| = 1", speed, 1e-8);
        s.le("invariants against the reconstructed curve (relative)", inv, 1e-5);
        Ok(())
    });
    s.attempt("curve flows", |s| {
        let st: StatePair = random_localized(g, 2, 20.0, 3.0, 0.3, &mut rng).into();
        let stencil = mkdv_stencil(&ctx, &st, 2e-4, 8).map_err(e)?;
        let rep = verify_mkdv_map(&ctx, &stencil, &VerifyOptions::default()).map_err(e)?;
        s.le("mKdV map residual", rep.mkdv_map, 1e-4);
        s.ge("mKdV map with the opposite tangential sign", rep.opposite_tangential_sign, 1e-2);
        let pctx = periodic_ctx(g);
        let mut wave: f64 = 0.0;
        for b in [Branch::Minus, Branch::Plus] {
            let kink: StatePair = sg_kink(g, 1, 1.0, 20.0, 0.0, Quaternion::J, b).into();
            let stencil = sg_stencil(&pctx, &kink, 1e-3, 8, b, 8).map_err(e)?;
            wave = wave.max(verify_wave_map(&pctx, &stencil, b, 8, &VerifyOptions::default()).map_err(e)?.wave_map);
        }
        s.le("wave-map residual, SG kink on both branches", wave, 1e-5);
        Ok(())
    });
}
