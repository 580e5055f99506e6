//! Time integration of the mKdV (+1) and sine-Gordon (-1) flows with
//! conservation monitoring.
//!
//! The mKdV right side is the closed form of `R(u_x, uv_x)`. The SG flow is
//! nonlocal: at every stage the linear x-ODE for `(h_par, h, hv)` is solved
//! left to right from a boundary value of norm `chi`, and then
//! `u_t = h / chi`, `uv_t = hv / chi`.

use std::ops::AddAssign;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::biham_ops::{h0_density, h1_density, hierarchy_flow, mkdv_raw, OpContext, OpError, Pair, StatePair};
use crate::grid_calculus::{Field, PeriodicGrid};
use crate::quat_core::{acomm_a_unchecked, comm_c_vec_unchecked, inner_unchecked, Quaternion, QuaternionVector};
use crate::symm_lie::chi;

/// Errors raised while integrating a flow.
#[derive(Debug, Error)]
pub enum FlowError {
    #[error("non-finite state at t = {t}")]
    BlowUp { t: f64 },
    #[error("dt = {dt:e} exceeds the stability bound {bound:e}")]
    Cfl { dt: f64, bound: f64 },
    #[error("SG constraint drifted by {deviation:e} along x")]
    ConstraintDrift { deviation: f64 },
    #[error("no periodic solution of the SG x-system (smallest singular value {sigma:e})")]
    Shooting { sigma: f64 },
    #[error("invalid simulation settings: {0}")]
    Config(String),
    #[error(transparent)]
    Op(#[from] OpError),
}

/// Which flow to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowKind {
    Mkdv,
    SineGordon,
    /// `u_t = h_(l)` from the recursion operator.
    Hierarchy(usize),
}

/// Sign of the boundary value `h_par = +-chi` of the SG x-system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Branch {
    Plus,
    /// Reproduces the classical scalar equation `psi_xt = 4 sin psi`.
    #[default]
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// Boundary treatment of the SG x-system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SgMode {
    /// Integrate from the left end with `h = (+-chi, 0, 0)`.
    #[default]
    Line,
    /// Choose the boundary value that makes `h` periodic.
    Periodic,
}

/// Settings of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub grid: PeriodicGrid,
    pub dt: f64,
    pub t_end: f64,
    pub flow: FlowKind,
    pub galilean_removed: bool,
    pub sg_branch: Branch,
    pub sg_mode: SgMode,
    /// Fine steps per grid cell in the SG x-solve.
    pub sg_substeps: usize,
    /// Stability constant `c` in `dt <= c dx^3` for mKdV.
    pub cfl_c: f64,
    pub dealias: bool,
    /// Store a snapshot every this many steps.
    pub output_every: usize,
}

impl SimConfig {
    pub fn new(n: usize, grid: PeriodicGrid, flow: FlowKind) -> Self {
        Self {
            n,
            grid,
            dt: 0.05 * grid.dx().powi(3),
            t_end: 1.0,
            flow,
            galilean_removed: true,
            sg_branch: Branch::default(),
            sg_mode: SgMode::default(),
            sg_substeps: 4,
            cfl_c: 0.05,
            dealias: false,
            output_every: 100,
        }
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        if self.n < 1 {
            return Err(FlowError::Config("n must be at least 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(FlowError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(FlowError::Config(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        if self.output_every == 0 || self.sg_substeps == 0 {
            return Err(FlowError::Config("output_every and sg_substeps must be positive".into()));
        }
        if matches!(self.flow, FlowKind::Mkdv | FlowKind::Hierarchy(_)) {
            let bound = self.cfl_c * self.grid.dx().powi(3);
            if self.dt > bound * (1.0 + 1e-12) {
                return Err(FlowError::Cfl { dt: self.dt, bound });
            }
        }
        Ok(())
    }
}

/// mKdV right side, with the convective term `chi^{-1}(u_x, uv_x)` unless removed.
pub fn mkdv_rhs(ctx: &OpContext, state: &Pair, galilean_removed: bool, dealias: bool) -> Pair {
    let mut out = mkdv_raw(ctx, state);
    if !galilean_removed {
        out = out.axpy(1.0 / chi(state.n()), &state.deriv(ctx));
    }
    if dealias {
        out = Pair { s: ctx.spectral.dealias(&out.s), v: ctx.spectral.dealias(&out.v) };
    }
    out
}

/// One classical RK4 step; the scalar part is re-projected to imaginary after
/// every stage.
pub fn step_rk4<F>(state: &Pair, rhs: &mut F, dt: f64, t: f64) -> Result<Pair, FlowError>
where
    F: FnMut(&Pair) -> Result<Pair, FlowError>,
{
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let k1 = rhs(state)?;
    let s2 = state.axpy(0.5 * dt, &k1).imag_projected();
    let k2 = rhs(&s2)?;
    let s3 = state.axpy(0.5 * dt, &k2).imag_projected();
    let k3 = rhs(&s3)?;
    let s4 = state.axpy(dt, &k3).imag_projected();
    let k4 = rhs(&s4)?;
    let s = Field::lin_comb(&[
        (1.0, &state.s),
        (dt / 6.0, &k1.s),
        (dt / 3.0, &k2.s),
        (dt / 3.0, &k3.s),
        (dt / 6.0, &k4.s),
    ]);
    let v = Field::lin_comb(&[
        (1.0, &state.v),
        (dt / 6.0, &k1.v),
        (dt / 3.0, &k2.v),
        (dt / 3.0, &k3.v),
        (dt / 6.0, &k4.v),
    ]);
    let out = Pair { s, v }.imag_projected();
    if !out.is_finite() {
        return Err(FlowError::BlowUp { t: t + dt });
    }
    Ok(out)
}

/// Solution of the SG x-system on the grid.
#[derive(Debug, Clone)]
pub struct SgSolution {
    /// `(h, hv)` at the grid points.
    pub flow: Pair,
    pub h_par: Field<f64>,
    /// `h_par^2 + |h|^2 / 4 + |hv|^2` at the grid points.
    pub constraint: Field<f64>,
}

impl SgSolution {
    /// Largest deviation of the constraint from `chi^2`, relative.
    pub fn constraint_deviation(&self, n: usize) -> f64 {
        let c2 = chi(n).powi(2);
        self.constraint.samples.iter().fold(0.0, |m: f64, c| m.max((c - c2).abs() / c2))
    }
}

/// Packed x-ODE state `(h_par, h, hv)` of dimension `5 + 4(n-1)`.
fn sg_dim(m: usize) -> usize {
    5 + 4 * m
}

/// Right side of the SG x-system at one point.
pub(crate) fn sg_field(u: Quaternion, uv: &QuaternionVector, y: &[f64]) -> Vec<f64> {
    let m = uv.len();
    let hp = y[0];
    let h = Quaternion::new(y[1], y[2], y[3], y[4]);
    let hv = QuaternionVector::new((0..m).map(|l| Quaternion::new(y[5 + 4 * l], y[6 + 4 * l], y[7 + 4 * l], y[8 + 4 * l])).collect());
    let dh = -comm_c_vec_unchecked(uv, &hv) - u * (4.0 * hp);
    let dhp = -0.5 * acomm_a_unchecked(u, h) + inner_unchecked(uv, &hv).re;
    let mut out = Vec::with_capacity(sg_dim(m));
    out.push(dhp);
    out.extend_from_slice(&dh.to_array());
    for l in 0..m {
        let v = -(h * 0.5) * uv.entries[l] - u * hv.entries[l] - uv.entries[l] * hp;
        out.extend_from_slice(&v.to_array());
    }
    out
}

fn sg_matrix(u: Quaternion, uv: &QuaternionVector) -> DMatrix<f64> {
    let d = sg_dim(uv.len());
    let mut a = DMatrix::zeros(d, d);
    let mut e = vec![0.0; d];
    for c in 0..d {
        e[c] = 1.0;
        let col = sg_field(u, uv, &e);
        for r in 0..d {
            a[(r, c)] = col[r];
        }
        e[c] = 0.0;
    }
    a
}

/// Per-step propagators of the two-stage Gauss method on the fine x-grid.
fn sg_propagators(ctx: &OpContext, state: &Pair, substeps: usize, cells: usize) -> Vec<DMatrix<f64>> {
    let grid = state.grid();
    let m = state.n() - 1;
    let d = sg_dim(m);
    let h = grid.dx() / substeps as f64;
    let r3 = 3f64.sqrt();
    let c = [0.5 - r3 / 6.0, 0.5 + r3 / 6.0];
    let a = [[0.25, 0.25 - r3 / 6.0], [0.25 + r3 / 6.0, 0.25]];
    let nodes: Vec<(Field<Quaternion>, Field<QuaternionVector>)> = c
        .iter()
        .map(|&ci| {
            let s = ctx.spectral.shift(&state.s, ci * h);
            let v = ctx.spectral.shift(&state.v, ci * h);
            if substeps > 1 {
                (ctx.spectral.refine(&s, substeps), ctx.spectral.refine(&v, substeps))
            } else {
                (s, v)
            }
        })
        .collect();
    let steps = cells * substeps;
    let id = DMatrix::<f64>::identity(d, d);
    (0..steps)
        .map(|i| {
            let a1 = sg_matrix(nodes[0].0.samples[i], &nodes[0].1.samples[i]);
            let a2 = sg_matrix(nodes[1].0.samples[i], &nodes[1].1.samples[i]);
            let mut big = DMatrix::<f64>::identity(2 * d, 2 * d);
            big.view_mut((0, 0), (d, d)).add_assign(&(&a1 * (-h * a[0][0])));
            big.view_mut((0, d), (d, d)).add_assign(&(&a1 * (-h * a[0][1])));
            big.view_mut((d, 0), (d, d)).add_assign(&(&a2 * (-h * a[1][0])));
            big.view_mut((d, d), (d, d)).add_assign(&(&a2 * (-h * a[1][1])));
            let mut rhs = DMatrix::<f64>::zeros(2 * d, d);
            rhs.view_mut((0, 0), (d, d)).copy_from(&a1);
            rhs.view_mut((d, 0), (d, d)).copy_from(&a2);
            let k = big.lu().solve(&rhs).expect("Gauss stage matrix is invertible for small steps");
            &id + (k.rows(0, d) + k.rows(d, d)) * (0.5 * h)
        })
        .collect()
}

/// Solves the SG x-system for `(h, hv)` and `h_par`.
pub fn sg_solve_h(
    ctx: &OpContext,
    state: &StatePair,
    branch: Branch,
    mode: SgMode,
    substeps: usize,
) -> Result<SgSolution, FlowError> {
    sg_solve_raw(ctx, &state.as_pair(), branch, mode, substeps)
}

pub(crate) fn sg_solve_raw(
    ctx: &OpContext,
    st: &Pair,
    branch: Branch,
    mode: SgMode,
    substeps: usize,
) -> Result<SgSolution, FlowError> {
    let n = st.n();
    let m = n - 1;
    let d = sg_dim(m);
    let c = chi(n);
    let npts = st.grid().num_points;
    let cells = if mode == SgMode::Periodic { npts } else { npts - 1 };
    let props = sg_propagators(ctx, st, substeps, cells);
    let y0 = match mode {
        SgMode::Line => {
            let mut y = DVector::zeros(d);
            y[0] = branch.sign() * c;
            y
        }
        SgMode::Periodic => {
            let mut mono = DMatrix::<f64>::identity(d, d);
            for p in &props {
                mono = p * mono;
            }
            // The real part of `h` is a decoupled constant; shoot on the rest.
            let reduced = (mono - DMatrix::<f64>::identity(d, d)).remove_row(1).remove_column(1);
            let svd = reduced.svd(false, true);
            let vt = svd.v_t.expect("requested V^T");
            let (idx, sigma) = svd
                .singular_values
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |b, (i, &s)| if s < b.1 { (i, s) } else { b });
            if sigma > 1e-6 {
                return Err(FlowError::Shooting { sigma });
            }
            let mut y: DVector<f64> = vt.row(idx).transpose().insert_row(1, 0.0);
            let q = y[0] * y[0] + 0.25 * (1..5).map(|i| y[i] * y[i]).sum::<f64>() + (5..d).map(|i| y[i] * y[i]).sum::<f64>();
            y *= c / q.sqrt();
            if y[0] * branch.sign() < 0.0 {
                y = -y;
            }
            y
        }
    };
    let mut ys = Vec::with_capacity(npts + 1);
    let mut y = y0;
    ys.push(y.clone());
    for (i, p) in props.iter().enumerate() {
        y = p * y;
        if (i + 1) % substeps == 0 {
            ys.push(y.clone());
        }
    }
    ys.truncate(npts);
    let grid = st.grid();
    let hs: Vec<Quaternion> = ys.iter().map(|y| Quaternion::new(0.0, y[2], y[3], y[4])).collect();
    let hv: Vec<QuaternionVector> = ys
        .iter()
        .map(|y| QuaternionVector::new((0..m).map(|l| Quaternion::new(y[5 + 4 * l], y[6 + 4 * l], y[7 + 4 * l], y[8 + 4 * l])).collect()))
        .collect();
    let hp: Vec<f64> = ys.iter().map(|y| y[0]).collect();
    let cons: Vec<f64> = ys
        .iter()
        .map(|y| y[0] * y[0] + 0.25 * (1..5).map(|i| y[i] * y[i]).sum::<f64>() + (5..d).map(|i| y[i] * y[i]).sum::<f64>())
        .collect();
    let sol = SgSolution {
        flow: Pair { s: Field { grid, samples: hs }, v: Field { grid, samples: hv } },
        h_par: Field { grid, samples: hp },
        constraint: Field { grid, samples: cons },
    };
    let dev = sol.constraint_deviation(n);
    if dev > 1e-8 {
        return Err(FlowError::ConstraintDrift { deviation: dev });
    }
    Ok(sol)
}

/// SG time derivative `(u_t, uv_t) = chi^{-1}(h, hv)`.
pub fn sg_rhs(ctx: &OpContext, state: &Pair, branch: Branch, mode: SgMode, substeps: usize) -> Result<Pair, FlowError> {
    let sol = sg_solve_raw(ctx, state, branch, mode, substeps)?;
    Ok(sol.flow.scale(1.0 / chi(state.n())))
}

/// One RK4 step of the SG flow.
pub fn sg_step(ctx: &OpContext, state: &StatePair, dt: f64, branch: Branch, mode: SgMode, substeps: usize) -> Result<StatePair, FlowError> {
    let mut rhs = |p: &Pair| sg_rhs(ctx, p, branch, mode, substeps);
    Ok(step_rk4(&state.as_pair(), &mut rhs, dt, 0.0)?.into())
}

/// Snapshots of one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Pair>,
    /// SG constraint deviation at each snapshot; empty for other flows.
    pub sg_constraint: Vec<f64>,
}

/// Integrates `config.flow` from `initial` up to `t_end`.
pub fn simulate(ctx: &OpContext, config: &SimConfig, initial: &StatePair) -> Result<Trajectory, FlowError> {
    config.validate()?;
    let st0 = initial.as_pair();
    if st0.n() != config.n || st0.grid() != config.grid {
        return Err(FlowError::Config("initial state does not match n or grid".into()));
    }
    let steps = (config.t_end / config.dt).round() as usize;
    let dt = if steps > 0 { config.t_end / steps as f64 } else { 0.0 };
    let mut rhs = |p: &Pair| -> Result<Pair, FlowError> {
        match config.flow {
            FlowKind::Mkdv => Ok(mkdv_rhs(ctx, p, config.galilean_removed, config.dealias)),
            FlowKind::SineGordon => sg_rhs(ctx, p, config.sg_branch, config.sg_mode, config.sg_substeps),
            FlowKind::Hierarchy(l) => {
                let mut h = hierarchy_flow(ctx, &p.into(), l)?.as_pair();
                if !config.galilean_removed {
                    h = h.axpy(1.0 / chi(p.n()), &p.deriv(ctx));
                }
                Ok(h)
            }
        }
    };
    let sg_dev = |p: &Pair| -> Result<f64, FlowError> {
        Ok(sg_solve_raw(ctx, p, config.sg_branch, config.sg_mode, config.sg_substeps)?.constraint_deviation(p.n()))
    };
    let is_sg = config.flow == FlowKind::SineGordon;
    let mut traj = Trajectory { times: vec![0.0], states: vec![st0.clone()], sg_constraint: Vec::new() };
    if is_sg {
        traj.sg_constraint.push(sg_dev(&st0)?);
    }
    let mut state = st0;
    for k in 0..steps {
        let t = k as f64 * dt;
        state = step_rk4(&state, &mut rhs, dt, t)?;
        if (k + 1) % config.output_every == 0 || k + 1 == steps {
            traj.times.push((k + 1) as f64 * dt);
            if is_sg {
                traj.sg_constraint.push(sg_dev(&state)?);
            }
            traj.states.push(state.clone());
        }
    }
    Ok(traj)
}

/// Conserved functionals along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservationReport {
    pub times: Vec<f64>,
    pub h0: Vec<f64>,
    pub h1: Vec<f64>,
    pub sg_constraint: Vec<f64>,
    pub max_drift_h0: f64,
    pub max_drift_h1: f64,
}

fn drift(v: &[f64]) -> f64 {
    let Some(&first) = v.first() else { return 0.0 };
    let scale = v.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    v.iter().fold(0.0, |m: f64, x| m.max((x - first).abs())) / scale
}

/// Evaluates `int H^(0)`, `int H^(1)` at each snapshot and the relative drifts.
pub fn conserved_report(ctx: &OpContext, traj: &Trajectory) -> ConservationReport {
    let h0: Vec<f64> = traj.states.iter().map(|p| h0_density(&p.into()).integrate()).collect();
    let h1: Vec<f64> = traj.states.iter().map(|p| h1_density(ctx, &p.into()).integrate()).collect();
    ConservationReport {
        times: traj.times.clone(),
        max_drift_h0: drift(&h0),
        max_drift_h1: drift(&h1),
        h0,
        h1,
        sg_constraint: traj.sg_constraint.clone(),
    }
}

/// Scalar mKdV soliton `a sech(a(x - x0 + a^2 t / 4)) q` (periodic images ignored).
pub fn mkdv_soliton(grid: PeriodicGrid, n: usize, a: f64, x0: f64, t: f64, q: Quaternion) -> Pair {
    let q = q.imag() * (1.0 / q.imag().norm());
    let l = grid.length;
    let s = Field::from_fn(grid, |x| {
        let mut xi = x - x0 + a * a * t / 4.0;
        xi -= l * (xi / l).round();
        q * (a / (a * xi).cosh())
    });
    Pair { s, v: Field::from_fn(grid, |_| QuaternionVector::zeros(n - 1)) }
}

/// Scalar SG kink `u = 1/2 psi_x q` with `psi = 4 arctan exp(a(x - x0) + s 4t/a)`,
/// where `s = 1` on the minus branch and `s = -1` on the plus branch.
pub fn sg_kink(grid: PeriodicGrid, n: usize, a: f64, x0: f64, t: f64, q: Quaternion, branch: Branch) -> Pair {
    let q = q.imag() * (1.0 / q.imag().norm());
    let s = -branch.sign();
    let f = Field::from_fn(grid, |x| q * (a / (a * (x - x0) + s * 4.0 * t / a).cosh()));
    Pair { s: f, v: Field::from_fn(grid, |_| QuaternionVector::zeros(n - 1)) }
}

/// `psi` of [`sg_kink`].
pub fn sg_kink_angle(a: f64, x0: f64, t: f64, x: f64, branch: Branch) -> f64 {
    4.0 * (a * (x - x0) - branch.sign() * 4.0 * t / a).exp().atan()
}
