//! The Hamiltonian operator pair `(H, J)`, the ad-form operator `K`, the
//! recursion operator `R = HJ`, hierarchy flows, Hamiltonian densities,
//! variational derivatives and the Poisson and symplectic pairings.
//!
//! Variables follow the scaled convention: no `chi` appears inside the
//! operator blocks. Nonlocal terms are grouped so that every `D^{-1}` acts on
//! one integrand, which is the form in which the mean condition is meaningful.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::grid_calculus::{Anchor, Field, GridError, MeanPolicy, PeriodicGrid, Sample, Spectral};
use crate::quat_core::{
    acomm_a_unchecked, comm_c, comm_c_vec_unchecked, inner_unchecked, matcomm_c_unchecked, ImaginaryQuaternion,
    QMatrix, Quaternion, QuaternionVector,
};
use crate::symm_lie::{ad_e_inv_hperp, ad_e_inv_mperp, equivalence_action_unchecked, HPerp, LieElement, Subspace};

/// Errors raised by the operator layer.
#[derive(Debug, Error)]
pub enum OpError {
    #[error("nonlocal term {block}: {source}")]
    Nonlocality {
        block: &'static str,
        #[source]
        source: GridError,
    },
    #[error("hierarchy level {level}: {source}")]
    Hierarchy {
        level: usize,
        #[source]
        source: Box<OpError>,
    },
    #[error("state and argument do not share a grid or vector length")]
    Shape,
    #[error("operator K acts on h_perp or m_perp, not {0}")]
    KSpace(&'static str),
}

/// Spectral context shared by all operator evaluations on one grid.
#[derive(Debug, Clone)]
pub struct OpContext {
    pub spectral: Arc<Spectral>,
    pub policy: MeanPolicy,
    pub anchor: Anchor,
}

impl OpContext {
    /// Strict mean check, zero-mean constants.
    pub fn new(grid: PeriodicGrid) -> Self {
        Self { spectral: Arc::new(Spectral::new(grid)), policy: MeanPolicy::default(), anchor: Anchor::ZeroMean }
    }

    pub fn with_policy(&self, policy: MeanPolicy, anchor: Anchor) -> Self {
        Self { spectral: self.spectral.clone(), policy, anchor }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.spectral.grid
    }

    pub(crate) fn d<T: Sample>(&self, f: &Field<T>) -> Field<T> {
        self.spectral.deriv(f, 1)
    }

    pub(crate) fn di<T: Sample>(&self, f: &Field<T>, block: &'static str) -> Result<Field<T>, OpError> {
        self.spectral
            .antideriv_with(f, self.policy, self.anchor)
            .map_err(|source| OpError::Nonlocality { block, source })
    }
}

type FQ = Field<Quaternion>;
type FV = Field<QuaternionVector>;
type FR = Field<f64>;
type FM = Field<QMatrix>;
type Projector = fn(&LieElement) -> LieElement;

/// A pair `(scalar, vector)` of fields sharing one grid; the common shape of
/// states, flows and covectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub s: FQ,
    pub v: FV,
}

impl Pair {
    pub fn new(s: FQ, v: FV) -> Result<Self, OpError> {
        if s.grid != v.grid || s.len() != v.len() {
            return Err(OpError::Shape);
        }
        let m = v.samples.first().map_or(0, QuaternionVector::len);
        if v.samples.iter().any(|x| x.len() != m) {
            return Err(OpError::Shape);
        }
        Ok(Self { s, v })
    }

    pub fn zero(grid: PeriodicGrid, n: usize) -> Self {
        Self {
            s: Field::from_fn(grid, |_| Quaternion::ZERO),
            v: Field::from_fn(grid, |_| QuaternionVector::zeros(n - 1)),
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.s.grid
    }

    /// Rank `n` of the ambient `HP^n`.
    pub fn n(&self) -> usize {
        self.v.samples.first().map_or(0, QuaternionVector::len) + 1
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { s: self.s.add(&o.s), v: self.v.add(&o.v) }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self { s: self.s.sub(&o.s), v: self.v.sub(&o.v) }
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { s: self.s.scale(a), v: self.v.scale(a) }
    }

    /// `self + a x`.
    pub fn axpy(&self, a: f64, x: &Self) -> Self {
        Self { s: Field::lin_comb(&[(1.0, &self.s), (a, &x.s)]), v: Field::lin_comb(&[(1.0, &self.v), (a, &x.v)]) }
    }

    /// Drops real parts of the scalar component.
    pub fn imag_projected(&self) -> Self {
        Self { s: self.s.map(|q| q.imag()), v: self.v.clone() }
    }

    pub fn max_abs(&self) -> f64 {
        self.s.max_abs().max(self.v.max_abs())
    }

    /// Largest real part of the scalar component.
    pub fn max_re(&self) -> f64 {
        self.s.samples.iter().fold(0.0, |m: f64, q| m.max(q.re.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.s.samples.iter().all(|q| q.to_array().iter().all(|v| v.is_finite()))
            && self.v.samples.iter().all(|v| v.entries.iter().all(|q| q.to_array().iter().all(|c| c.is_finite())))
    }

    pub fn deriv(&self, ctx: &OpContext) -> Self {
        Self { s: ctx.d(&self.s), v: ctx.d(&self.v) }
    }

    /// Real `L^2` pairing `int (s . s' + Re<v, v'>) dx`.
    pub fn pairing(&self, o: &Self) -> f64 {
        let local = self.s.zip_map(&o.s, |a, b| (*a * b.conj()).re);
        let vec = self.v.zip_map(&o.v, |a, b| inner_unchecked(a, b).re);
        local.integrate() + vec.integrate()
    }

    pub fn imaginary_s(&self) -> Field<ImaginaryQuaternion> {
        self.s.map(|q| ImaginaryQuaternion::from_quat_imag(*q))
    }
}

macro_rules! typed_pair {
    ($(#[$doc:meta])* $name:ident, $s:ident, $v:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            pub $s: Field<ImaginaryQuaternion>,
            pub $v: Field<QuaternionVector>,
        }

        impl $name {
            pub fn new($s: Field<ImaginaryQuaternion>, $v: Field<QuaternionVector>) -> Result<Self, OpError> {
                let p = Pair::new($s.map(|q| q.to_quat()), $v)?;
                Ok(Self::from(&p))
            }

            pub fn as_pair(&self) -> Pair {
                Pair { s: self.$s.map(|q| q.to_quat()), v: self.$v.clone() }
            }

            pub fn grid(&self) -> PeriodicGrid {
                self.$s.grid
            }

            pub fn n(&self) -> usize {
                self.$v.samples.first().map_or(0, QuaternionVector::len) + 1
            }
        }

        impl From<&Pair> for $name {
            fn from(p: &Pair) -> Self {
                Self { $s: p.imaginary_s(), $v: p.v.clone() }
            }
        }

        impl From<Pair> for $name {
            fn from(p: Pair) -> Self {
                Self::from(&p)
            }
        }
    };
}

typed_pair!(
    /// Flow variables `(u, uv)`: the covariants of the parallel frame.
    StatePair, u, bu
);
typed_pair!(
    /// A flow `(h_perp, hv_perp)`.
    FlowPair, hs, hv
);
typed_pair!(
    /// A covector `(w_perp, wv_perp)`.
    CovectorPair, ws, wv
);

/// Nonlocal parallel parts of a flow and of a covector.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxFields {
    pub h_par: Field<f64>,
    pub w_par: Field<ImaginaryQuaternion>,
    pub w_par_matrix: Field<QMatrix>,
}

fn check(state: &Pair, arg: &Pair) -> Result<(), OpError> {
    if state.grid() != arg.grid() || state.n() != arg.n() {
        return Err(OpError::Shape);
    }
    Ok(())
}

// Pointwise kernels.

fn c_qq(a: &FQ, b: &FQ) -> FQ {
    a.zip_map(b, |x, y| comm_c(*x, *y))
}

/// `C(a, b)` for vectors.
fn c_vv(a: &FV, b: &FV) -> FQ {
    a.zip_map(b, comm_c_vec_unchecked)
}

fn cm_vv(a: &FV, b: &FV) -> FM {
    a.zip_map(b, matcomm_c_unchecked)
}

/// `A(a, b)` on imaginary parts.
fn a_qq(a: &FQ, b: &FQ) -> FR {
    a.zip_map(b, |x, y| acomm_a_unchecked(*x, *y))
}

/// `A(a, b) = 2 Re<a, b>` for vectors.
fn a_vv(a: &FV, b: &FV) -> FR {
    a.zip_map(b, |x, y| 2.0 * inner_unchecked(x, y).re)
}

/// `f u` for a real field `f`.
fn r_times_q(f: &FR, u: &FQ) -> FQ {
    f.zip_map(u, |a, q| *q * *a)
}

/// Scalar field times vector field, entries multiplied from the left.
fn q_times_v(s: &FQ, v: &FV) -> FV {
    s.zip_map(v, |a, x| x.left_mul(*a))
}

fn r_times_v(f: &FR, v: &FV) -> FV {
    f.zip_map(v, |a, x| x.scale(*a))
}

/// Row vector field times matrix field.
fn v_times_m(v: &FV, m: &FM) -> FV {
    v.zip_map(m, |x, a| x.mul_mat(a))
}

/// `h_par = -D^{-1}(1/2 A(u, h) - 1/2 A(uv, hv))`.
pub fn h_parallel(ctx: &OpContext, state: &StatePair, h: &FlowPair) -> Result<Field<f64>, OpError> {
    h_par_raw(ctx, &state.as_pair(), &h.as_pair())
}

fn h_par_raw(ctx: &OpContext, st: &Pair, h: &Pair) -> Result<FR, OpError> {
    check(st, h)?;
    let integrand = Field::lin_comb(&[(-0.5, &a_qq(&st.s, &h.s)), (0.5, &a_vv(&st.v, &h.v))]);
    ctx.di(&integrand, "h_par")
}

/// `w_par = -D^{-1}(C(u, w) - 1/2 C(uv, wv))` and `W_par = D^{-1} C(uv, wv)`.
pub fn w_parallel(
    ctx: &OpContext,
    state: &StatePair,
    w: &CovectorPair,
) -> Result<(Field<ImaginaryQuaternion>, Field<QMatrix>), OpError> {
    let (wp, wm) = w_par_raw(ctx, &state.as_pair(), &w.as_pair())?;
    Ok((wp.map(|q| ImaginaryQuaternion::from_quat_imag(*q)), wm))
}

fn w_par_raw(ctx: &OpContext, st: &Pair, w: &Pair) -> Result<(FQ, FM), OpError> {
    check(st, w)?;
    let integrand = Field::lin_comb(&[(-1.0, &c_qq(&st.s, &w.s)), (0.5, &c_vv(&st.v, &w.v))]);
    let wp = ctx.di(&integrand, "w_par")?;
    let wm = ctx.di(&cm_vv(&st.v, &w.v), "W_par")?;
    Ok((wp, wm))
}

/// All three parallel parts for a flow `h` and covector `w`.
pub fn aux_fields(ctx: &OpContext, state: &StatePair, h: &FlowPair, w: &CovectorPair) -> Result<AuxFields, OpError> {
    let (w_par, w_par_matrix) = w_parallel(ctx, state, w)?;
    Ok(AuxFields { h_par: h_parallel(ctx, state, h)?, w_par, w_par_matrix })
}

/// Cosymplectic operator `H` applied to a covector.
pub fn apply_h(ctx: &OpContext, state: &StatePair, w: &CovectorPair) -> Result<FlowPair, OpError> {
    Ok(h_raw(ctx, &state.as_pair(), &w.as_pair())?.into())
}

pub(crate) fn h_raw(ctx: &OpContext, st: &Pair, w: &Pair) -> Result<Pair, OpError> {
    let (wp, wm) = w_par_raw(ctx, st, w)?;
    let s = Field::lin_comb(&[(1.0, &ctx.d(&w.s)), (1.0, &c_qq(&st.s, &wp)), (0.5, &c_vv(&st.v, &w.v))]);
    let v = Field::lin_comb(&[
        (1.0, &ctx.d(&w.v)),
        (-1.0, &q_times_v(&wp, &st.v)),
        (1.0, &v_times_m(&st.v, &wm)),
        (1.0, &q_times_v(&w.s, &st.v)),
        (-1.0, &q_times_v(&st.s, &w.v)),
    ]);
    Ok(Pair { s, v })
}

/// Symplectic operator `J` applied to a flow.
pub fn apply_j(ctx: &OpContext, state: &StatePair, h: &FlowPair) -> Result<CovectorPair, OpError> {
    Ok(j_raw(ctx, &state.as_pair(), &h.as_pair())?.into())
}

pub(crate) fn j_raw(ctx: &OpContext, st: &Pair, h: &Pair) -> Result<Pair, OpError> {
    let hp = h_par_raw(ctx, st, h)?;
    let s = Field::lin_comb(&[(0.25, &ctx.d(&h.s)), (0.25, &c_vv(&st.v, &h.v)), (1.0, &r_times_q(&hp, &st.s))]);
    let v = Field::lin_comb(&[
        (1.0, &ctx.d(&h.v)),
        (0.5, &q_times_v(&h.s, &st.v)),
        (1.0, &q_times_v(&st.s, &h.v)),
        (1.0, &r_times_v(&hp, &st.v)),
    ]);
    Ok(Pair { s, v })
}

/// Recursion operator `R = H J`.
pub fn apply_r(ctx: &OpContext, state: &StatePair, h: &FlowPair) -> Result<FlowPair, OpError> {
    let st = state.as_pair();
    Ok(h_raw(ctx, &st, &j_raw(ctx, &st, &h.as_pair())?)?.into())
}

/// Adjoint recursion operator `R* = J H`.
pub fn apply_r_adjoint(ctx: &OpContext, state: &StatePair, w: &CovectorPair) -> Result<CovectorPair, OpError> {
    let st = state.as_pair();
    Ok(j_raw(ctx, &st, &h_raw(ctx, &st, &w.as_pair())?)?.into())
}

fn lie_field(f: impl Fn(usize) -> LieElement, grid: PeriodicGrid) -> Field<LieElement> {
    Field { grid, samples: (0..grid.num_points).map(f).collect() }
}

fn matrices(z: &Field<LieElement>) -> FM {
    z.map(LieElement::to_matrix)
}

/// Ad-form operator `K = D + [U, .]_perp - [U, D^{-1}[U, .]_par]` with
/// `U = (u, uv)` in `h_perp`, acting on fields valued in `h_perp` or `m_perp`.
pub fn apply_k(
    ctx: &OpContext,
    state: &StatePair,
    z: &Field<LieElement>,
    space: Subspace,
) -> Result<Field<LieElement>, OpError> {
    let st = state.as_pair();
    let n = st.n();
    if z.grid != st.grid() || z.samples.iter().any(|e| e.n != n) {
        return Err(OpError::Shape);
    }
    let (perp, par): (Projector, Projector) = match space {
        Subspace::HPerp => (|g| LieElement::from_hperp(g.hperp.clone()), |g| LieElement::from_hpar(g.hpar.clone())),
        Subspace::MPerp => (|g| LieElement::from_mperp(g.mperp.clone()), |g| LieElement::from_mpar(g.n, g.mpar.m_par)),
        other => return Err(OpError::KSpace(other.name())),
    };
    let grid = st.grid();
    let um = lie_field(
        |i| LieElement::from_hperp(HPerp { s: st.s.samples[i], v: st.v.samples[i].clone() }),
        grid,
    );
    let um = matrices(&um);
    let zm = matrices(z);
    let br = um.zip_map(&zm, |a, b| LieElement::project_matrix(&a.commutator(b)));
    let par_part = matrices(&br.map(par));
    let inner = ctx.di(&par_part, "K")?;
    let outer = um.zip_map(&inner, |a, b| a.commutator(b));
    let total = Field::lin_comb(&[(1.0, &ctx.d(&zm)), (1.0, &matrices(&br.map(perp))), (-1.0, &outer)]);
    Ok(total.map(LieElement::project_matrix))
}

/// `H` evaluated as `K` restricted to `h_perp`.
pub fn apply_h_via_k(ctx: &OpContext, state: &StatePair, w: &CovectorPair) -> Result<FlowPair, OpError> {
    let wp = w.as_pair();
    let z = lie_field(
        |i| LieElement::from_hperp(HPerp { s: wp.s.samples[i], v: wp.v.samples[i].clone() }),
        wp.grid(),
    );
    let k = apply_k(ctx, state, &z, Subspace::HPerp)?;
    Ok(Pair { s: k.map(|g| g.hperp.s), v: k.map(|g| g.hperp.v.clone()) }.into())
}

/// `J` evaluated as `-ad(e)^{-1} K ad(e)^{-1}` on `m_perp`.
pub fn apply_j_via_k(ctx: &OpContext, state: &StatePair, h: &FlowPair) -> Result<CovectorPair, OpError> {
    let hp = h.as_pair();
    let z = lie_field(
        |i| {
            let x = HPerp { s: hp.s.samples[i], v: hp.v.samples[i].clone() };
            LieElement::from_mperp(ad_e_inv_hperp(&x))
        },
        hp.grid(),
    );
    let k = apply_k(ctx, state, &z, Subspace::MPerp)?;
    let back = k.map(|g| ad_e_inv_mperp(&g.mperp));
    Ok(Pair { s: back.map(|x| -x.s), v: back.map(|x| x.v.scale(-1.0)) }.into())
}

/// The four blocks of the recursion operator written out term by term.
#[derive(Debug, Clone)]
pub struct RBlocks {
    pub r11: FQ,
    pub r12: FQ,
    pub r21: FV,
    pub r22: FV,
}

/// Explicit block form of `R`, assembled independently of `H` and `J`.
///
/// Each nonlocal term carries its own `D^{-1}`, so individual integrands need
/// not have zero mean; run this with [`MeanPolicy::Project`].
pub fn apply_r_explicit(ctx: &OpContext, state: &StatePair, h: &FlowPair) -> Result<FlowPair, OpError> {
    let b = r_blocks(ctx, state, h)?;
    Ok(Pair { s: b.r11.add(&b.r12), v: b.r21.add(&b.r22) }.into())
}

pub fn r_blocks(ctx: &OpContext, state: &StatePair, h: &FlowPair) -> Result<RBlocks, OpError> {
    let st = state.as_pair();
    let hh = h.as_pair();
    check(&st, &hh)?;
    let (u, uv) = (&st.s, &st.v);
    let (h, hv) = (&hh.s, &hh.v);
    let d = |f: &FQ| ctx.d(f);
    let dv = |f: &FV| ctx.d(f);
    let di = |f: &FQ| ctx.di(f, "R");
    let dr = |f: &FR| ctx.di(f, "R");
    let dm = |f: &FM| ctx.di(f, "R");
    let cu = |f: &FQ| c_qq(u, f);
    let c_half = |v: &FV| c_vv(uv, v).scale(0.5);
    let cm = |v: &FV| cm_vv(uv, v);
    let au_q = |f: &FQ| a_qq(u, f);
    let au_r = |f: &FR| r_times_q(f, u).scale(2.0);
    let a_half = |v: &FV| a_vv(uv, v).scale(0.5);
    let ru_q = |f: &FQ| q_times_v(f, uv);
    let ru_r = |f: &FR| r_times_v(f, uv);
    let lu = |v: &FV| q_times_v(u, v);
    let lm = |m: &FM| v_times_m(uv, m);

    let dh = d(h);
    let ruh = ru_q(h);
    let di_auh = dr(&au_q(h))?;
    let r11 = Field::lin_comb(&[
        (0.25, &d(&dh)),
        (0.5, &c_half(&ruh)),
        (-0.25, &d(&au_r(&di_auh))),
        (-0.25, &cu(&di(&cu(&dh))?)),
        (0.5, &cu(&di(&c_half(&ruh))?)),
    ]);

    let dhv = dv(hv);
    let luh = lu(hv);
    let chv = c_half(hv);
    let di_ahv = dr(&a_half(hv))?;
    let r12 = Field::lin_comb(&[
        (0.5, &d(&chv)),
        (1.0, &c_half(&dhv)),
        (1.0, &c_half(&luh)),
        (0.5, &d(&au_r(&di_ahv))),
        (1.0, &cu(&di(&c_half(&dhv))?)),
        (-0.5, &cu(&di(&cu(&chv))?)),
        (1.0, &cu(&di(&c_half(&luh))?)),
    ]);

    let r21 = Field::lin_comb(&[
        (0.5, &dv(&ruh)),
        (0.25, &ru_q(&dh)),
        (-0.5, &lu(&ruh)),
        (0.25, &ru_q(&di(&cu(&dh))?)),
        (-0.5, &dv(&ru_r(&di_auh))),
        (-0.25, &ru_q(&au_r(&di_auh))),
        (-0.5, &ru_q(&di(&c_half(&ruh))?)),
        (0.5, &lm(&dm(&cm(&ruh))?)),
        (0.5, &lu(&ru_r(&di_auh))),
    ]);

    let r22 = Field::lin_comb(&[
        (1.0, &dv(&dhv)),
        (1.0, &dv(&luh)),
        (-1.0, &lu(&dhv)),
        (-1.0, &lu(&luh)),
        (0.5, &ru_q(&chv)),
        (1.0, &dv(&ru_r(&di_ahv))),
        (-1.0, &ru_q(&di(&c_half(&dhv))?)),
        (1.0, &lm(&dm(&cm(&dhv))?)),
        (0.5, &ru_q(&di(&cu(&chv))?)),
        (0.5, &ru_q(&au_r(&di_ahv))),
        (-1.0, &ru_q(&di(&c_half(&luh))?)),
        (1.0, &lm(&dm(&cm(&luh))?)),
        (-1.0, &lu(&ru_r(&di_ahv))),
    ]);
    Ok(RBlocks { r11, r12, r21, r22 })
}

/// Hierarchy of flows `h_(l) = R^l (u_x, uv_x)` for one state, cached by level.
#[derive(Debug)]
pub struct Hierarchy<'a> {
    ctx: &'a OpContext,
    state: Pair,
    flows: Vec<Pair>,
}

impl<'a> Hierarchy<'a> {
    pub fn new(ctx: &'a OpContext, state: &StatePair) -> Self {
        let st = state.as_pair();
        let first = st.deriv(ctx);
        Self { ctx, state: st, flows: vec![first] }
    }

    pub fn flow(&mut self, l: usize) -> Result<FlowPair, OpError> {
        Ok(self.flow_raw(l)?.into())
    }

    fn flow_raw(&mut self, l: usize) -> Result<&Pair, OpError> {
        while self.flows.len() <= l {
            let level = self.flows.len();
            let prev = &self.flows[level - 1];
            let next = j_raw(self.ctx, &self.state, prev)
                .and_then(|w| h_raw(self.ctx, &self.state, &w))
                .map_err(|e| OpError::Hierarchy { level, source: Box::new(e) })?;
            self.flows.push(next);
        }
        Ok(&self.flows[l])
    }

    /// `H^(l) = h_par(h_(l)) / (1 + 2l)`.
    pub fn density(&mut self, l: usize) -> Result<Field<f64>, OpError> {
        let ctx = self.ctx;
        let st = self.state.clone();
        let h = self.flow_raw(l)?.clone();
        let hp = h_par_raw(ctx, &st, &h).map_err(|e| OpError::Hierarchy { level: l, source: Box::new(e) })?;
        Ok(hp.scale(1.0 / (1.0 + 2.0 * l as f64)))
    }
}

/// `R^l (u_x, uv_x)`.
pub fn hierarchy_flow(ctx: &OpContext, state: &StatePair, l: usize) -> Result<FlowPair, OpError> {
    Hierarchy::new(ctx, state).flow(l)
}

/// Density of the `l`-th Hamiltonian.
pub fn hamiltonian_density(ctx: &OpContext, state: &StatePair, l: usize) -> Result<Field<f64>, OpError> {
    Hierarchy::new(ctx, state).density(l)
}

/// Closed form `H^(0) = 1/2 |u|^2 + 1/2 |uv|^2`.
pub fn h0_density(state: &StatePair) -> Field<f64> {
    let st = state.as_pair();
    st.s.zip_map(&st.v, |a, v| 0.5 * a.norm_sqr() + 0.5 * v.norm_sqr())
}

/// Closed form
/// `H^(1) = 1/8 u_x^2 - 1/2 |uv_x|^2 - 1/8 A(u, C(uv, uv_x)) + 1/8 (u^2 - |uv|^2)^2`.
pub fn h1_density(ctx: &OpContext, state: &StatePair) -> Field<f64> {
    let st = state.as_pair();
    let d = st.deriv(ctx);
    let cvx = c_vv(&st.v, &d.v);
    let a = a_qq(&st.s, &cvx);
    let n = st.s.len();
    let samples = (0..n)
        .map(|i| {
            let ux2 = -d.s.samples[i].norm_sqr();
            let u2 = -st.s.samples[i].norm_sqr();
            let v2 = st.v.samples[i].norm_sqr();
            0.125 * ux2 - 0.5 * d.v.samples[i].norm_sqr() - 0.125 * a.samples[i] + 0.125 * (u2 - v2).powi(2)
        })
        .collect();
    Field { grid: st.grid(), samples }
}

/// Closed-form mKdV right side, the `l = 1` member of the hierarchy.
pub fn mkdv_closed_form(ctx: &OpContext, state: &StatePair) -> FlowPair {
    mkdv_raw(ctx, &state.as_pair()).into()
}

pub(crate) fn mkdv_raw(ctx: &OpContext, st: &Pair) -> Pair {
    let ds = ctx.spectral.derivs(&st.s, &[1, 2, 3]);
    let dv = ctx.spectral.derivs(&st.v, &[1, 2, 3]);
    let (ux, uxx, u3) = (&ds[0], &ds[1], &ds[2]);
    let (vx, vxx, v3) = (&dv[0], &dv[1], &dv[2]);
    let n = st.s.len();
    let mut s = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        let u = st.s.samples[i];
        let uv = &st.v.samples[i];
        let cvx = comm_c_vec_unchecked(uv, &vx.samples[i]);
        let cvxx = comm_c_vec_unchecked(uv, &vxx.samples[i]);
        let u2 = u * u;
        s.push(u3.samples[i] * 0.25 - u2 * ux.samples[i] * 1.5 + comm_c(u, cvx) * 0.75 + cvxx * 0.75);
        let nv2 = uv.norm_sqr();
        let coef1 = (Quaternion::real(nv2) - u2 + ux.samples[i]) * 1.5;
        let a = acomm_a_unchecked(u, ux.samples[i]);
        let coef2 = (u * (2.0 * nv2) - Quaternion::real(a) - cvx + uxx.samples[i]) * 0.75;
        let mut out = v3.samples[i].clone();
        for (l, o) in out.entries.iter_mut().enumerate() {
            *o += coef1 * vx.samples[i].entries[l] + coef2 * uv.entries[l];
        }
        v.push(out);
    }
    Pair { s: Field { grid: st.grid(), samples: s }, v: Field { grid: st.grid(), samples: v } }
}

/// Gateaux derivative of `F` at `state` along `dir` by central differences.
pub fn directional_derivative_fd(
    functional: &dyn Fn(&StatePair) -> Result<f64, OpError>,
    state: &StatePair,
    dir: &Pair,
    eps: f64,
) -> Result<f64, OpError> {
    let st = state.as_pair();
    let plus = functional(&st.axpy(eps, dir).into())?;
    let minus = functional(&st.axpy(-eps, dir).into())?;
    Ok((plus - minus) / (2.0 * eps))
}

/// Variational derivative of `F` by central differences in every real
/// coordinate of the state.
///
/// The covector is the literal gradient: component `c` at point `i` is
/// `dF/d(state_c(i)) / dx`, so that `dF = int (w . delta) dx`.
pub fn variational_derivative_fd(
    functional: &dyn Fn(&StatePair) -> Result<f64, OpError>,
    state: &StatePair,
    eps: f64,
) -> Result<CovectorPair, OpError> {
    let st = state.as_pair();
    let scale = st.max_abs().max(1.0);
    let h = eps * scale;
    let dx = st.grid().dx();
    let n = st.s.len();
    let mut ws = vec![Quaternion::ZERO; n];
    let mut wv = st.v.samples.iter().map(|v| QuaternionVector::zeros(v.len())).collect::<Vec<_>>();
    let mut probe = st.clone();
    let eval = |p: &Pair| functional(&p.into());
    for i in 0..n {
        for c in 1..4 {
            let base = probe.s.samples[i];
            let mut arr = base.to_array();
            arr[c] += h;
            probe.s.samples[i] = Quaternion::from_array(arr);
            let fp = eval(&probe)?;
            arr[c] -= 2.0 * h;
            probe.s.samples[i] = Quaternion::from_array(arr);
            let fm = eval(&probe)?;
            probe.s.samples[i] = base;
            let mut w = ws[i].to_array();
            w[c] = (fp - fm) / (2.0 * h * dx);
            ws[i] = Quaternion::from_array(w);
        }
        for l in 0..wv[i].len() {
            for c in 0..4 {
                let base = probe.v.samples[i].entries[l];
                let mut arr = base.to_array();
                arr[c] += h;
                probe.v.samples[i].entries[l] = Quaternion::from_array(arr);
                let fp = eval(&probe)?;
                arr[c] -= 2.0 * h;
                probe.v.samples[i].entries[l] = Quaternion::from_array(arr);
                let fm = eval(&probe)?;
                probe.v.samples[i].entries[l] = base;
                let mut w = wv[i].entries[l].to_array();
                w[c] = (fp - fm) / (2.0 * h * dx);
                wv[i].entries[l] = Quaternion::from_array(w);
            }
        }
    }
    let grid = st.grid();
    Ok(Pair { s: Field { grid, samples: ws }, v: Field { grid, samples: wv } }.into())
}

/// `{F1, F2} = int Re<grad F1, H(grad F2)> dx` from the two gradients.
pub fn poisson_bracket(
    ctx: &OpContext,
    state: &StatePair,
    grad1: &CovectorPair,
    grad2: &CovectorPair,
) -> Result<f64, OpError> {
    let st = state.as_pair();
    Ok(grad1.as_pair().pairing(&h_raw(ctx, &st, &grad2.as_pair())?))
}

/// `omega(X1, X2) = int Re<X1, J(X2)> dx`.
pub fn symplectic_pairing(ctx: &OpContext, state: &StatePair, x1: &FlowPair, x2: &FlowPair) -> Result<f64, OpError> {
    let st = state.as_pair();
    Ok(x1.as_pair().pairing(&j_raw(ctx, &st, &x2.as_pair())?))
}

/// Cyclic sum of state derivatives of `omega` along three constant flows,
/// relative to the size of the individual terms.
pub fn symplectic_closure_residual(
    ctx: &OpContext,
    state: &StatePair,
    xs: [&FlowPair; 3],
    eps: f64,
) -> Result<f64, OpError> {
    let st = state.as_pair();
    let mut total = 0.0;
    let mut scale: f64 = 0.0;
    for k in 0..3 {
        let (a, b, c) = (xs[k].as_pair(), xs[(k + 1) % 3].as_pair(), xs[(k + 2) % 3].as_pair());
        let omega = |s: &Pair| -> Result<f64, OpError> { Ok(b.pairing(&j_raw(ctx, s, &c)?)) };
        let term = (omega(&st.axpy(eps, &a))? - omega(&st.axpy(-eps, &a))?) / (2.0 * eps);
        total += term;
        scale = scale.max(term.abs());
    }
    Ok(total.abs() / scale.max(f64::MIN_POSITIVE))
}

/// Rigid gauge action of `(a, A)` on a pair, pointwise.
pub fn gauge_pair(p: &Pair, a: Quaternion, big_a: &QMatrix) -> Pair {
    let samples: Vec<HPerp> = p
        .s
        .samples
        .iter()
        .zip(&p.v.samples)
        .map(|(s, v)| equivalence_action_unchecked(a, big_a, &HPerp { s: *s, v: v.clone() }))
        .collect();
    let grid = p.grid();
    Pair {
        s: Field { grid, samples: samples.iter().map(|x| x.s).collect() },
        v: Field { grid, samples: samples.into_iter().map(|x| x.v).collect() },
    }
}

/// Random band-limited pair: Fourier modes `1..=kmax` with amplitude decaying as `k^{-2}`.
pub fn random_band_limited<R: Rng>(grid: PeriodicGrid, n: usize, kmax: usize, amp: f64, rng: &mut R) -> Pair {
    let nv = n - 1;
    let mut p = Pair::zero(grid, n);
    let w = 2.0 * std::f64::consts::PI / grid.length;
    let draw = |rng: &mut R| -> f64 { StandardNormal.sample(rng) };
    for k in 1..=kmax {
        let a = amp / (k * k) as f64;
        let cs: Vec<f64> = (0..3 + 4 * nv).map(|_| draw(rng) * a).collect();
        let sn: Vec<f64> = (0..3 + 4 * nv).map(|_| draw(rng) * a).collect();
        for (i, x) in grid.points().into_iter().enumerate() {
            let (c, s) = ((k as f64 * w * x).cos(), (k as f64 * w * x).sin());
            let comb = |j: usize| cs[j] * c + sn[j] * s;
            p.s.samples[i] += Quaternion::new(0.0, comb(0), comb(1), comb(2));
            for l in 0..nv {
                let b = 3 + 4 * l;
                p.v.samples[i].entries[l] += Quaternion::new(comb(b), comb(b + 1), comb(b + 2), comb(b + 3));
            }
        }
    }
    p
}

/// Random pair localized under a Gaussian envelope, negligible at the grid ends.
pub fn random_localized<R: Rng>(grid: PeriodicGrid, n: usize, center: f64, width: f64, amp: f64, rng: &mut R) -> Pair {
    let nv = n - 1;
    let mut p = Pair::zero(grid, n);
    let draw = |rng: &mut R| -> f64 { StandardNormal.sample(rng) };
    for k in 0..4 {
        let cs: Vec<f64> = (0..3 + 4 * nv).map(|_| draw(rng) * amp).collect();
        let sn: Vec<f64> = (0..3 + 4 * nv).map(|_| draw(rng) * amp).collect();
        for (i, x) in grid.points().into_iter().enumerate() {
            let env = (-((x - center) / width).powi(2)).exp();
            let (c, s) = ((k as f64 * 0.7 * x).cos() * env, (k as f64 * 0.7 * x).sin() * env);
            let comb = |j: usize| cs[j] * c + sn[j] * s;
            p.s.samples[i] += Quaternion::new(0.0, comb(0), comb(1), comb(2));
            for l in 0..nv {
                let b = 3 + 4 * l;
                p.v.samples[i].entries[l] += Quaternion::new(comb(b), comb(b + 1), comb(b + 2), comb(b + 3));
            }
        }
    }
    p
}
