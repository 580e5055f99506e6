//! The symmetric Lie algebra `u(n+1,H) = h + m` with the refined split
//! `m = m_par + m_perp`, `h = h_par + h_perp` relative to the Cartan element `e`.
//!
//! Matrices are `(n+1) x (n+1)` quaternion matrices indexed `0, 1, 2..n`.
//! The packings are
//!
//! ```text
//! m_par  (m)     : [0,1] = m, [1,0] = -m
//! m_perp (s, v)  : [0,1] = [1,0] = s, [0,2..] = v, [2..,0] = -conj(v)
//! h_par  (p, M)  : [0,0] = [1,1] = p, [2..,2..] = M
//! h_perp (s, v)  : [0,0] = s, [1,1] = -s, [1,2..] = v, [2..,1] = -conj(v)
//! ```

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::quat_core::{
    acomm_a_unchecked, acomm_a_vec_unchecked, comm_c, comm_c_vec_unchecked, inner_unchecked,
    matcomm_c_unchecked, QMatrix, Quaternion, QuaternionVector,
};

/// Errors raised by the Lie-algebra layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LieError {
    #[error("dimension mismatch: expected n = {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("no closed-form bracket for [{left}, {right}] projected to {target}")]
    Subspace { left: &'static str, right: &'static str, target: &'static str },
    #[error("matrix is not anti-Hermitian (defect {defect:e})")]
    NotAntiHermitian { defect: f64 },
    #[error("quaternion is not a unit (|a| = {norm})")]
    NotUnit { norm: f64 },
    #[error("matrix is not unitary (defect {defect:e})")]
    NotUnitary { defect: f64 },
    #[error("n must be at least 1")]
    RankTooSmall,
}

/// Tolerance for the unit/unitary/anti-Hermitian domain checks.
pub const DOMAIN_TOL: f64 = 1e-10;

/// Killing normalization `chi = 8(n+2)`.
#[inline]
pub fn chi(n: usize) -> f64 {
    8.0 * (n as f64 + 2.0)
}

/// The Cartan subspace coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MPar {
    pub m_par: f64,
}

/// An element of `m_perp = Q + H^{n-1}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MPerp {
    pub s: Quaternion,
    pub v: QuaternionVector,
}

/// An element of `h_par = Q + u(n-1,H)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HPar {
    pub p: Quaternion,
    pub m: QMatrix,
}

/// An element of `h_perp = Q + H^{n-1}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HPerp {
    pub s: Quaternion,
    pub v: QuaternionVector,
}

impl MPerp {
    pub fn zero(n: usize) -> Self {
        Self { s: Quaternion::ZERO, v: QuaternionVector::zeros(n - 1) }
    }
    fn n(&self) -> usize {
        self.v.len() + 1
    }
}

impl HPerp {
    pub fn zero(n: usize) -> Self {
        Self { s: Quaternion::ZERO, v: QuaternionVector::zeros(n - 1) }
    }
    fn n(&self) -> usize {
        self.v.len() + 1
    }
    /// Killing form restricted to `h_perp`: `chi Re(h1 h2 - <h1, h2>)`.
    pub fn killing(&self, o: &HPerp) -> f64 {
        chi(self.n()) * ((self.s * o.s).re - inner_unchecked(&self.v, &o.v).re)
    }
}

impl HPar {
    pub fn zero(n: usize) -> Self {
        Self { p: Quaternion::ZERO, m: QMatrix::zeros(n - 1, n - 1) }
    }
    fn n(&self) -> usize {
        self.m.rows + 1
    }
}

/// An element of `u(n+1,H)` stored in packed form.
#[derive(Debug, Clone, PartialEq)]
pub struct LieElement {
    pub n: usize,
    pub mpar: MPar,
    pub mperp: MPerp,
    pub hpar: HPar,
    pub hperp: HPerp,
}

impl LieElement {
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            mpar: MPar::default(),
            mperp: MPerp::zero(n),
            hpar: HPar::zero(n),
            hperp: HPerp::zero(n),
        }
    }

    pub fn from_mpar(n: usize, m: f64) -> Self {
        Self { mpar: MPar { m_par: m }, ..Self::zero(n) }
    }

    pub fn from_mperp(x: MPerp) -> Self {
        let n = x.n();
        Self { mperp: x, ..Self::zero(n) }
    }

    pub fn from_hpar(x: HPar) -> Self {
        let n = x.n();
        Self { hpar: x, ..Self::zero(n) }
    }

    pub fn from_hperp(x: HPerp) -> Self {
        let n = x.n();
        Self { hperp: x, ..Self::zero(n) }
    }

    /// The Cartan element `e`.
    pub fn cartan(n: usize) -> Self {
        Self::from_mpar(n, 1.0)
    }

    /// Full `(n+1) x (n+1)` matrix.
    pub fn to_matrix(&self) -> QMatrix {
        let n = self.n;
        let mut g = QMatrix::zeros(n + 1, n + 1);
        let mp = Quaternion::real(self.mpar.m_par);
        g.add_at(0, 1, mp + self.mperp.s);
        g.add_at(1, 0, -mp + self.mperp.s);
        g.add_at(0, 0, self.hpar.p + self.hperp.s);
        g.add_at(1, 1, self.hpar.p - self.hperp.s);
        for l in 0..n - 1 {
            let mv = self.mperp.v.entries[l];
            g.add_at(0, l + 2, mv);
            g.add_at(l + 2, 0, -mv.conj());
            let hv = self.hperp.v.entries[l];
            g.add_at(1, l + 2, hv);
            g.add_at(l + 2, 1, -hv.conj());
            for c in 0..n - 1 {
                g.add_at(l + 2, c + 2, self.hpar.m.get(l, c));
            }
        }
        g
    }

    /// Packs an anti-Hermitian matrix.
    pub fn from_matrix(g: &QMatrix) -> Result<Self, LieError> {
        if g.rows != g.cols || g.rows < 2 {
            return Err(LieError::Dimension { expected: g.rows.max(2), found: g.cols });
        }
        let defect = g.anti_hermitian_defect();
        if defect > DOMAIN_TOL * (1.0 + g.max_abs()) {
            return Err(LieError::NotAntiHermitian { defect });
        }
        Ok(Self::project_matrix(g))
    }

    /// Orthogonal projection of an arbitrary square matrix onto the packed subspaces.
    pub fn project_matrix(g: &QMatrix) -> Self {
        let n = g.rows - 1;
        let m01 = g.get(0, 1);
        let (g00, g11) = (g.get(0, 0), g.get(1, 1));
        let mut hm = QMatrix::zeros(n - 1, n - 1);
        for l in 0..n - 1 {
            for c in 0..n - 1 {
                hm.set(l, c, g.get(l + 2, c + 2));
            }
        }
        Self {
            n,
            mpar: MPar { m_par: m01.re },
            mperp: MPerp {
                s: m01.imag(),
                v: QuaternionVector::new((0..n - 1).map(|l| g.get(0, l + 2)).collect()),
            },
            hpar: HPar { p: ((g00 + g11) * 0.5).imag(), m: hm },
            hperp: HPerp {
                s: ((g00 - g11) * 0.5).imag(),
                v: QuaternionVector::new((0..n - 1).map(|l| g.get(1, l + 2)).collect()),
            },
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            n: self.n,
            mpar: MPar { m_par: self.mpar.m_par + o.mpar.m_par },
            mperp: MPerp { s: self.mperp.s + o.mperp.s, v: self.mperp.v.add(&o.mperp.v) },
            hpar: HPar { p: self.hpar.p + o.hpar.p, m: self.hpar.m.add(&o.hpar.m) },
            hperp: HPerp { s: self.hperp.s + o.hperp.s, v: self.hperp.v.add(&o.hperp.v) },
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            n: self.n,
            mpar: MPar { m_par: self.mpar.m_par * a },
            mperp: MPerp { s: self.mperp.s * a, v: self.mperp.v.scale(a) },
            hpar: HPar { p: self.hpar.p * a, m: self.hpar.m.scale(a) },
            hperp: HPerp { s: self.hperp.s * a, v: self.hperp.v.scale(a) },
        }
    }

    pub fn m_part(&self) -> Self {
        Self { hpar: HPar::zero(self.n), hperp: HPerp::zero(self.n), ..self.clone() }
    }

    pub fn h_part(&self) -> Self {
        Self { mpar: MPar::default(), mperp: MPerp::zero(self.n), ..self.clone() }
    }

    /// Largest absolute packed component.
    pub fn max_abs(&self) -> f64 {
        self.mpar
            .m_par
            .abs()
            .max(self.mperp.s.max_abs())
            .max(self.mperp.v.max_abs())
            .max(self.hpar.p.max_abs())
            .max(self.hpar.m.max_abs())
            .max(self.hperp.s.max_abs())
            .max(self.hperp.v.max_abs())
    }
}

fn check_n(a: &LieElement, b: &LieElement) -> Result<(), LieError> {
    if a.n == b.n {
        Ok(())
    } else {
        Err(LieError::Dimension { expected: a.n, found: b.n })
    }
}

/// Lie bracket computed as the matrix commutator.
pub fn bracket(g1: &LieElement, g2: &LieElement) -> Result<LieElement, LieError> {
    check_n(g1, g2)?;
    Ok(LieElement::project_matrix(&g1.to_matrix().commutator(&g2.to_matrix())))
}

/// Cartan-Killing form on `u(N,H)` for `N x N` matrices: `4(N+1) Re tr(g1 g2)`.
pub fn killing_matrix(g1: &QMatrix, g2: &QMatrix) -> f64 {
    4.0 * (g1.rows as f64 + 1.0) * g1.matmul(g2).re_trace()
}

/// Cartan-Killing form of `u(n+1,H)`.
pub fn killing(g1: &LieElement, g2: &LieElement) -> Result<f64, LieError> {
    check_n(g1, g2)?;
    Ok(killing_matrix(&g1.to_matrix(), &g2.to_matrix()))
}

/// Killing form on `m` written in components: `-chi Re(m1 conj(m2) + <m1, m2>)`.
pub fn killing_on_m(n: usize, m1: Quaternion, v1: &QuaternionVector, m2: Quaternion, v2: &QuaternionVector) -> f64 {
    -chi(n) * ((m1 * m2.conj()).re + inner_unchecked(v1, v2).re)
}

/// Tag for the four refined subspaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subspace {
    MPar,
    MPerp,
    HPar,
    HPerp,
}

impl Subspace {
    pub fn name(self) -> &'static str {
        match self {
            Subspace::MPar => "m_par",
            Subspace::MPerp => "m_perp",
            Subspace::HPar => "h_par",
            Subspace::HPerp => "h_perp",
        }
    }
}

/// A tagged element of one of the refined subspaces.
#[derive(Debug, Clone, PartialEq)]
pub enum SubspaceElement {
    MPar(MPar),
    MPerp(MPerp),
    HPar(HPar),
    HPerp(HPerp),
}

impl SubspaceElement {
    pub fn tag(&self) -> Subspace {
        match self {
            SubspaceElement::MPar(_) => Subspace::MPar,
            SubspaceElement::MPerp(_) => Subspace::MPerp,
            SubspaceElement::HPar(_) => Subspace::HPar,
            SubspaceElement::HPerp(_) => Subspace::HPerp,
        }
    }

    /// Embeds into the full algebra of rank `n`.
    pub fn to_lie(&self, n: usize) -> LieElement {
        match self {
            SubspaceElement::MPar(x) => LieElement::from_mpar(n, x.m_par),
            SubspaceElement::MPerp(x) => LieElement::from_mperp(x.clone()),
            SubspaceElement::HPar(x) => LieElement::from_hpar(x.clone()),
            SubspaceElement::HPerp(x) => LieElement::from_hperp(x.clone()),
        }
    }

    /// Component of `g` in the subspace `tag`.
    pub fn project(g: &LieElement, tag: Subspace) -> Self {
        match tag {
            Subspace::MPar => SubspaceElement::MPar(g.mpar),
            Subspace::MPerp => SubspaceElement::MPerp(g.mperp.clone()),
            Subspace::HPar => SubspaceElement::HPar(g.hpar.clone()),
            Subspace::HPerp => SubspaceElement::HPerp(g.hperp.clone()),
        }
    }

    fn zero(n: usize, tag: Subspace) -> Self {
        Self::project(&LieElement::zero(n), tag)
    }

    fn negate(self) -> Self {
        match self {
            SubspaceElement::MPar(x) => SubspaceElement::MPar(MPar { m_par: -x.m_par }),
            SubspaceElement::MPerp(x) => SubspaceElement::MPerp(MPerp { s: -x.s, v: x.v.scale(-1.0) }),
            SubspaceElement::HPar(x) => SubspaceElement::HPar(HPar { p: -x.p, m: x.m.scale(-1.0) }),
            SubspaceElement::HPerp(x) => SubspaceElement::HPerp(HPerp { s: -x.s, v: x.v.scale(-1.0) }),
        }
    }

    fn rank(&self) -> Option<usize> {
        match self {
            SubspaceElement::MPar(_) => None,
            SubspaceElement::MPerp(x) => Some(x.n()),
            SubspaceElement::HPar(x) => Some(x.n()),
            SubspaceElement::HPerp(x) => Some(x.n()),
        }
    }
}

/// Closed-form projection of `[a, b]` onto `target`.
///
/// Covers every pair of refined subspaces; pairs given in the opposite order
/// are handled by antisymmetry. Targets outside the symmetric-space inclusion
/// are rejected.
pub fn bracket_projected(
    n: usize,
    a: &SubspaceElement,
    b: &SubspaceElement,
    target: Subspace,
) -> Result<SubspaceElement, LieError> {
    for r in [a.rank(), b.rank()].into_iter().flatten() {
        if r != n {
            return Err(LieError::Dimension { expected: n, found: r });
        }
    }
    use SubspaceElement as S;
    let reject = || LieError::Subspace { left: a.tag().name(), right: b.tag().name(), target: target.name() };
    let out = match (a, b, target) {
        (S::MPar(_), S::MPar(_), Subspace::HPar) => S::zero(n, Subspace::HPar),
        (S::MPar(_), S::HPar(_), Subspace::MPar) => S::zero(n, Subspace::MPar),
        (S::HPar(x), S::HPar(y), Subspace::HPar) => {
            S::HPar(HPar { p: comm_c(x.p, y.p), m: x.m.commutator(&y.m) })
        }
        (S::MPar(x), S::MPerp(y), Subspace::HPerp) => {
            S::HPerp(HPerp { s: y.s * (2.0 * x.m_par), v: y.v.scale(-x.m_par) })
        }
        (S::MPar(x), S::HPerp(y), Subspace::MPerp) => {
            S::MPerp(MPerp { s: y.s * (-2.0 * x.m_par), v: y.v.scale(x.m_par) })
        }
        (S::HPar(x), S::MPerp(y), Subspace::MPerp) => {
            S::MPerp(MPerp { s: comm_c(x.p, y.s), v: y.v.left_mul(x.p).sub(&y.v.mul_mat(&x.m)) })
        }
        (S::HPar(x), S::HPerp(y), Subspace::HPerp) => {
            S::HPerp(HPerp { s: comm_c(x.p, y.s), v: y.v.left_mul(x.p).sub(&y.v.mul_mat(&x.m)) })
        }
        (S::MPerp(x), S::MPerp(y), Subspace::HPar) => S::HPar(HPar {
            p: comm_c(x.s, y.s) + comm_c_vec_unchecked(&y.v, &x.v) * 0.5,
            m: matcomm_c_unchecked(&y.v, &x.v),
        }),
        (S::MPerp(x), S::MPerp(y), Subspace::HPerp) => S::HPerp(HPerp {
            s: comm_c_vec_unchecked(&y.v, &x.v) * 0.5,
            v: y.v.left_mul(x.s).sub(&x.v.left_mul(y.s)),
        }),
        (S::HPerp(x), S::HPerp(y), Subspace::HPar) => S::HPar(HPar {
            p: comm_c(x.s, y.s) + comm_c_vec_unchecked(&y.v, &x.v) * 0.5,
            m: matcomm_c_unchecked(&y.v, &x.v),
        }),
        (S::HPerp(x), S::HPerp(y), Subspace::HPerp) => S::HPerp(HPerp {
            s: comm_c_vec_unchecked(&x.v, &y.v) * 0.5,
            v: x.v.left_mul(y.s).sub(&y.v.left_mul(x.s)),
        }),
        (S::MPerp(x), S::HPerp(y), Subspace::MPar) => S::MPar(MPar {
            m_par: -acomm_a_unchecked(x.s, y.s) - 0.5 * acomm_a_vec_unchecked(&x.v, &y.v),
        }),
        (S::MPerp(x), S::HPerp(y), Subspace::MPerp) => S::MPerp(MPerp {
            s: comm_c_vec_unchecked(&y.v, &x.v) * 0.5,
            v: y.v.left_mul(x.s).sub(&x.v.left_mul(y.s)),
        }),
        (S::MPerp(_), S::MPar(_), _)
        | (S::HPar(_), S::MPar(_), _)
        | (S::HPerp(_), S::MPar(_), _)
        | (S::MPerp(_), S::HPar(_), _)
        | (S::HPerp(_), S::HPar(_), _)
        | (S::HPerp(_), S::MPerp(_), _) => return bracket_projected(n, b, a, target).map(S::negate),
        _ => return Err(reject()),
    };
    Ok(out)
}

/// `ad(e)` on `h_perp`: `(h, hv) -> (-2h, hv)` in `m_perp`.
pub fn ad_e_hperp(x: &HPerp) -> MPerp {
    MPerp { s: x.s * -2.0, v: x.v.clone() }
}

/// `ad(e)` on `m_perp`: `(m, mv) -> (2m, -mv)` in `h_perp`.
pub fn ad_e_mperp(x: &MPerp) -> HPerp {
    HPerp { s: x.s * 2.0, v: x.v.scale(-1.0) }
}

/// Inverse of [`ad_e_hperp`].
pub fn ad_e_inv_mperp(x: &MPerp) -> HPerp {
    HPerp { s: x.s * -0.5, v: x.v.clone() }
}

/// Inverse of [`ad_e_mperp`].
pub fn ad_e_inv_hperp(x: &HPerp) -> MPerp {
    MPerp { s: x.s * 0.5, v: x.v.scale(-1.0) }
}

/// Rigid gauge action `(u, uv) -> (a u a^{-1}, a uv A)`.
pub fn equivalence_action(a: Quaternion, big_a: &QMatrix, x: &HPerp) -> Result<HPerp, LieError> {
    let norm = a.norm();
    if (norm - 1.0).abs() > DOMAIN_TOL {
        return Err(LieError::NotUnit { norm });
    }
    if big_a.rows != x.v.len() || big_a.cols != x.v.len() {
        return Err(LieError::Dimension { expected: x.v.len(), found: big_a.rows });
    }
    let defect = big_a.unitarity_defect();
    if defect > DOMAIN_TOL {
        return Err(LieError::NotUnitary { defect });
    }
    Ok(equivalence_action_unchecked(a, big_a, x))
}

#[inline]
pub(crate) fn equivalence_action_unchecked(a: Quaternion, big_a: &QMatrix, x: &HPerp) -> HPerp {
    HPerp { s: a * x.s * a.conj(), v: x.v.left_mul(a).mul_mat(big_a) }
}

/// Killing-orthogonal basis of `m`: `e`, then `(q, 0)` for `q = i, j, k`,
/// then `(0, e_l)` and `(0, q e_l)` for each `l`.
pub fn basis_m(n: usize) -> Result<Vec<LieElement>, LieError> {
    if n < 1 {
        return Err(LieError::RankTooSmall);
    }
    let units = [Quaternion::I, Quaternion::J, Quaternion::K];
    let mut out = vec![LieElement::cartan(n)];
    for q in units {
        out.push(LieElement::from_mperp(MPerp { s: q, v: QuaternionVector::zeros(n - 1) }));
    }
    for l in 0..n - 1 {
        for q in [Quaternion::ONE, units[0], units[1], units[2]] {
            let mut v = QuaternionVector::zeros(n - 1);
            v.entries[l] = q;
            out.push(LieElement::from_mperp(MPerp { s: Quaternion::ZERO, v }));
        }
    }
    Ok(out)
}

/// Complex `2N x 2N` image of a quaternion matrix `A + B j`, laid out as
/// `[[A, B], [-conj(B), conj(A)]]`.
pub fn to_complex(m: &QMatrix) -> DMatrix<Complex64> {
    let (r, c) = (m.rows, m.cols);
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for a in 0..r {
        for b in 0..c {
            let q = m.get(a, b);
            let za = Complex64::new(q.re, q.i);
            let zb = Complex64::new(q.j, q.k);
            out[(a, b)] = za;
            out[(a, b + c)] = zb;
            out[(a + r, b)] = -zb.conj();
            out[(a + r, b + c)] = za.conj();
        }
    }
    out
}

/// Inverse of [`to_complex`], reading the top block row.
pub fn from_complex(z: &DMatrix<Complex64>) -> QMatrix {
    let (r, c) = (z.nrows() / 2, z.ncols() / 2);
    let mut out = QMatrix::zeros(r, c);
    for a in 0..r {
        for b in 0..c {
            let za = z[(a, b)];
            let zb = z[(a, b + c)];
            out.set(a, b, Quaternion::new(za.re, za.im, zb.re, zb.im));
        }
    }
    out
}

/// Matrix exponential of a quaternion matrix via the complex embedding.
pub fn exp_matrix(m: &QMatrix) -> QMatrix {
    from_complex(&to_complex(m).exp())
}
