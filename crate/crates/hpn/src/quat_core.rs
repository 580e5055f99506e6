//! Quaternion scalars, vectors and small matrices.
//!
//! Vectors are rows; the Hermitian inner product is `<x,y> = sum x_l conj(y_l)`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use thiserror::Error;

/// Errors raised by the quaternion kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuatError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("argument is not an imaginary quaternion (real part {re:e})")]
    NotImaginary { re: f64 },
}

/// Tolerance used when deciding whether a quaternion is imaginary.
pub const IMAGINARY_TOL: f64 = 1e-12;

/// A quaternion `re + i*i + j*j + k*k`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quaternion {
    pub re: f64,
    pub i: f64,
    pub j: f64,
    pub k: f64,
}

impl Quaternion {
    pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    #[inline]
    pub const fn new(re: f64, i: f64, j: f64, k: f64) -> Self {
        Self { re, i, j, k }
    }

    #[inline]
    pub const fn real(re: f64) -> Self {
        Self::new(re, 0.0, 0.0, 0.0)
    }

    #[inline]
    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    #[inline]
    pub fn to_array(self) -> [f64; 4] {
        [self.re, self.i, self.j, self.k]
    }

    #[inline]
    pub fn conj(self) -> Self {
        Self::new(self.re, -self.i, -self.j, -self.k)
    }

    #[inline]
    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.i * self.i + self.j * self.j + self.k * self.k
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Imaginary part as a quaternion with zero real part.
    #[inline]
    pub fn imag(self) -> Self {
        Self::new(0.0, self.i, self.j, self.k)
    }

    /// Multiplicative inverse; returns `None` for zero.
    pub fn inverse(self) -> Option<Self> {
        let n = self.norm_sqr();
        if n == 0.0 {
            None
        } else {
            Some(self.conj() * (1.0 / n))
        }
    }

    pub fn is_imaginary(self, tol: f64) -> bool {
        self.re.abs() <= tol * (1.0 + self.norm())
    }

    /// Largest absolute component.
    #[inline]
    pub fn max_abs(self) -> f64 {
        self.re.abs().max(self.i.abs()).max(self.j.abs()).max(self.k.abs())
    }
}

impl Add for Quaternion {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.i + o.i, self.j + o.j, self.k + o.k)
    }
}

impl Sub for Quaternion {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.i - o.i, self.j - o.j, self.k - o.k)
    }
}

impl Neg for Quaternion {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.re, -self.i, -self.j, -self.k)
    }
}

impl AddAssign for Quaternion {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl SubAssign for Quaternion {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl Mul for Quaternion {
    type Output = Self;
    #[inline]
    fn mul(self, b: Self) -> Self {
        let a = self;
        Self::new(
            a.re * b.re - a.i * b.i - a.j * b.j - a.k * b.k,
            a.re * b.i + a.i * b.re + a.j * b.k - a.k * b.j,
            a.re * b.j - a.i * b.k + a.j * b.re + a.k * b.i,
            a.re * b.k + a.i * b.j - a.j * b.i + a.k * b.re,
        )
    }
}

impl Mul<f64> for Quaternion {
    type Output = Self;
    #[inline]
    fn mul(self, s: f64) -> Self {
        Self::new(self.re * s, self.i * s, self.j * s, self.k * s)
    }
}

impl Mul<Quaternion> for f64 {
    type Output = Quaternion;
    #[inline]
    fn mul(self, q: Quaternion) -> Quaternion {
        q * self
    }
}

impl fmt::Display for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e} + {:e}i + {:e}j + {:e}k", self.re, self.i, self.j, self.k)
    }
}

/// Hamilton product.
#[inline]
pub fn qmul(a: Quaternion, b: Quaternion) -> Quaternion {
    a * b
}

/// An element of `Q = Im H`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ImaginaryQuaternion {
    pub im_i: f64,
    pub im_j: f64,
    pub im_k: f64,
}

impl ImaginaryQuaternion {
    pub const fn new(im_i: f64, im_j: f64, im_k: f64) -> Self {
        Self { im_i, im_j, im_k }
    }

    #[inline]
    pub fn to_quat(self) -> Quaternion {
        Quaternion::new(0.0, self.im_i, self.im_j, self.im_k)
    }

    /// Drops the real part of `q`.
    #[inline]
    pub fn from_quat_imag(q: Quaternion) -> Self {
        Self::new(q.i, q.j, q.k)
    }

    /// Accepts `q` only if its real part vanishes to [`IMAGINARY_TOL`].
    pub fn try_from_quat(q: Quaternion) -> Result<Self, QuatError> {
        if q.is_imaginary(IMAGINARY_TOL) {
            Ok(Self::from_quat_imag(q))
        } else {
            Err(QuatError::NotImaginary { re: q.re })
        }
    }

    pub fn norm_sqr(self) -> f64 {
        self.to_quat().norm_sqr()
    }
}

impl From<ImaginaryQuaternion> for Quaternion {
    fn from(q: ImaginaryQuaternion) -> Self {
        q.to_quat()
    }
}

/// A row vector in `H^m`; `m = 0` is allowed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuaternionVector {
    pub entries: Vec<Quaternion>,
}

impl QuaternionVector {
    pub fn new(entries: Vec<Quaternion>) -> Self {
        Self { entries }
    }

    pub fn zeros(m: usize) -> Self {
        Self { entries: vec![Quaternion::ZERO; m] }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|q| q.norm_sqr()).sum()
    }

    pub fn conj(&self) -> Self {
        Self::new(self.entries.iter().map(|q| q.conj()).collect())
    }

    /// `s * v` with the scalar multiplying each entry from the left.
    pub fn left_mul(&self, s: Quaternion) -> Self {
        Self::new(self.entries.iter().map(|&q| s * q).collect())
    }

    /// `v * s` with the scalar multiplying each entry from the right.
    pub fn right_mul(&self, s: Quaternion) -> Self {
        Self::new(self.entries.iter().map(|&q| q * s).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.entries.iter().map(|&q| q * s).collect())
    }

    pub fn add(&self, o: &Self) -> Self {
        debug_assert_eq!(self.len(), o.len());
        Self::new(self.entries.iter().zip(&o.entries).map(|(&a, &b)| a + b).collect())
    }

    pub fn sub(&self, o: &Self) -> Self {
        debug_assert_eq!(self.len(), o.len());
        Self::new(self.entries.iter().zip(&o.entries).map(|(&a, &b)| a - b).collect())
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &Self) {
        debug_assert_eq!(self.len(), x.len());
        for (s, &v) in self.entries.iter_mut().zip(&x.entries) {
            *s += v * a;
        }
    }

    /// Row vector times matrix.
    pub fn mul_mat(&self, m: &QMatrix) -> Self {
        debug_assert_eq!(self.len(), m.rows);
        let mut out = Self::zeros(m.cols);
        for (r, &a) in self.entries.iter().enumerate() {
            for c in 0..m.cols {
                out.entries[c] += a * m.get(r, c);
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, q| m.max(q.max_abs()))
    }
}

fn check_len(a: &QuaternionVector, b: &QuaternionVector) -> Result<(), QuatError> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(QuatError::Dimension { expected: a.len(), found: b.len() })
    }
}

/// `<x,y> = sum x_l conj(y_l)`.
pub fn hermitian_inner(x: &QuaternionVector, y: &QuaternionVector) -> Result<Quaternion, QuatError> {
    check_len(x, y)?;
    Ok(inner_unchecked(x, y))
}

#[inline]
pub(crate) fn inner_unchecked(x: &QuaternionVector, y: &QuaternionVector) -> Quaternion {
    x.entries.iter().zip(&y.entries).fold(Quaternion::ZERO, |acc, (&a, &b)| acc + a * b.conj())
}

/// `C(a,b) = ab - ba` for scalars.
#[inline]
pub fn comm_c(a: Quaternion, b: Quaternion) -> Quaternion {
    a * b - b * a
}

/// `C(a,b) = <a,b> - <b,a>` for vectors.
pub fn comm_c_vec(a: &QuaternionVector, b: &QuaternionVector) -> Result<Quaternion, QuatError> {
    check_len(a, b)?;
    Ok(comm_c_vec_unchecked(a, b))
}

#[inline]
pub(crate) fn comm_c_vec_unchecked(a: &QuaternionVector, b: &QuaternionVector) -> Quaternion {
    let ab = inner_unchecked(a, b);
    ab - ab.conj()
}

/// `A(a,b) = ab + ba` for imaginary scalars; the result is real.
pub fn acomm_a(a: Quaternion, b: Quaternion) -> Result<f64, QuatError> {
    for q in [a, b] {
        if !q.is_imaginary(IMAGINARY_TOL) {
            return Err(QuatError::NotImaginary { re: q.re });
        }
    }
    Ok(acomm_a_unchecked(a, b))
}

/// `A(a,b)` evaluated on the imaginary parts of `a` and `b`, i.e. `2 Re(ab)`.
#[inline]
pub(crate) fn acomm_a_unchecked(a: Quaternion, b: Quaternion) -> f64 {
    -2.0 * (a.i * b.i + a.j * b.j + a.k * b.k)
}

/// `A(a,b) = <a,b> + <b,a> = 2 Re<a,b>` for vectors.
pub fn acomm_a_vec(a: &QuaternionVector, b: &QuaternionVector) -> Result<f64, QuatError> {
    check_len(a, b)?;
    Ok(acomm_a_vec_unchecked(a, b))
}

#[inline]
pub(crate) fn acomm_a_vec_unchecked(a: &QuaternionVector, b: &QuaternionVector) -> f64 {
    2.0 * inner_unchecked(a, b).re
}

/// `C(a,b) = conj(a)^t b - conj(b)^t a`, an anti-Hermitian `m x m` matrix.
pub fn matcomm_c(a: &QuaternionVector, b: &QuaternionVector) -> Result<QMatrix, QuatError> {
    check_len(a, b)?;
    Ok(matcomm_c_unchecked(a, b))
}

pub(crate) fn matcomm_c_unchecked(a: &QuaternionVector, b: &QuaternionVector) -> QMatrix {
    let m = a.len();
    let mut out = QMatrix::zeros(m, m);
    for l in 0..m {
        for c in 0..m {
            let v = a.entries[l].conj() * b.entries[c] - b.entries[l].conj() * a.entries[c];
            out.set(l, c, v);
        }
    }
    out
}

/// Dense quaternion matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Quaternion>,
}

impl QMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Quaternion::ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for d in 0..n {
            m.set(d, d, Quaternion::ONE);
        }
        m
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Quaternion {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Quaternion) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn add_at(&mut self, r: usize, c: usize, v: Quaternion) {
        self.data[r * self.cols + c] += v;
    }

    pub fn conj_transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c).conj());
            }
        }
        out
    }

    pub fn matmul(&self, o: &Self) -> Self {
        debug_assert_eq!(self.cols, o.rows);
        let mut out = Self::zeros(self.rows, o.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == Quaternion::ZERO {
                    continue;
                }
                for c in 0..o.cols {
                    out.add_at(r, c, a * o.get(k, c));
                }
            }
        }
        out
    }

    /// `self * v` for a column vector given by its entries.
    pub fn mul_col(&self, v: &[Quaternion]) -> Vec<Quaternion> {
        debug_assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| (0..self.cols).fold(Quaternion::ZERO, |acc, c| acc + self.get(r, c) * v[c]))
            .collect()
    }

    /// Matrix commutator `self*o - o*self`.
    pub fn commutator(&self, o: &Self) -> Self {
        self.matmul(o).sub(&o.matmul(self))
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&o.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&o.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&a| a * s).collect() }
    }

    /// `s * M` with the scalar multiplying from the left.
    pub fn left_mul(&self, s: Quaternion) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&a| s * a).collect() }
    }

    /// `M * s` with the scalar multiplying from the right.
    pub fn right_mul(&self, s: Quaternion) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&a| a * s).collect() }
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &Self) {
        for (s, &v) in self.data.iter_mut().zip(&x.data) {
            *s += v * a;
        }
    }

    /// Real part of the trace.
    pub fn re_trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|d| self.get(d, d).re).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, q| m.max(q.max_abs()))
    }

    /// Largest entry of `M + conj(M)^t`.
    pub fn anti_hermitian_defect(&self) -> f64 {
        self.add(&self.conj_transpose()).max_abs()
    }

    /// Largest entry of `M conj(M)^t - I`.
    pub fn unitarity_defect(&self) -> f64 {
        self.matmul(&self.conj_transpose()).sub(&Self::identity(self.rows)).max_abs()
    }
}
