//! Periodic grids, grid-sampled fields and Fourier-collocation calculus.
//!
//! Spectral operators act on the real components of every sample. Two real
//! component arrays share one complex transform, since every multiplier used
//! here maps real data to real data.

use std::f64::consts::PI;
use std::io::{self, Read, Write};
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::quat_core::{ImaginaryQuaternion, QMatrix, Quaternion, QuaternionVector};

/// Errors raised by the grid layer.
#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid needs at least 8 points, got {0}")]
    TooFewPoints(usize),
    #[error("grid length must be positive and finite, got {0}")]
    BadLength(f64),
    #[error("field has {found} samples, grid has {expected}")]
    SampleCount { expected: usize, found: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("antiderivative of a field with nonzero mean {mean:e} (component {component})")]
    Nonlocality { mean: f64, component: usize },
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Uniform periodic grid on `[0, L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrid {
    pub num_points: usize,
    pub length: f64,
}

impl PeriodicGrid {
    pub fn new(num_points: usize, length: f64) -> Result<Self, GridError> {
        if num_points < 8 {
            return Err(GridError::TooFewPoints(num_points));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(GridError::BadLength(length));
        }
        Ok(Self { num_points, length })
    }

    pub fn dx(&self) -> f64 {
        self.length / self.num_points as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.num_points).map(|i| self.x(i)).collect()
    }

    /// Angular wavenumber of FFT bin `b`.
    pub fn wavenumber(&self, b: usize) -> f64 {
        let n = self.num_points;
        let k = if b <= n / 2 { b as f64 } else { b as f64 - n as f64 };
        2.0 * PI * k / self.length
    }
}

/// A grid sample that decomposes into a fixed number of real components.
pub trait Sample: Clone + Send + Sync {
    /// Tag written into binary snapshots.
    const KIND: u8;
    fn ncomp(&self) -> usize;
    fn write_components(&self, out: &mut [f64]);
    fn read_components(src: &[f64], like: &Self) -> Self;
    /// Sample of the same shape built from `ncomp` components.
    fn from_len(src: &[f64]) -> Self;
}

impl Sample for f64 {
    const KIND: u8 = 0;
    fn ncomp(&self) -> usize {
        1
    }
    fn write_components(&self, out: &mut [f64]) {
        out[0] = *self;
    }
    fn read_components(src: &[f64], _: &Self) -> Self {
        src[0]
    }
    fn from_len(src: &[f64]) -> Self {
        src[0]
    }
}

impl Sample for ImaginaryQuaternion {
    const KIND: u8 = 1;
    fn ncomp(&self) -> usize {
        3
    }
    fn write_components(&self, out: &mut [f64]) {
        out[..3].copy_from_slice(&[self.im_i, self.im_j, self.im_k]);
    }
    fn read_components(src: &[f64], _: &Self) -> Self {
        Self::from_len(src)
    }
    fn from_len(src: &[f64]) -> Self {
        ImaginaryQuaternion { im_i: src[0], im_j: src[1], im_k: src[2] }
    }
}

impl Sample for Quaternion {
    const KIND: u8 = 2;
    fn ncomp(&self) -> usize {
        4
    }
    fn write_components(&self, out: &mut [f64]) {
        out[..4].copy_from_slice(&self.to_array());
    }
    fn read_components(src: &[f64], _: &Self) -> Self {
        Self::from_len(src)
    }
    fn from_len(src: &[f64]) -> Self {
        Quaternion::new(src[0], src[1], src[2], src[3])
    }
}

impl Sample for QuaternionVector {
    const KIND: u8 = 3;
    fn ncomp(&self) -> usize {
        4 * self.len()
    }
    fn write_components(&self, out: &mut [f64]) {
        for (l, q) in self.entries.iter().enumerate() {
            out[4 * l..4 * l + 4].copy_from_slice(&q.to_array());
        }
    }
    fn read_components(src: &[f64], like: &Self) -> Self {
        Self::new((0..like.len()).map(|l| Quaternion::from_len(&src[4 * l..])).collect())
    }
    fn from_len(src: &[f64]) -> Self {
        Self::new(src.chunks_exact(4).map(Quaternion::from_len).collect())
    }
}

impl Sample for QMatrix {
    const KIND: u8 = 4;
    fn ncomp(&self) -> usize {
        4 * self.data.len()
    }
    fn write_components(&self, out: &mut [f64]) {
        for (l, q) in self.data.iter().enumerate() {
            out[4 * l..4 * l + 4].copy_from_slice(&q.to_array());
        }
    }
    fn read_components(src: &[f64], like: &Self) -> Self {
        let mut m = QMatrix::zeros(like.rows, like.cols);
        for (l, q) in m.data.iter_mut().enumerate() {
            *q = Quaternion::from_len(&src[4 * l..]);
        }
        m
    }
    /// Assumes a square matrix.
    fn from_len(src: &[f64]) -> Self {
        let side = ((src.len() / 4) as f64).sqrt().round() as usize;
        let mut m = QMatrix::zeros(side, side);
        for (l, q) in m.data.iter_mut().enumerate() {
            *q = Quaternion::from_len(&src[4 * l..]);
        }
        m
    }
}

/// Samples forming a real vector space.
pub trait Linear: Sample {
    fn add(&self, o: &Self) -> Self;
    fn scale(&self, a: f64) -> Self;
}

impl Linear for f64 {
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn scale(&self, a: f64) -> Self {
        self * a
    }
}

impl Linear for Quaternion {
    fn add(&self, o: &Self) -> Self {
        *self + *o
    }
    fn scale(&self, a: f64) -> Self {
        *self * a
    }
}

impl Linear for ImaginaryQuaternion {
    fn add(&self, o: &Self) -> Self {
        ImaginaryQuaternion { im_i: self.im_i + o.im_i, im_j: self.im_j + o.im_j, im_k: self.im_k + o.im_k }
    }
    fn scale(&self, a: f64) -> Self {
        ImaginaryQuaternion { im_i: self.im_i * a, im_j: self.im_j * a, im_k: self.im_k * a }
    }
}

impl Linear for QuaternionVector {
    fn add(&self, o: &Self) -> Self {
        QuaternionVector::add(self, o)
    }
    fn scale(&self, a: f64) -> Self {
        QuaternionVector::scale(self, a)
    }
}

impl Linear for QMatrix {
    fn add(&self, o: &Self) -> Self {
        QMatrix::add(self, o)
    }
    fn scale(&self, a: f64) -> Self {
        QMatrix::scale(self, a)
    }
}

/// Grid-sampled quantity with homogeneous sample kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    pub grid: PeriodicGrid,
    pub samples: Vec<T>,
}

impl<T> Field<T> {
    pub fn map<S>(&self, f: impl Fn(&T) -> S) -> Field<S> {
        Field { grid: self.grid, samples: self.samples.iter().map(f).collect() }
    }

    pub fn zip_map<S, R>(&self, o: &Field<S>, f: impl Fn(&T, &S) -> R) -> Field<R> {
        debug_assert_eq!(self.samples.len(), o.samples.len());
        Field { grid: self.grid, samples: self.samples.iter().zip(&o.samples).map(|(a, b)| f(a, b)).collect() }
    }
}

impl<T: Sample> Field<T> {
    pub fn new(grid: PeriodicGrid, samples: Vec<T>) -> Result<Self, GridError> {
        if samples.len() != grid.num_points {
            return Err(GridError::SampleCount { expected: grid.num_points, found: samples.len() });
        }
        Ok(Self { grid, samples })
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(f64) -> T) -> Self {
        Self { grid, samples: grid.points().into_iter().map(f).collect() }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn ncomp(&self) -> usize {
        self.samples.first().map_or(0, Sample::ncomp)
    }

    /// Component-major copy: `out[c][i]` is component `c` at point `i`.
    pub fn components(&self) -> Vec<Vec<f64>> {
        let nc = self.ncomp();
        let n = self.len();
        let mut out = vec![vec![0.0; n]; nc];
        let mut buf = vec![0.0; nc];
        for (i, s) in self.samples.iter().enumerate() {
            s.write_components(&mut buf);
            for c in 0..nc {
                out[c][i] = buf[c];
            }
        }
        out
    }

    /// Rebuilds a field shaped like `self` from component-major data on `grid`.
    pub fn with_components(&self, grid: PeriodicGrid, comps: &[Vec<f64>]) -> Self {
        let like = &self.samples[0];
        let nc = comps.len();
        let mut buf = vec![0.0; nc];
        let samples = (0..grid.num_points)
            .map(|i| {
                for c in 0..nc {
                    buf[c] = comps[c][i];
                }
                T::read_components(&buf, like)
            })
            .collect();
        Self { grid, samples }
    }

    pub fn max_abs(&self) -> f64 {
        self.components().iter().flatten().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    pub fn check_same_grid<S>(&self, o: &Field<S>) -> Result<(), GridError> {
        if self.grid == o.grid {
            Ok(())
        } else {
            Err(GridError::GridMismatch)
        }
    }
}

impl<T: Linear> Field<T> {
    pub fn add(&self, o: &Self) -> Self {
        self.zip_map(o, |a, b| a.add(b))
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.zip_map(o, |a, b| a.add(&b.scale(-1.0)))
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|s| s.scale(a))
    }

    /// `sum c_i f_i` over a nonempty list.
    pub fn lin_comb(terms: &[(f64, &Self)]) -> Self {
        let (c0, f0) = terms[0];
        let mut out = f0.scale(c0);
        for (c, f) in &terms[1..] {
            for (o, s) in out.samples.iter_mut().zip(&f.samples) {
                *o = o.add(&s.scale(*c));
            }
        }
        out
    }
}

/// Real-valued field helpers.
impl Field<f64> {
    pub fn integrate(&self) -> f64 {
        self.grid.dx() * self.samples.iter().sum::<f64>()
    }
}

impl Field<Quaternion> {
    pub fn integrate(&self) -> Quaternion {
        self.samples.iter().fold(Quaternion::ZERO, |a, &q| a + q) * self.grid.dx()
    }
}

/// Treatment of the constant mode in an antiderivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanPolicy {
    /// Reject inputs whose mean exceeds `tol` times the input magnitude.
    Strict { tol: f64 },
    /// Drop the mean silently; only for operator algebra on random data.
    Project,
}

impl Default for MeanPolicy {
    fn default() -> Self {
        MeanPolicy::Strict { tol: 1e-8 }
    }
}

/// Means below this magnitude are roundoff and always accepted, so that
/// integrands which vanish identically do not trip the relative check.
pub const MEAN_ABS_FLOOR: f64 = 1e-13;

/// Integration constant of an antiderivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Anchor {
    /// Zero grid mean.
    #[default]
    ZeroMean,
    /// Vanishes at the first grid point, the periodic stand-in for decay at the left end.
    Left,
}

/// Fourier-collocation calculus on one grid.
pub struct Spectral {
    pub grid: PeriodicGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    planner: Mutex<FftPlanner<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: PeriodicGrid) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.num_points);
        let inv = planner.plan_fft_inverse(grid.num_points);
        Self { grid, fwd, inv, planner: Mutex::new(planner) }
    }

    /// `(ik)^order` with the Nyquist bin removed for odd orders.
    fn deriv_multiplier(&self, order: u32) -> Vec<Complex64> {
        let n = self.grid.num_points;
        (0..n)
            .map(|b| {
                if order % 2 == 1 && n.is_multiple_of(2) && b == n / 2 {
                    return Complex64::new(0.0, 0.0);
                }
                Complex64::new(0.0, self.grid.wavenumber(b)).powu(order)
            })
            .collect()
    }

    /// Applies a real-preserving Fourier multiplier to each real array.
    pub fn apply_multiplier(&self, data: &[&[f64]], mult: &[Complex64]) -> Vec<Vec<f64>> {
        let n = self.grid.num_points;
        let scale = 1.0 / n as f64;
        let mut out = Vec::with_capacity(data.len());
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for pair in data.chunks(2) {
            for i in 0..n {
                let im = if pair.len() > 1 { pair[1][i] } else { 0.0 };
                buf[i] = Complex64::new(pair[0][i], im);
            }
            self.fwd.process(&mut buf);
            for (z, m) in buf.iter_mut().zip(mult) {
                *z *= m * scale;
            }
            self.inv.process(&mut buf);
            out.push(buf.iter().map(|z| z.re).collect());
            if pair.len() > 1 {
                out.push(buf.iter().map(|z| z.im).collect());
            }
        }
        out
    }

    /// Several derivatives of each real array from one forward transform.
    pub fn derivs_real(&self, data: &[&[f64]], orders: &[u32]) -> Vec<Vec<Vec<f64>>> {
        let n = self.grid.num_points;
        let scale = 1.0 / n as f64;
        let mults: Vec<_> = orders.iter().map(|&o| self.deriv_multiplier(o)).collect();
        let mut out = vec![Vec::with_capacity(data.len()); orders.len()];
        let mut spec = vec![Complex64::new(0.0, 0.0); n];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for pair in data.chunks(2) {
            for i in 0..n {
                let im = if pair.len() > 1 { pair[1][i] } else { 0.0 };
                spec[i] = Complex64::new(pair[0][i], im) * scale;
            }
            self.fwd.process(&mut spec);
            for (o, mult) in mults.iter().enumerate() {
                for i in 0..n {
                    buf[i] = spec[i] * mult[i];
                }
                self.inv.process(&mut buf);
                out[o].push(buf.iter().map(|z| z.re).collect());
                if pair.len() > 1 {
                    out[o].push(buf.iter().map(|z| z.im).collect());
                }
            }
        }
        out
    }

    pub fn deriv_real(&self, f: &[f64], order: u32) -> Vec<f64> {
        self.apply_multiplier(&[f], &self.deriv_multiplier(order)).pop().unwrap_or_default()
    }

    /// Spectral derivative of order `order`, componentwise.
    pub fn deriv<T: Sample>(&self, f: &Field<T>, order: u32) -> Field<T> {
        self.derivs(f, &[order]).pop().expect("one order requested")
    }

    /// Several derivatives of one field sharing the forward transforms.
    pub fn derivs<T: Sample>(&self, f: &Field<T>, orders: &[u32]) -> Vec<Field<T>> {
        if f.ncomp() == 0 {
            return vec![f.clone(); orders.len()];
        }
        let comps = f.components();
        let refs: Vec<&[f64]> = comps.iter().map(Vec::as_slice).collect();
        self.derivs_real(&refs, orders).iter().map(|c| f.with_components(f.grid, c)).collect()
    }

    /// Periodic antiderivative of real arrays under the given mean policy and anchor.
    pub fn antideriv_real(&self, data: &[&[f64]], policy: MeanPolicy, anchor: Anchor) -> Result<Vec<Vec<f64>>, GridError> {
        let n = self.grid.num_points;
        if let MeanPolicy::Strict { tol } = policy {
            let scale = data.iter().flat_map(|c| c.iter()).fold(0.0, |m: f64, v| m.max(v.abs()));
            for (c, comp) in data.iter().enumerate() {
                let mean = comp.iter().sum::<f64>() / n as f64;
                if mean.abs() > tol * scale && mean.abs() > MEAN_ABS_FLOOR {
                    return Err(GridError::Nonlocality { mean, component: c });
                }
            }
        }
        let mult: Vec<Complex64> = (0..n)
            .map(|b| {
                if b == 0 || (n.is_multiple_of(2) && b == n / 2) {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, -1.0 / self.grid.wavenumber(b))
                }
            })
            .collect();
        let mut out = self.apply_multiplier(data, &mult);
        if anchor == Anchor::Left {
            for c in out.iter_mut() {
                let c0 = c[0];
                c.iter_mut().for_each(|v| *v -= c0);
            }
        }
        Ok(out)
    }

    /// `D_x^{-1}` with the default strict policy and zero-mean anchor.
    pub fn antideriv<T: Sample>(&self, f: &Field<T>, mean_tolerance: f64) -> Result<Field<T>, GridError> {
        self.antideriv_with(f, MeanPolicy::Strict { tol: mean_tolerance }, Anchor::ZeroMean)
    }

    pub fn antideriv_with<T: Sample>(&self, f: &Field<T>, policy: MeanPolicy, anchor: Anchor) -> Result<Field<T>, GridError> {
        if f.ncomp() == 0 {
            return Ok(f.clone());
        }
        let comps = f.components();
        let refs: Vec<&[f64]> = comps.iter().map(Vec::as_slice).collect();
        Ok(f.with_components(f.grid, &self.antideriv_real(&refs, policy, anchor)?))
    }

    /// Removes modes above two thirds of the Nyquist wavenumber.
    pub fn dealias<T: Sample>(&self, f: &Field<T>) -> Field<T> {
        let n = self.grid.num_points;
        let cut = n / 3;
        let mult: Vec<Complex64> = (0..n)
            .map(|b| {
                let k = if b <= n / 2 { b } else { n - b };
                Complex64::new(if k <= cut { 1.0 } else { 0.0 }, 0.0)
            })
            .collect();
        self.map_components(f, &mult)
    }

    /// Trigonometric interpolant evaluated at `x + s`.
    pub fn shift<T: Sample>(&self, f: &Field<T>, s: f64) -> Field<T> {
        let n = self.grid.num_points;
        let mult: Vec<Complex64> = (0..n)
            .map(|b| {
                if n.is_multiple_of(2) && b == n / 2 {
                    Complex64::new((self.grid.wavenumber(b) * s).cos(), 0.0)
                } else {
                    Complex64::from_polar(1.0, self.grid.wavenumber(b) * s)
                }
            })
            .collect();
        self.map_components(f, &mult)
    }

    fn map_components<T: Sample>(&self, f: &Field<T>, mult: &[Complex64]) -> Field<T> {
        if f.ncomp() == 0 {
            return f.clone();
        }
        let comps = f.components();
        let refs: Vec<&[f64]> = comps.iter().map(Vec::as_slice).collect();
        f.with_components(f.grid, &self.apply_multiplier(&refs, mult))
    }

    /// Trigonometric interpolant sampled on a grid `factor` times finer.
    pub fn refine<T: Sample>(&self, f: &Field<T>, factor: usize) -> Field<T> {
        let n = self.grid.num_points;
        let m = n * factor.max(1);
        let fine = PeriodicGrid { num_points: m, length: self.grid.length };
        if f.ncomp() == 0 || factor <= 1 {
            return Field { grid: fine, samples: vec![f.samples[0].clone(); m] };
        }
        let inv = self.planner.lock().expect("planner lock").plan_fft_inverse(m);
        let comps = f.components();
        let mut out = Vec::with_capacity(comps.len());
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut big = vec![Complex64::new(0.0, 0.0); m];
        for c in &comps {
            for i in 0..n {
                buf[i] = Complex64::new(c[i] / n as f64, 0.0);
            }
            self.fwd.process(&mut buf);
            big.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for b in 0..n {
                if n.is_multiple_of(2) && b == n / 2 {
                    big[b] += buf[b] * 0.5;
                    big[m - b] += buf[b] * 0.5;
                } else if b < n / 2 + 1 {
                    big[b] = buf[b];
                } else {
                    big[m - (n - b)] = buf[b];
                }
            }
            inv.process(&mut big);
            out.push(big.iter().map(|z| z.re).collect::<Vec<_>>());
        }
        f.with_components(fine, &out)
    }
}

/// Writes a field as CSV: `x`, then every real component.
pub fn write_csv<T: Sample, W: Write>(f: &Field<T>, header: &[String], mut w: W) -> io::Result<()> {
    let nc = f.ncomp();
    let mut cols = vec!["x".to_string()];
    for c in 0..nc {
        cols.push(header.get(c).cloned().unwrap_or_else(|| format!("c{c}")));
    }
    writeln!(w, "{}", cols.join(","))?;
    let mut buf = vec![0.0; nc];
    for (i, s) in f.samples.iter().enumerate() {
        s.write_components(&mut buf);
        write!(w, "{:.17e}", f.grid.x(i))?;
        for v in &buf {
            write!(w, ",{v:.17e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

const SNAPSHOT_MAGIC: &[u8; 4] = b"HPNF";

/// Binary snapshot: magic, `n`, `N`, `L`, kind, component count, then row-major
/// little-endian doubles.
pub fn write_snapshot<T: Sample, W: Write>(f: &Field<T>, n: usize, mut w: W) -> io::Result<()> {
    let nc = f.ncomp();
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&(n as u64).to_le_bytes())?;
    w.write_all(&(f.grid.num_points as u64).to_le_bytes())?;
    w.write_all(&f.grid.length.to_le_bytes())?;
    w.write_all(&[T::KIND])?;
    w.write_all(&(nc as u64).to_le_bytes())?;
    let mut buf = vec![0.0; nc];
    for s in &f.samples {
        s.write_components(&mut buf);
        for v in &buf {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a snapshot written by [`write_snapshot`]; returns the rank `n` and the field.
pub fn read_snapshot<T: Sample, R: Read>(mut r: R) -> Result<(usize, Field<T>), GridError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(GridError::Snapshot("bad magic".into()));
    }
    let mut u64buf = [0u8; 8];
    let mut read_u64 = |r: &mut R| -> io::Result<u64> {
        r.read_exact(&mut u64buf)?;
        Ok(u64::from_le_bytes(u64buf))
    };
    let n = read_u64(&mut r)? as usize;
    let npts = read_u64(&mut r)? as usize;
    let mut f8 = [0u8; 8];
    r.read_exact(&mut f8)?;
    let length = f64::from_le_bytes(f8);
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind)?;
    if kind[0] != T::KIND {
        return Err(GridError::Snapshot(format!("kind {} does not match {}", kind[0], T::KIND)));
    }
    let nc = read_u64(&mut r)? as usize;
    let grid = PeriodicGrid::new(npts, length)?;
    let mut samples = Vec::with_capacity(npts);
    let mut buf = vec![0.0; nc];
    for _ in 0..npts {
        for v in buf.iter_mut() {
            r.read_exact(&mut f8)?;
            *v = f64::from_le_bytes(f8);
        }
        samples.push(T::from_len(&buf));
    }
    Ok((n, Field::new(grid, samples)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(n, 2.0 * PI).unwrap()
    }

    #[test]
    fn rejects_small_grids() {
        assert!(matches!(PeriodicGrid::new(4, 1.0), Err(GridError::TooFewPoints(4))));
        assert!(PeriodicGrid::new(16, -1.0).is_err());
    }

    #[test]
    fn derivative_of_sine() {
        let g = PeriodicGrid::new(64, 3.0).unwrap();
        let w = 2.0 * PI / 3.0;
        let f = Field::from_fn(g, |x| (w * x).sin());
        let d = Spectral::new(g).deriv(&f, 1);
        for (i, v) in d.samples.iter().enumerate() {
            assert!((v - w * (w * g.x(i)).cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_has_zero_derivative() {
        let g = grid(16);
        let f = Field::from_fn(g, |_| Quaternion::new(1.0, 2.0, 3.0, 4.0));
        assert!(Spectral::new(g).deriv(&f, 1).max_abs() < 1e-14);
    }

    #[test]
    fn nonzero_mean_rejected() {
        let g = grid(16);
        let f = Field::from_fn(g, |_| 1.0);
        let err = Spectral::new(g).antideriv(&f, 1e-8).unwrap_err();
        assert!(matches!(err, GridError::Nonlocality { mean, .. } if (mean - 1.0).abs() < 1e-14));
    }

    #[test]
    fn antiderivative_of_cosine() {
        let g = grid(32);
        let f = Field::from_fn(g, |x| x.cos());
        let a = Spectral::new(g).antideriv(&f, 1e-8).unwrap();
        for (i, v) in a.samples.iter().enumerate() {
            assert!((v - g.x(i).sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn left_anchor_vanishes_at_origin() {
        let g = grid(32);
        let f = Field::from_fn(g, |x| x.sin());
        let a = Spectral::new(g).antideriv_with(&f, MeanPolicy::default(), Anchor::Left).unwrap();
        assert_eq!(a.samples[0], 0.0);
        assert!((a.samples[16] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature() {
        let g = PeriodicGrid::new(32, 5.0).unwrap();
        let w = 2.0 * PI / 5.0;
        assert!(Field::from_fn(g, |x| (w * x).sin()).integrate().abs() < 1e-12);
        assert!((Field::from_fn(g, |_| 1.0).integrate() - 5.0).abs() < 1e-12);
        assert!((Field::from_fn(g, |x| (w * x).sin().powi(2)).integrate() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn shift_and_refine_are_exact_on_trig_polynomials() {
        let g = grid(16);
        let sp = Spectral::new(g);
        let f = Field::from_fn(g, |x| (3.0 * x).cos() + (2.0 * x).sin());
        let s = sp.shift(&f, 0.3);
        for (i, v) in s.samples.iter().enumerate() {
            let x = g.x(i) + 0.3;
            assert!((v - (3.0 * x).cos() - (2.0 * x).sin()).abs() < 1e-13);
        }
        let r = sp.refine(&f, 4);
        for (i, v) in r.samples.iter().enumerate() {
            let x = r.grid.x(i);
            assert!((v - (3.0 * x).cos() - (2.0 * x).sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let g = grid(8);
        let f = Field::from_fn(g, |x| QuaternionVector::new(vec![Quaternion::new(x, 1.0, -x, 0.5); 2]));
        let mut bytes = Vec::new();
        write_snapshot(&f, 3, &mut bytes).unwrap();
        let (n, back) = read_snapshot::<QuaternionVector, _>(bytes.as_slice()).unwrap();
        assert_eq!(n, 3);
        assert_eq!(back, f);
    }
}
