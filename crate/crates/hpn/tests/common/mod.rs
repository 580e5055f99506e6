//! Independent oracles shared by the integration tests. Nothing here calls the
//! library's arithmetic: products, commutators and traces are recomputed from
//! raw components.

#![allow(dead_code)]

use hpn::quat_core::{QMatrix, Quaternion, QuaternionVector};
use hpn::symm_lie::{HPar, HPerp, LieElement, MPar, MPerp};
use rand::Rng;
use rand_distr::StandardNormal;

/// Hamilton product written out from `i^2 = j^2 = k^2 = ijk = -1`.
pub fn hamilton(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    let [a0, a1, a2, a3] = a;
    let [b0, b1, b2, b3] = b;
    [
        a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
        a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
        a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
        a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
    ]
}

pub fn arr(q: Quaternion) -> [f64; 4] {
    [q.re, q.i, q.j, q.k]
}

pub fn quat(a: [f64; 4]) -> Quaternion {
    Quaternion::new(a[0], a[1], a[2], a[3])
}

pub fn conj(a: [f64; 4]) -> [f64; 4] {
    [a[0], -a[1], -a[2], -a[3]]
}

pub fn add(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

pub fn sub(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

pub fn max_abs4(a: [f64; 4]) -> f64 {
    a.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

/// Square quaternion matrix as nested component arrays.
pub type Mat = Vec<Vec<[f64; 4]>>;

pub fn to_mat(m: &QMatrix) -> Mat {
    (0..m.rows).map(|r| (0..m.cols).map(|c| arr(m.get(r, c))).collect()).collect()
}

pub fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let mut out = vec![vec![[0.0; 4]; n]; n];
    for r in 0..n {
        for c in 0..n {
            for k in 0..n {
                out[r][c] = add(out[r][c], hamilton(a[r][k], b[k][c]));
            }
        }
    }
    out
}

pub fn mat_sub(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| sub(*p, *q)).collect()).collect()
}

pub fn mat_comm(a: &Mat, b: &Mat) -> Mat {
    mat_sub(&mat_mul(a, b), &mat_mul(b, a))
}

pub fn re_trace(a: &Mat) -> f64 {
    (0..a.len()).map(|i| a[i][i][0]).sum()
}

pub fn mat_max_abs(a: &Mat) -> f64 {
    a.iter().flatten().fold(0.0, |m: f64, q| m.max(max_abs4(*q)))
}

/// Packs the four refined components into a matrix by the block layout of
/// `u(n+1,H)`, independently of the library packing.
pub fn pack(g: &LieElement) -> Mat {
    let n = g.n;
    let mut m = vec![vec![[0.0; 4]; n + 1]; n + 1];
    let mp = g.mpar.m_par;
    let ms = arr(g.mperp.s);
    m[0][1] = add([mp, 0.0, 0.0, 0.0], ms);
    m[1][0] = add([-mp, 0.0, 0.0, 0.0], ms);
    let (p, hs) = (arr(g.hpar.p), arr(g.hperp.s));
    m[0][0] = add(p, hs);
    m[1][1] = sub(p, hs);
    for l in 0..n - 1 {
        let mv = arr(g.mperp.v.entries[l]);
        m[0][l + 2] = mv;
        m[l + 2][0] = [-mv[0], mv[1], mv[2], mv[3]];
        let hv = arr(g.hperp.v.entries[l]);
        m[1][l + 2] = hv;
        m[l + 2][1] = [-hv[0], hv[1], hv[2], hv[3]];
        for c in 0..n - 1 {
            m[l + 2][c + 2] = arr(g.hpar.m.get(l, c));
        }
    }
    m
}

pub fn gauss<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn rand_quat<R: Rng>(rng: &mut R) -> Quaternion {
    Quaternion::new(gauss(rng), gauss(rng), gauss(rng), gauss(rng))
}

pub fn rand_imag<R: Rng>(rng: &mut R) -> Quaternion {
    Quaternion::new(0.0, gauss(rng), gauss(rng), gauss(rng))
}

pub fn rand_vec<R: Rng>(n: usize, rng: &mut R) -> QuaternionVector {
    QuaternionVector::new((0..n - 1).map(|_| rand_quat(rng)).collect())
}

pub fn rand_anti_hermitian<R: Rng>(m: usize, rng: &mut R) -> QMatrix {
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

pub fn rand_mpar<R: Rng>(rng: &mut R) -> MPar {
    MPar { m_par: gauss(rng) }
}

pub fn rand_mperp<R: Rng>(n: usize, rng: &mut R) -> MPerp {
    MPerp { s: rand_imag(rng), v: rand_vec(n, rng) }
}

pub fn rand_hpar<R: Rng>(n: usize, rng: &mut R) -> HPar {
    HPar { p: rand_imag(rng), m: rand_anti_hermitian(n - 1, rng) }
}

pub fn rand_hperp<R: Rng>(n: usize, rng: &mut R) -> HPerp {
    HPerp { s: rand_imag(rng), v: rand_vec(n, rng) }
}

pub fn rand_lie<R: Rng>(n: usize, rng: &mut R) -> LieElement {
    LieElement {
        n,
        mpar: rand_mpar(rng),
        mperp: rand_mperp(n, rng),
        hpar: rand_hpar(n, rng),
        hperp: rand_hperp(n, rng),
    }
}

/// Largest packed difference between two algebra elements.
pub fn lie_diff(a: &LieElement, b: &LieElement) -> f64 {
    a.add(&b.scale(-1.0)).max_abs()
}

/// A state pair as raw components: scalar samples and vector samples.
#[derive(Debug, Clone)]
pub struct Raw {
    pub s: Vec<[f64; 4]>,
    pub v: Vec<Vec<[f64; 4]>>,
}

impl Raw {
    pub fn from_pair(p: &hpn::biham_ops::Pair) -> Self {
        Self {
            s: p.s.samples.iter().map(|q| arr(*q)).collect(),
            v: p.v.samples.iter().map(|v| v.entries.iter().map(|q| arr(*q)).collect()).collect(),
        }
    }

    pub fn to_pair(&self, grid: hpn::grid_calculus::PeriodicGrid) -> hpn::biham_ops::Pair {
        use hpn::grid_calculus::Field;
        hpn::biham_ops::Pair {
            s: Field { grid, samples: self.s.iter().map(|a| quat(*a)).collect() },
            v: Field {
                grid,
                samples: self.v.iter().map(|v| QuaternionVector::new(v.iter().map(|a| quat(*a)).collect())).collect(),
            },
        }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn m(&self) -> usize {
        self.v.first().map_or(0, Vec::len)
    }

    /// Flattened real coordinates, scalar part first.
    pub fn coords(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for c in 0..4 {
            out.push(self.s.iter().map(|a| a[c]).collect());
        }
        for l in 0..self.m() {
            for c in 0..4 {
                out.push(self.v.iter().map(|v| v[l][c]).collect());
            }
        }
        out
    }

    pub fn from_coords(coords: &[Vec<f64>], m: usize) -> Self {
        let n = coords[0].len();
        let s = (0..n).map(|i| [coords[0][i], coords[1][i], coords[2][i], coords[3][i]]).collect();
        let v = (0..n)
            .map(|i| (0..m).map(|l| std::array::from_fn(|c| coords[4 + 4 * l + c][i])).collect())
            .collect();
        Self { s, v }
    }

    pub fn max_abs(&self) -> f64 {
        self.coords().iter().flatten().fold(0.0, |m: f64, x| m.max(x.abs()))
    }

    pub fn max_diff(&self, o: &Self) -> f64 {
        self.coords().iter().flatten().zip(o.coords().iter().flatten()).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()))
    }
}

/// Spectral derivative of periodic samples on `[0, length)`, written directly
/// against the FFT.
pub fn spectral_deriv(f: &[f64], length: f64, order: u32) -> Vec<f64> {
    use rustfft::{num_complex::Complex64, FftPlanner};
    let n = f.len();
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (b, z) in buf.iter_mut().enumerate() {
        let k = if b <= n / 2 { b as f64 } else { b as f64 - n as f64 };
        if b == n / 2 && n.is_multiple_of(2) {
            *z = Complex64::new(0.0, 0.0);
            continue;
        }
        let ik = Complex64::new(0.0, 2.0 * std::f64::consts::PI * k / length);
        *z *= ik.powu(order);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|z| z.re / n as f64).collect()
}

pub fn raw_deriv(p: &Raw, length: f64, order: u32) -> Raw {
    let d: Vec<Vec<f64>> = p.coords().iter().map(|c| spectral_deriv(c, length, order)).collect();
    Raw::from_coords(&d, p.m())
}

/// `sum_l a_l conj(b_l)`.
pub fn vinner(a: &[[f64; 4]], b: &[[f64; 4]]) -> [f64; 4] {
    a.iter().zip(b).fold([0.0; 4], |acc, (x, y)| add(acc, hamilton(*x, conj(*y))))
}

pub fn norm2(a: [f64; 4]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

pub fn vnorm2(a: &[[f64; 4]]) -> f64 {
    a.iter().map(|q| norm2(*q)).sum()
}

pub fn smul(a: f64, q: [f64; 4]) -> [f64; 4] {
    [a * q[0], a * q[1], a * q[2], a * q[3]]
}

pub fn imag_part(q: [f64; 4]) -> [f64; 4] {
    [0.0, q[1], q[2], q[3]]
}

/// Trapezoidal integral of periodic samples.
pub fn integral(f: &[f64], dx: f64) -> f64 {
    f.iter().sum::<f64>() * dx
}

/// `int (s . s' + Re<v, v'>) dx` over raw components.
pub fn pairing(a: &Raw, b: &Raw, dx: f64) -> f64 {
    a.coords().iter().zip(b.coords().iter()).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>()).sum::<f64>() * dx
}

/// Rigid gauge action `(u, uv) -> (a u conj(a), a uv A)` on raw components.
pub fn gauge_raw(p: &Raw, a: [f64; 4], big_a: &Mat) -> Raw {
    let s = p.s.iter().map(|u| hamilton(hamilton(a, *u), conj(a))).collect();
    let v = p
        .v
        .iter()
        .map(|uv| {
            (0..uv.len())
                .map(|c| (0..uv.len()).fold([0.0; 4], |acc, l| add(acc, hamilton(hamilton(a, uv[l]), big_a[l][c]))))
                .collect()
        })
        .collect();
    Raw { s, v }
}

/// Reads the refined components back out of a block matrix.
pub fn unpack(m: &Mat) -> LieElement {
    let n = m.len() - 1;
    let half = |a: [f64; 4], b: [f64; 4], sign: f64| {
        imag_part(smul(0.5, add(a, smul(sign, b))))
    };
    let mut hm = QMatrix::zeros(n - 1, n - 1);
    for l in 0..n - 1 {
        for c in 0..n - 1 {
            hm.set(l, c, quat(m[l + 2][c + 2]));
        }
    }
    LieElement {
        n,
        mpar: MPar { m_par: m[0][1][0] },
        mperp: MPerp {
            s: quat(imag_part(m[0][1])),
            v: QuaternionVector::new((0..n - 1).map(|l| quat(m[0][l + 2])).collect()),
        },
        hpar: HPar { p: quat(half(m[0][0], m[1][1], 1.0)), m: hm },
        hperp: HPerp {
            s: quat(half(m[0][0], m[1][1], -1.0)),
            v: QuaternionVector::new((0..n - 1).map(|l| quat(m[1][l + 2])).collect()),
        },
    }
}
