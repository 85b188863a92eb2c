//! Dense and banded complex linear algebra used by the spectral solver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Eigen-decomposition of a general complex matrix.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<Complex64>,
    /// Unit-norm eigenvectors, one per column.
    pub vectors: CMatrix,
    /// Largest back-substitution residual dropped inside a cluster of
    /// coincident diagonal entries, relative to ‖T‖. Large values mean the
    /// cluster is not semisimple.
    pub defect: f64,
}

fn abs1(z: Complex64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Complex Schur decomposition A = Q T Q† by Hessenberg reduction and
/// single-shift QR with Wilkinson shifts.
pub fn schur(a: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::InvalidArgument("Schur form needs a square matrix".into()));
    }
    if n == 0 {
        return Ok((CMatrix::zeros(0, 0), CMatrix::zeros(0, 0)));
    }
    let (mut q, mut h) = a.clone().hessenberg().unpack();
    let hnorm = h.norm().max(f64::MIN_POSITIVE);
    let eps = f64::EPSILON;
    let mut hi = n - 1;
    let mut stall = 0usize;
    let mut total = 0usize;
    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let sub = abs1(h[(l, l - 1)]);
            let mut s = abs1(h[(l - 1, l - 1)]) + abs1(h[(l, l)]);
            if s == 0.0 {
                s = hnorm;
            }
            if sub <= eps * s || sub <= eps * eps * hnorm {
                h[(l, l - 1)] = ZERO;
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            stall = 0;
            continue;
        }
        stall += 1;
        total += 1;
        if total > 60 * n {
            return Err(Error::InvalidArgument("QR iteration did not converge".into()));
        }
        let d = h[(hi, hi)];
        let mu = if stall % 11 == 10 {
            d + Complex64::from(0.75 * h[(hi, hi - 1)].re.abs() + 0.5 * h[(hi, hi - 1)].norm())
        } else {
            let (aa, bb, cc) = (h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)]);
            let half = (aa - d) * 0.5;
            let disc = (half * half + bb * cc).sqrt();
            let (r1, r2) = (d + half + disc, d + half - disc);
            if (r1 - d).norm() <= (r2 - d).norm() { r1 } else { r2 }
        };
        for k in l..hi {
            let (x, y) = if k == l { (h[(l, l)] - mu, h[(l + 1, l)]) } else { (h[(k, k - 1)], h[(k + 1, k - 1)]) };
            let (c, s) = givens(x, y);
            let c0 = if k == l { l } else { k - 1 };
            for j in c0..n {
                let (u, v) = (h[(k, j)], h[(k + 1, j)]);
                h[(k, j)] = u * c + s * v;
                h[(k + 1, j)] = -s.conj() * u + v * c;
            }
            if k > l {
                h[(k + 1, k - 1)] = ZERO;
            }
            let r1 = (k + 2).min(hi);
            for i in 0..=r1 {
                let (u, v) = (h[(i, k)], h[(i, k + 1)]);
                h[(i, k)] = u * c + v * s.conj();
                h[(i, k + 1)] = -u * s + v * c;
            }
            for i in 0..n {
                let (u, v) = (q[(i, k)], q[(i, k + 1)]);
                q[(i, k)] = u * c + v * s.conj();
                q[(i, k + 1)] = -u * s + v * c;
            }
        }
    }
    for j in 0..n {
        for i in j + 1..n {
            h[(i, j)] = ZERO;
        }
    }
    Ok((q, h))
}

/// Rotation [[c, s], [−s*, c]] with real c taking (x, y) to (r, 0).
fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    let (ax, ay) = (x.norm(), y.norm());
    if ay == 0.0 {
        return (1.0, ZERO);
    }
    if ax == 0.0 {
        return (0.0, y.conj() / ay);
    }
    let rho = ax.hypot(ay);
    (ax / rho, (x / ax) * y.conj() / rho)
}

/// Eigenpairs from the complex Schur form A = Q T Q†. Diagonal entries of T
/// closer than `cluster_rel·max|T_ii|` are treated as one repeated eigenvalue.
pub fn eigen_general(a: &CMatrix, cluster_rel: f64) -> Result<Eigen> {
    let n = a.nrows();
    let (q, t) = schur(a)?;
    let values: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    let scale = values.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let tnorm = t.norm().max(f64::MIN_POSITIVE);
    let tol = cluster_rel * scale;
    let mut vectors = CMatrix::zeros(n, n);
    let mut defect = 0.0f64;
    let mut x = vec![ZERO; n];
    for k in 0..n {
        let lam = values[k];
        x[..=k].fill(ZERO);
        x[k] = ONE;
        for j in (0..k).rev() {
            let mut s = ZERO;
            for l in j + 1..=k {
                s += t[(j, l)] * x[l];
            }
            let d = t[(j, j)] - lam;
            if d.norm() <= tol {
                defect = defect.max(s.norm() / tnorm);
                x[j] = ZERO;
            } else {
                x[j] = -s / d;
            }
        }
        let mut v = CVector::zeros(n);
        for (r, vr) in v.iter_mut().enumerate() {
            let mut s = ZERO;
            for l in 0..=k {
                s += q[(r, l)] * x[l];
            }
            *vr = s;
        }
        let nv = v.norm();
        vectors.set_column(k, &(v / Complex64::from(nv)));
    }
    Ok(Eigen { values, vectors, defect })
}

pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    a.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// σ_max/σ_min of `a` after scaling every column to unit norm.
pub fn condition_number(a: &CMatrix) -> f64 {
    let mut b = a.clone();
    for mut c in b.column_iter_mut() {
        let n = c.norm();
        if n > 0.0 {
            c /= Complex64::from(n);
        }
    }
    let s = singular_values(&b);
    let (hi, lo) = s.iter().fold((0.0f64, f64::INFINITY), |(h, l), &v| (h.max(v), l.min(v)));
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub fn spectral_norm(a: &CMatrix) -> f64 {
    singular_values(a).into_iter().fold(0.0, f64::max)
}

/// Takagi factorization A = V·diag(σ)·Vᵀ of a complex symmetric matrix, V
/// unitary, σ ≥ 0 descending.
///
/// Uses the real symmetric embedding B = [[Re A, Im A], [Im A, −Re A]]:
/// B has eigenvalues ±σ and an eigenvector [x; y] of +σ gives the Takagi
/// vector x + iy. Any orthonormal basis of the +σ eigenspaces yields a
/// unitary V, so repeated σ need no special handling.
pub fn takagi(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let m = a.nrows();
    if m == 1 {
        let z = a[(0, 0)];
        let v = if z.norm() == 0.0 { ONE } else { Complex64::from_polar(1.0, z.arg() / 2.0) };
        return (vec![z.norm()], CMatrix::from_element(1, 1, v));
    }
    let mut b = DMatrix::<f64>::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            let z = 0.5 * (a[(i, j)] + a[(j, i)]);
            b[(i, j)] = z.re;
            b[(i, j + m)] = z.im;
            b[(i + m, j)] = z.im;
            b[(i + m, j + m)] = -z.re;
        }
    }
    let eig = b.symmetric_eigen();
    let mut order: Vec<usize> = (0..2 * m).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[q].total_cmp(&eig.eigenvalues[p]));
    let mut sigma = Vec::with_capacity(m);
    let mut v = CMatrix::zeros(m, m);
    for (c, &idx) in order.iter().take(m).enumerate() {
        sigma.push(eig.eigenvalues[idx].max(0.0));
        for r in 0..m {
            v[(r, c)] = Complex64::new(eig.eigenvectors[(r, idx)], eig.eigenvectors[(r + m, idx)]);
        }
    }
    (sigma, v)
}

/// LU factorization with partial pivoting of a banded matrix (`kl` sub-,
/// `ku` super-diagonals). Row `i` stores columns `i−kl ..= i+kl+ku` to
/// hold pivoting fill.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    rows: Vec<Vec<Complex64>>,
    piv: Vec<usize>,
}

impl BandLu {
    fn width(kl: usize, ku: usize) -> usize {
        2 * kl + ku + 1
    }

    fn at(&self, i: usize, j: usize) -> Complex64 {
        self.rows[i][j + self.kl - i]
    }

    /// Factors `a`, whose entries outside the band must be zero.
    pub fn factor(a: &CMatrix, kl: usize, ku: usize) -> Result<BandLu> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::InvalidArgument("band LU needs a square matrix".into()));
        }
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                entries.push((i, j, a[(i, j)]));
            }
        }
        Self::factor_entries(n, kl, ku, &entries)
    }

    /// Factors the n×n matrix with the given (row, column, value) entries,
    /// duplicates adding; the band is taken from the entries.
    pub fn from_entries(n: usize, entries: &[(usize, usize, Complex64)]) -> Result<BandLu> {
        let (mut kl, mut ku) = (0, 0);
        for &(r, c, _) in entries {
            if r > c {
                kl = kl.max(r - c);
            } else {
                ku = ku.max(c - r);
            }
        }
        Self::factor_entries(n, kl, ku, entries)
    }

    fn factor_entries(n: usize, kl: usize, ku: usize, entries: &[(usize, usize, Complex64)]) -> Result<BandLu> {
        let w = Self::width(kl, ku);
        let mut rows = vec![vec![ZERO; w]; n];
        for &(i, j, v) in entries {
            if i >= n || j >= n || j + kl < i || j > i + ku {
                return Err(Error::InvalidArgument("band LU: entry outside the band".into()));
            }
            rows[i][j + kl - i] += v;
        }
        let mut piv = vec![0; n];
        let scale = rows.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = rows[k][kl].norm();
            for i in k + 1..=last {
                let v = rows[i][k + kl - i].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= f64::EPSILON * scale * 1e-3 {
                return Err(Error::InvalidArgument("band LU: matrix is singular".into()));
            }
            piv[k] = p;
            let cend = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=cend {
                    let (ik, ip) = (j + kl - k, j + kl - p);
                    let tmp = rows[k][ik];
                    rows[k][ik] = rows[p][ip];
                    rows[p][ip] = tmp;
                }
            }
            let pivot = rows[k][kl];
            let (head, tail) = rows.split_at_mut(k + 1);
            let rk = &head[k];
            for (off, ri) in tail.iter_mut().take(last - k).enumerate() {
                let i = k + 1 + off;
                let l = ri[k + kl - i] / pivot;
                ri[k + kl - i] = l;
                if l == ZERO {
                    continue;
                }
                for j in k + 1..=cend {
                    ri[j + kl - i] -= l * rk[j + kl - k];
                }
            }
        }
        Ok(BandLu { n, kl, ku, rows, piv })
    }

    pub fn solve(&self, b: &CVector) -> CVector {
        let n = self.n;
        let mut x = b.clone();
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap_rows(k, p);
            }
            let xk = x[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                x[i] -= self.at(i, k) * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + self.kl + self.ku).min(n - 1) {
                s -= self.at(k, j) * x[j];
            }
            x[k] = s / self.at(k, k);
        }
        x
    }
}
