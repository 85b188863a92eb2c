//! Discretized Maxwell operator at fixed transverse wavevector: spectrum of
//! M⁻¹·N, Krein-orthonormal basis, field expansion and the completeness /
//! commutator-kernel identities.
//!
//! Grid: N_z cells of width Δz on a periodic domain [0, L_z), all six field
//! components at cell centres z_j = (j + ½)Δz, vector index 6j + c with
//! c = (Ex, Ey, Ez, Hx, Hy, Hz). The discrete Krein product is
//! ⟨u|v⟩ = ½Δz·u†Mv.

use nalgebra::{DMatrix, Matrix6};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::linalg::{self, BandLu, CMatrix, CVector};
use crate::coupling::{coupling_constants, hybridize, phase_match, CoupledPair, MatchSearch};
use crate::media::MovingSlab;
use crate::slabmodes::LabBranch;
use crate::profile::PiecewiseWeight;

pub const TAU_IM: f64 = 1e-8;
pub const KAPPA_MAX: f64 = 1e10;
pub const TAU_GRAM: f64 = 1e-8;
pub const DEFAULT_NZ: usize = 64;
/// Eigenvalues closer than this (relative to max|ω|) share an eigenspace.
pub const CLUSTER_REL: f64 = 1e-9;
/// Smallest Krein Gram eigenvalue / Takagi value accepted for
/// canonically normalized vectors.
pub const TAU_DEGENERATE: f64 = 1e-12;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Sign pattern of the 180° rotation about z: diag(R, −R), R = diag(−1, −1, 1).
pub const TILDE_SIGNS: [f64; 6] = [-1.0, -1.0, 1.0, 1.0, 1.0, -1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nz: usize,
    pub dz: f64,
    pub lz: f64,
}

impl Grid {
    pub fn new(lz: f64, nz: usize) -> Result<Grid> {
        if nz < 8 {
            return Err(Error::InvalidArgument(format!("N_z = {nz} is below 8")));
        }
        if !(lz.is_finite() && lz > 0.0) {
            return Err(Error::InvalidArgument(format!("domain length {lz} must be positive")));
        }
        Ok(Grid { nz, dz: lz / nz as f64, lz })
    }

    pub fn center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dz
    }

    pub fn dim(&self) -> usize {
        6 * self.nz
    }

    /// Largest frequency the central-difference symbol can represent in
    /// vacuum at kx = ky = 0.
    pub fn nyquist(&self) -> f64 {
        1.0 / self.dz
    }
}

#[derive(Debug, Clone)]
pub struct DiscretizedOperator {
    /// Nonzero entries (row, column, value) of N.
    pub entries: Vec<(usize, usize, Complex64)>,
    /// M per cell.
    pub blocks: Vec<Matrix6<f64>>,
    pub grid: Grid,
    pub kx: f64,
    pub ky: f64,
}

/// Assembles N (i∇× blocks, ∂z by periodic central differences) and the
/// block-diagonal M sampled at cell centres.
pub fn assemble_operators(stack: &[MovingSlab], kx: f64, ky: f64, grid: Grid) -> Result<DiscretizedOperator> {
    for s in stack {
        if s.z0 < 0.0 || s.z1 > grid.lz {
            return Err(Error::InvalidSlab(format!(
                "slab [{}, {}] outside the domain [0, {})",
                s.z0, s.z1, grid.lz
            )));
        }
    }
    let weight = PiecewiseWeight::material(stack, 0.0)?;
    let blocks: Vec<Matrix6<f64>> = (0..grid.nz).map(|j| *weight.at(grid.center(j))).collect();
    let entries = curl_operator(kx, ky, grid);
    Ok(DiscretizedOperator { entries, blocks, grid, kx, ky })
}

fn curl_operator(kx: f64, ky: f64, grid: Grid) -> Vec<(usize, usize, Complex64)> {
    let nz = grid.nz;
    // C = K + Z·D: K the local ik× part, Z the ẑ× pattern, D the difference.
    let mut k = [[ZERO; 3]; 3];
    k[0][2] = I * ky;
    k[1][2] = -I * kx;
    k[2][0] = -I * ky;
    k[2][1] = I * kx;
    let z = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
    let h = 0.5 / grid.dz;
    let mut nm = Vec::with_capacity(nz * 26);
    for j in 0..nz {
        let (e, hh) = (6 * j, 6 * j + 3);
        for a in 0..3 {
            for b in 0..3 {
                if k[a][b] != ZERO {
                    nm.push((e + a, hh + b, I * k[a][b]));
                    nm.push((hh + a, e + b, -I * k[a][b]));
                }
            }
        }
        for (nb, d) in [((j + 1) % nz, h), ((j + nz - 1) % nz, -h)] {
            let (e2, h2) = (6 * nb, 6 * nb + 3);
            for a in 0..3 {
                for b in 0..3 {
                    if z[a][b] != 0.0 {
                        nm.push((e + a, h2 + b, I * (z[a][b] * d)));
                        nm.push((hh + a, e2 + b, -I * (z[a][b] * d)));
                    }
                }
            }
        }
    }
    nm
}

impl DiscretizedOperator {
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Dense N; duplicate entries add.
    pub fn nmat(&self) -> CMatrix {
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    pub fn mmat(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (j, b) in self.blocks.iter().enumerate() {
            m.view_mut((6 * j, 6 * j), (6, 6)).copy_from(b);
        }
        m
    }

    pub fn apply_m(&self, v: &CVector) -> CVector {
        let mut out = CVector::zeros(v.len());
        for (j, b) in self.blocks.iter().enumerate() {
            for r in 0..6 {
                let mut s = ZERO;
                for c in 0..6 {
                    s += v[6 * j + c] * b[(r, c)];
                }
                out[6 * j + r] = s;
            }
        }
        out
    }

    fn apply_m_cols(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(x.nrows(), x.ncols());
        for c in 0..x.ncols() {
            out.set_column(c, &self.apply_m(&x.column(c).into_owned()));
        }
        out
    }

    fn apply_minv_cols(&self, x: &CMatrix) -> Result<CMatrix> {
        let inv: Vec<Matrix6<f64>> = self
            .blocks
            .iter()
            .map(|b| b.try_inverse().ok_or_else(|| Error::InvalidMaterial("singular cell matrix".into())))
            .collect::<Result<_>>()?;
        let mut out = CMatrix::zeros(x.nrows(), x.ncols());
        for col in 0..x.ncols() {
            for (j, b) in inv.iter().enumerate() {
                for r in 0..6 {
                    let mut s = ZERO;
                    for c in 0..6 {
                        s += x[(6 * j + c, col)] * b[(r, c)];
                    }
                    out[(6 * j + r, col)] = s;
                }
            }
        }
        Ok(out)
    }

    /// ⟨u|v⟩ = ½Δz·u†Mv.
    pub fn krein(&self, u: &CVector, v: &CVector) -> Complex64 {
        u.dotc(&self.apply_m(v)) * (0.5 * self.grid.dz)
    }

    /// Canonical (identity-weight) norm squared ½Δz·‖u‖².
    pub fn canonical_norm2(&self, u: &CVector) -> f64 {
        0.5 * self.grid.dz * u.norm_squared()
    }

    pub fn hermiticity_residual(&self) -> f64 {
        let nm = self.nmat();
        let d = &nm - nm.adjoint();
        let scale = nm.iter().map(|z| z.norm()).fold(0.0, f64::max);
        d.iter().map(|z| z.norm()).fold(0.0, f64::max) / scale.max(f64::MIN_POSITIVE)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.blocks.iter().all(|b| b.cholesky().is_some())
    }

    /// The same stack at (−kx, −ky): N(−k) = −N(k)*.
    pub fn at_minus_k(&self) -> DiscretizedOperator {
        DiscretizedOperator {
            entries: self.entries.iter().map(|&(r, c, v)| (r, c, -v.conj())).collect(),
            blocks: self.blocks.clone(),
            grid: self.grid,
            kx: -self.kx,
            ky: -self.ky,
        }
    }

    fn normalize_canonical(&self, v: &CVector) -> CVector {
        v / Complex64::from(self.canonical_norm2(v).sqrt())
    }
}

/// Antilinear 180° rotation about z: P·F* cell by cell, at the same k.
pub fn tilde_map(f: &CVector) -> CVector {
    CVector::from_iterator(f.len(), f.iter().enumerate().map(|(i, z)| z.conj() * TILDE_SIGNS[i % 6]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveRoute {
    /// Hermitian route when every cell matrix is positive definite.
    #[default]
    Auto,
    /// Cholesky M = LLᵀ and the Hermitian problem L⁻¹NL⁻ᵀ.
    Hermitian,
    /// Null space of N split off, then a complex Schur decomposition of
    /// the reduced non-Hermitian matrix.
    General,
}

#[derive(Debug, Clone)]
pub struct RealMode {
    pub omega: f64,
    pub f: CVector,
    /// Sign of ⟨F|F⟩ for the vector as returned by the eigensolver.
    pub signature: i8,
}

#[derive(Debug, Clone)]
pub struct ComplexPair {
    /// Eigenvalue of `f`, with positive imaginary part.
    pub omega: Complex64,
    pub f: CVector,
    /// tilde(f), an eigenvector for ω*.
    pub e: CVector,
}

#[derive(Debug, Clone)]
pub struct SpectrumClassification {
    pub grid: Grid,
    pub kx: f64,
    pub ky: f64,
    pub route: SolveRoute,
    pub real_modes: Vec<RealMode>,
    pub complex_pairs: Vec<ComplexPair>,
    pub null_modes: Vec<CVector>,
    /// Every non-null eigenvalue as computed (before snapping).
    pub eigenvalues: Vec<Complex64>,
    pub max_abs_omega: f64,
    /// Column-scaled condition number of the eigenvector matrix.
    pub condition: f64,
    pub schur_defect: f64,
    /// Worst distance from ω* to the computed spectrum, relative to max|ω|.
    pub conj_residual: f64,
    /// Worst |⟨F|F⟩|/‖F‖²_c over eigenvectors with complex eigenvalue.
    pub null_product_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenClass {
    Real,
    ComplexPair,
    Null,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenRecord {
    pub re: f64,
    pub im: f64,
    pub class: EigenClass,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub signature: Option<i8>,
}

impl SpectrumClassification {
    pub fn records(&self) -> Vec<EigenRecord> {
        let mut out = Vec::new();
        for m in &self.real_modes {
            out.push(EigenRecord { re: m.omega, im: 0.0, class: EigenClass::Real, signature: Some(m.signature) });
        }
        for p in &self.complex_pairs {
            for w in [p.omega, p.omega.conj()] {
                out.push(EigenRecord { re: w.re, im: w.im, class: EigenClass::ComplexPair, signature: None });
            }
        }
        for _ in &self.null_modes {
            out.push(EigenRecord { re: 0.0, im: 0.0, class: EigenClass::Null, signature: None });
        }
        out
    }

    /// Largest growth rate, zero when every eigenvalue is real.
    pub fn max_lambda(&self) -> f64 {
        self.complex_pairs.iter().map(|p| p.omega.im).fold(0.0, f64::max)
    }
}

struct RawSpectrum {
    pairs: Vec<(Complex64, CVector)>,
    null: Vec<CVector>,
    condition: f64,
    defect: f64,
}

fn hermitian_route(op: &DiscretizedOperator, with_vectors: bool) -> Result<RawSpectrum> {
    let n = op.dim();
    let mut linv = DMatrix::<f64>::zeros(n, n);
    for (j, b) in op.blocks.iter().enumerate() {
        let l = b
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("Hermitian route needs positive-definite M".into()))?
            .l();
        let li = l.try_inverse().ok_or_else(|| Error::InvalidMaterial("singular Cholesky factor".into()))?;
        linv.view_mut((6 * j, 6 * j), (6, 6)).copy_from(&li);
    }
    let linv_c = linv.map(Complex64::from);
    let a = &linv_c * op.nmat() * linv_c.transpose();
    let a = (&a + a.adjoint()) * Complex64::from(0.5);
    let eig = a.symmetric_eigen();
    let numax = eig.eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let lt = linv_c.transpose();
    let mut pairs = Vec::new();
    let mut null = Vec::new();
    for (k, &nu) in eig.eigenvalues.iter().enumerate() {
        let f = if with_vectors { &lt * eig.eigenvectors.column(k) } else { CVector::zeros(0) };
        if nu.abs() <= TAU_IM * numax {
            null.push(f);
        } else {
            pairs.push((Complex64::from(nu), f));
        }
    }
    Ok(RawSpectrum { pairs, null, condition: 1.0, defect: 0.0 })
}

fn general_route(op: &DiscretizedOperator, with_vectors: bool) -> Result<RawSpectrum> {
    let herm = op.nmat().symmetric_eigen();
    let numax = herm.eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let (keep, drop): (Vec<usize>, Vec<usize>) =
        (0..op.dim()).partition(|&k| herm.eigenvalues[k].abs() > TAU_IM * numax);
    let qr = herm.eigenvectors.select_columns(keep.iter());
    let minv_q = op.apply_minv_cols(&qr)?;
    // N·M⁻¹·G = ωG with G = Q_r y reduces to Λ_r·Q_r†M⁻¹Q_r·y = ωy.
    let mut k = qr.adjoint() * &minv_q;
    for (r, &idx) in keep.iter().enumerate() {
        let lam = herm.eigenvalues[idx];
        k.row_mut(r).iter_mut().for_each(|z| *z *= lam);
    }
    let (values, vectors, condition, defect) = if with_vectors {
        let eig = linalg::eigen_general(&k, CLUSTER_REL)?;
        let cond = linalg::condition_number(&eig.vectors);
        if !(cond <= KAPPA_MAX) {
            return Err(Error::NonDiagonalizable(cond));
        }
        (eig.values, Some(&minv_q * eig.vectors), cond, eig.defect)
    } else {
        let (_, t) = linalg::schur(&k)?;
        ((0..t.nrows()).map(|i| t[(i, i)]).collect(), None, f64::NAN, f64::NAN)
    };
    let pairs = values
        .iter()
        .enumerate()
        .map(|(c, &w)| (w, vectors.as_ref().map(|v| v.column(c).into_owned()).unwrap_or_else(|| CVector::zeros(0))))
        .collect();
    let null = if with_vectors {
        drop.iter().map(|&c| herm.eigenvectors.column(c).into_owned()).collect()
    } else {
        vec![CVector::zeros(0); drop.len()]
    };
    Ok(RawSpectrum { pairs, null, condition, defect })
}

fn resolve_route(op: &DiscretizedOperator, route: SolveRoute) -> SolveRoute {
    match route {
        SolveRoute::Auto if op.is_positive_definite() => SolveRoute::Hermitian,
        SolveRoute::Auto => SolveRoute::General,
        r => r,
    }
}

/// Non-null eigenvalues only (null ones are exactly zero by construction).
pub fn eigenvalues(op: &DiscretizedOperator, route: SolveRoute) -> Result<Vec<Complex64>> {
    let raw = match resolve_route(op, route) {
        SolveRoute::Hermitian => hermitian_route(op, false)?,
        _ => general_route(op, false)?,
    };
    Ok(raw.pairs.into_iter().map(|(w, _)| w).collect())
}

pub fn solve_spectrum(op: &DiscretizedOperator) -> Result<SpectrumClassification> {
    solve_spectrum_with(op, SolveRoute::Auto)
}

pub fn solve_spectrum_with(op: &DiscretizedOperator, route: SolveRoute) -> Result<SpectrumClassification> {
    let route = resolve_route(op, route);
    let raw = match route {
        SolveRoute::Hermitian => hermitian_route(op, true)?,
        _ => general_route(op, true)?,
    };
    let eigenvalues: Vec<Complex64> = raw.pairs.iter().map(|p| p.0).collect();
    let wmax = eigenvalues.iter().map(|w| w.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let tol = TAU_IM * wmax;
    let mut real_modes = Vec::new();
    let mut complex_pairs = Vec::new();
    let mut null_modes: Vec<CVector> = raw.null.iter().map(|v| op.normalize_canonical(v)).collect();
    let mut below = Vec::new();
    let mut null_product_residual = 0.0f64;
    for (w, v) in raw.pairs {
        let f = op.normalize_canonical(&v);
        if w.norm() <= tol {
            null_modes.push(f);
        } else if w.im.abs() <= tol {
            let s = op.krein(&f, &f).re;
            real_modes.push(RealMode { omega: w.re, f, signature: if s >= 0.0 { 1 } else { -1 } });
        } else {
            null_product_residual = null_product_residual.max(op.krein(&f, &f).norm());
            if w.im > 0.0 {
                let e = tilde_map(&f);
                complex_pairs.push(ComplexPair { omega: w, f, e });
            } else {
                below.push(w);
            }
        }
    }
    real_modes.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    complex_pairs.sort_by(|a, b| a.omega.re.total_cmp(&b.omega.re).then(a.omega.im.total_cmp(&b.omega.im)));
    let conj_residual = set_residual(&eigenvalues, &eigenvalues, |w| w.conj()) / wmax;
    if below.len() != complex_pairs.len() {
        // unpaired complex eigenvalues show up in the conjugation residual
        debug_assert!(conj_residual > 0.0);
    }
    Ok(SpectrumClassification {
        grid: op.grid,
        kx: op.kx,
        ky: op.ky,
        route,
        real_modes,
        complex_pairs,
        null_modes,
        eigenvalues,
        max_abs_omega: wmax,
        condition: raw.condition,
        schur_defect: raw.defect,
        conj_residual,
        null_product_residual,
    })
}

/// max over a of min over b of |b − map(a)|.
fn set_residual<F: Fn(Complex64) -> Complex64>(a: &[Complex64], b: &[Complex64], map: F) -> f64 {
    a.iter()
        .map(|&w| {
            let t = map(w);
            b.iter().map(|&v| (v - t).norm()).fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Symmetry residuals of the spectrum, relative to max|ω|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuartetReport {
    /// ω ↦ ω* at the same k.
    pub conj_residual: f64,
    /// ω(k) ↦ −ω(k)* against the spectrum computed at −k.
    pub cross_k_residual: f64,
    /// ω ↦ −ω at the same k; small only for stacks at rest or mirror-free
    /// motion such as vacuum.
    pub mirror_residual: f64,
}

impl QuartetReport {
    pub fn residual(&self) -> f64 {
        self.conj_residual.max(self.cross_k_residual)
    }
}

pub fn quartet_report(op: &DiscretizedOperator, spec: &SpectrumClassification) -> Result<QuartetReport> {
    let minus = eigenvalues(&op.at_minus_k(), spec.route)?;
    let w = &spec.eigenvalues;
    let scale = spec.max_abs_omega;
    Ok(QuartetReport {
        conj_residual: spec.conj_residual,
        cross_k_residual: set_residual(w, &minus, |z| -z.conj()).max(set_residual(&minus, w, |z| -z.conj())) / scale,
        mirror_residual: set_residual(w, w, |z| -z) / scale,
    })
}

#[derive(Debug, Clone)]
pub struct BasisReal {
    pub omega: f64,
    pub f: CVector,
    pub signature: i8,
}

impl BasisReal {
    /// Membership of E_R: ω⟨F|F⟩ > 0.
    pub fn in_e_r(&self) -> bool {
        self.omega * self.signature as f64 > 0.0
    }
}

#[derive(Debug, Clone)]
pub struct BasisPair {
    /// Eigenvalue of `f`; its partner `e` belongs to ω*.
    pub omega: Complex64,
    pub f: CVector,
    pub e: CVector,
}

#[derive(Debug, Clone)]
pub struct BasisNull {
    pub f: CVector,
    pub signature: i8,
}

#[derive(Debug, Clone)]
pub struct KreinBasis {
    pub grid: Grid,
    pub real: Vec<BasisReal>,
    pub pairs: Vec<BasisPair>,
    pub null: Vec<BasisNull>,
    /// max |Gram − canonical form| over the whole basis.
    pub gram_residual: f64,
    /// Smallest Takagi value met while normalizing complex pairs.
    pub min_takagi: f64,
}

fn clusters<T, F: Fn(&T) -> Complex64>(items: &[T], key: F, tol: f64) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut used = vec![false; items.len()];
    for i in 0..items.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let mut group = vec![i];
        let mut head = 0;
        while head < group.len() {
            let wi = key(&items[group[head]]);
            for j in 0..items.len() {
                if !used[j] && (key(&items[j]) - wi).norm() <= tol {
                    used[j] = true;
                    group.push(j);
                }
            }
            head += 1;
        }
        out.push(group);
    }
    out
}

/// Hermitian Gram of `vs`, diagonalized: returns U·|D|^{-1/2}-transformed
/// vectors and the signs of D.
fn krein_orthonormalize(op: &DiscretizedOperator, vs: &[CVector]) -> Result<Vec<(CVector, i8)>> {
    let m = vs.len();
    let gram = CMatrix::from_fn(m, m, |a, b| op.krein(&vs[a], &vs[b]));
    let gram = (&gram + gram.adjoint()) * Complex64::from(0.5);
    let eig = gram.symmetric_eigen();
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        let d = eig.eigenvalues[k];
        if d.abs() <= TAU_DEGENERATE {
            return Err(Error::DegenerateGram(d.abs()));
        }
        let mut v = CVector::zeros(vs[0].len());
        for (a, va) in vs.iter().enumerate() {
            v += va * eig.eigenvectors[(a, k)];
        }
        out.push((v / Complex64::from(d.abs().sqrt()), if d > 0.0 { 1 } else { -1 }));
    }
    Ok(out)
}

pub fn build_krein_basis(spec: &SpectrumClassification, op: &DiscretizedOperator) -> Result<KreinBasis> {
    let tol = CLUSTER_REL * spec.max_abs_omega;
    let mut real = Vec::with_capacity(spec.real_modes.len());
    for group in clusters(&spec.real_modes, |m| Complex64::from(m.omega), tol) {
        let omega = group.iter().map(|&i| spec.real_modes[i].omega).sum::<f64>() / group.len() as f64;
        let vs: Vec<CVector> = group.iter().map(|&i| spec.real_modes[i].f.clone()).collect();
        for (f, signature) in krein_orthonormalize(op, &vs)? {
            real.push(BasisReal { omega, f, signature });
        }
    }
    let mut pairs = Vec::with_capacity(spec.complex_pairs.len());
    let mut min_takagi = f64::INFINITY;
    for group in clusters(&spec.complex_pairs, |p| p.omega, tol) {
        let m = group.len();
        let omega = group.iter().map(|&i| spec.complex_pairs[i].omega).sum::<Complex64>() / m as f64;
        let fs: Vec<&CVector> = group.iter().map(|&i| &spec.complex_pairs[i].f).collect();
        let es: Vec<CVector> = fs.iter().map(|f| tilde_map(f)).collect();
        let a = CMatrix::from_fn(m, m, |p, q| op.krein(fs[p], &es[q]));
        let (sigma, v) = linalg::takagi(&a);
        for (c, &s) in sigma.iter().enumerate() {
            min_takagi = min_takagi.min(s);
            if s <= TAU_DEGENERATE {
                return Err(Error::DegenerateGram(s));
            }
            // f' = f·V·Σ^{-1/2}, e' = tilde(f') so that ⟨e'|f'⟩ = 1
            let mut f = CVector::zeros(op.dim());
            for (p, fp) in fs.iter().enumerate() {
                f += *fp * v[(p, c)];
            }
            f /= Complex64::from(s.sqrt());
            let e = tilde_map(&f);
            pairs.push(BasisPair { omega, f, e });
        }
    }
    let null = krein_orthonormalize(op, &spec.null_modes)?
        .into_iter()
        .map(|(f, signature)| BasisNull { f, signature })
        .collect();
    let mut basis = KreinBasis { grid: spec.grid, real, pairs, null, gram_residual: 0.0, min_takagi };
    basis.gram_residual = gram_residual(&basis, op);
    Ok(basis)
}

impl KreinBasis {
    pub fn len(&self) -> usize {
        self.real.len() + 2 * self.pairs.len() + self.null.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Columns ordered real, f, e, null.
    pub fn matrix(&self) -> CMatrix {
        let cols: Vec<&CVector> = self
            .real
            .iter()
            .map(|r| &r.f)
            .chain(self.pairs.iter().map(|p| &p.f))
            .chain(self.pairs.iter().map(|p| &p.e))
            .chain(self.null.iter().map(|n| &n.f))
            .collect();
        let n = cols.first().map(|c| c.len()).unwrap_or(0);
        CMatrix::from_fn(n, cols.len(), |r, c| cols[c][r])
    }

    /// Canonical Gram: real ±δ, ⟨e_n|f_m⟩ = δ, all else 0.
    pub fn canonical_gram(&self) -> CMatrix {
        let (nr, np, nn) = (self.real.len(), self.pairs.len(), self.null.len());
        let mut g = CMatrix::zeros(self.len(), self.len());
        for (i, r) in self.real.iter().enumerate() {
            g[(i, i)] = Complex64::from(r.signature as f64);
        }
        for p in 0..np {
            g[(nr + p, nr + np + p)] = Complex64::from(1.0);
            g[(nr + np + p, nr + p)] = Complex64::from(1.0);
        }
        for (i, l) in self.null.iter().enumerate() {
            let k = nr + 2 * np + i;
            g[(k, k)] = Complex64::from(l.signature as f64);
        }
        debug_assert_eq!(nr + 2 * np + nn, self.len());
        g
    }

    /// Swaps f and e for pairs with Re ω < 0, i.e. takes the ω* member
    /// into E_C for those pairs.
    pub fn alternative_split(&self) -> KreinBasis {
        let mut b = self.clone();
        for p in b.pairs.iter_mut() {
            if p.omega.re < 0.0 {
                std::mem::swap(&mut p.f, &mut p.e);
                p.omega = p.omega.conj();
            }
        }
        b
    }

    pub fn without_real(&self, idx: usize) -> KreinBasis {
        let mut b = self.clone();
        b.real.remove(idx);
        b
    }

    pub fn without_null(&self) -> KreinBasis {
        let mut b = self.clone();
        b.null.clear();
        b
    }

    pub fn signature_counts(&self) -> (usize, usize) {
        let pos = self.real.iter().filter(|r| r.signature > 0).count();
        (pos, self.real.len() - pos)
    }
}

pub fn gram_residual(basis: &KreinBasis, op: &DiscretizedOperator) -> f64 {
    let b = basis.matrix();
    let g = b.adjoint() * op.apply_m_cols(&b) * Complex64::from(0.5 * op.grid.dz);
    (g - basis.canonical_gram()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Left and right factors with Σ = L·R†, R = M·(basis vectors), L
/// carrying the dual weights; `freq` multiplies each term by its ω.
fn outer_factors(basis: &KreinBasis, op: &DiscretizedOperator, freq: bool) -> (CMatrix, CMatrix) {
    let n = op.dim();
    let m = basis.len();
    let mut l = CMatrix::zeros(n, m);
    let mut r = CMatrix::zeros(n, m);
    let mut c = 0;
    let mut put = |l: &mut CMatrix, r: &mut CMatrix, left: &CVector, w: Complex64, right: &CVector| {
        l.set_column(c, &(left * w));
        r.set_column(c, &op.apply_m(right));
        c += 1;
    };
    for re in &basis.real {
        let w = if freq { re.omega } else { 1.0 } / (2.0 * re.signature as f64);
        put(&mut l, &mut r, &re.f, Complex64::from(w), &re.f);
    }
    for p in &basis.pairs {
        let (wf, we) = if freq { (p.omega, p.omega.conj()) } else { (Complex64::from(1.0), Complex64::from(1.0)) };
        // ½(f·g̃† + e·g†), weighted by ω for f and ω* for e
        put(&mut l, &mut r, &p.f, wf * 0.5, &p.e);
        put(&mut l, &mut r, &p.e, we * 0.5, &p.f);
    }
    for nl in &basis.null {
        let w = if freq { 0.0 } else { 1.0 / (2.0 * nl.signature as f64) };
        put(&mut l, &mut r, &nl.f, Complex64::from(w), &nl.f);
    }
    (l, r)
}

/// Σ F⊗G*/(2⟨F|F⟩) + ½Σ(f⊗g̃* + e⊗g*) + null terms.
pub fn assemble_identity(basis: &KreinBasis, op: &DiscretizedOperator) -> CMatrix {
    let (l, r) = outer_factors(basis, op, false);
    l * r.adjoint()
}

/// Σ ω G⊗G*/(2⟨F|F⟩) + ½Σ(ω g⊗g̃* + ω* g̃⊗g*); null modes carry ω = 0.
pub fn assemble_kernel(basis: &KreinBasis, op: &DiscretizedOperator) -> CMatrix {
    let (l, r) = outer_factors(basis, op, true);
    op.apply_m_cols(&l) * r.adjoint()
}

/// ‖Σ − (1/Δz)·I‖₂ / ‖(1/Δz)·I‖₂.
pub fn verify_completeness(basis: &KreinBasis, op: &DiscretizedOperator) -> f64 {
    let s = assemble_identity(basis, op);
    let dz = op.grid.dz;
    let target = CMatrix::identity(op.dim(), op.dim()) * Complex64::from(1.0 / dz);
    linalg::spectral_norm(&(s - target)) * dz
}

/// ‖kernel − N/Δz‖₂ / ‖N/Δz‖₂.
pub fn verify_commutator_kernel(basis: &KreinBasis, op: &DiscretizedOperator) -> f64 {
    let s = assemble_kernel(basis, op);
    let target = op.nmat() / Complex64::from(op.grid.dz);
    linalg::spectral_norm(&(s - &target)) / linalg::spectral_norm(&target)
}

/// ‖K(−k)ᵀ + K(k)‖₂/‖K(k)‖₂ for kernels assembled at k and −k: the real
/// space commutator kernel is odd under (z, i) ↔ (z′, j).
pub fn kernel_antisymmetry(
    basis_k: &KreinBasis,
    op_k: &DiscretizedOperator,
    basis_mk: &KreinBasis,
    op_mk: &DiscretizedOperator,
) -> f64 {
    let a = assemble_kernel(basis_k, op_k);
    let b = assemble_kernel(basis_mk, op_mk);
    linalg::spectral_norm(&(b.transpose() + &a)) / linalg::spectral_norm(&a)
}

#[derive(Debug, Clone)]
pub struct Expansion {
    pub alpha: Vec<Complex64>,
    pub beta: Vec<Complex64>,
    pub chi: Vec<Complex64>,
    pub null: Vec<Complex64>,
    /// ‖reconstruction − F‖/‖F‖.
    pub residual: f64,
}

pub fn expand_field(f: &CVector, basis: &KreinBasis, op: &DiscretizedOperator) -> Result<Expansion> {
    let alpha: Vec<Complex64> = basis.real.iter().map(|r| op.krein(&r.f, f) * r.signature as f64).collect();
    let beta: Vec<Complex64> = basis.pairs.iter().map(|p| op.krein(&p.e, f)).collect();
    let chi: Vec<Complex64> = basis.pairs.iter().map(|p| op.krein(&p.f, f)).collect();
    let null: Vec<Complex64> = basis.null.iter().map(|l| op.krein(&l.f, f) * l.signature as f64).collect();
    let mut rec = CVector::zeros(f.len());
    for (a, r) in alpha.iter().zip(&basis.real) {
        rec += &r.f * *a;
    }
    for ((b, c), p) in beta.iter().zip(&chi).zip(&basis.pairs) {
        rec += &p.f * *b + &p.e * *c;
    }
    for (a, l) in null.iter().zip(&basis.null) {
        rec += &l.f * *a;
    }
    let residual = (rec - f).norm() / f.norm().max(f64::MIN_POSITIVE);
    if residual > TAU_GRAM {
        return Err(Error::IncompleteBasis(residual));
    }
    Ok(Expansion { alpha, beta, chi, null, residual })
}

/// Folded cell order 0, N−1, 1, N−2, … turns the periodic coupling into a
/// band of two cells.
fn folded_position(nz: usize) -> Vec<usize> {
    let mut pos = vec![0; nz];
    for j in 0..nz.div_ceil(2) {
        pos[j] = 2 * j;
        if nz - 1 - j != j {
            pos[nz - 1 - j] = 2 * j + 1;
        }
    }
    pos
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftInvertReport {
    /// Eigenvalues nearest the shift, closest first.
    pub values: Vec<Complex64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Eigenvalues of M⁻¹N nearest `sigma` by subspace iteration on
/// (N − σM)⁻¹M with a banded LU.
pub fn nearest_eigenvalues(op: &DiscretizedOperator, sigma: Complex64, count: usize) -> Result<ShiftInvertReport> {
    let nz = op.grid.nz;
    let n = op.dim();
    let pos = folded_position(nz);
    let map = |i: usize| 6 * pos[i / 6] + i % 6;
    let mut mp = Vec::with_capacity(nz);
    mp.resize(nz, Matrix6::zeros());
    for j in 0..nz {
        mp[pos[j]] = op.blocks[j];
    }
    let mut entries: Vec<(usize, usize, Complex64)> =
        op.entries.iter().map(|&(r, c, v)| (map(r), map(c), v)).collect();
    for (p, b) in mp.iter().enumerate() {
        for r in 0..6 {
            for c in 0..6 {
                if b[(r, c)] != 0.0 {
                    entries.push((6 * p + r, 6 * p + c, -sigma * b[(r, c)]));
                }
            }
        }
    }
    let lu = BandLu::from_entries(n, &entries)?;
    let apply_m = |v: &CVector| {
        let mut out = CVector::zeros(n);
        for (j, b) in mp.iter().enumerate() {
            for r in 0..6 {
                let mut s = ZERO;
                for c in 0..6 {
                    s += v[6 * j + c] * b[(r, c)];
                }
                out[6 * j + r] = s;
            }
        }
        out
    };
    let p = (count + 4).min(n);
    let mut seed = 0x9e3779b97f4a7c15u64;
    let mut rnd = move || {
        seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    let mut x = CMatrix::from_fn(n, p, |_, _| Complex64::new(rnd(), rnd())).qr().q();
    let mut prev: Vec<Complex64> = Vec::new();
    let scale = sigma.norm().max(1.0);
    for it in 1..=500 {
        let mut y = CMatrix::zeros(n, p);
        for c in 0..p {
            y.set_column(c, &lu.solve(&apply_m(&x.column(c).into_owned())));
        }
        let h = x.adjoint() * &y;
        let (_, t) = linalg::schur(&h)?;
        let mut vals: Vec<Complex64> = (0..p).map(|i| sigma + Complex64::from(1.0) / t[(i, i)]).collect();
        vals.sort_by(|u, v| (u - sigma).norm().total_cmp(&(v - sigma).norm()));
        vals.truncate(count);
        let done = prev.len() == vals.len()
            && prev.iter().zip(&vals).all(|(u, v)| (u - v).norm() <= 1e-13 * scale);
        x = y.qr().q();
        if done {
            return Ok(ShiftInvertReport { values: vals, iterations: it, converged: true });
        }
        prev = vals;
    }
    Ok(ShiftInvertReport { values: prev, iterations: 500, converged: false })
}

/// Real part of the eigenvalue of a one-slab stack nearest `guess`.
pub fn discrete_mode_frequency(slab: &MovingSlab, kx: f64, ky: f64, grid: Grid, guess: f64) -> Result<f64> {
    let op = assemble_operators(std::slice::from_ref(slab), kx, ky, grid)?;
    Ok(nearest_eigenvalues(&op, Complex64::from(guess), 1)?.values[0].re)
}

/// Spectral growth rate of a weakly coupled pair against the perturbative
/// √|Ω₁Ω₂| on the same geometry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheck {
    pub nz: usize,
    pub dz: f64,
    pub gap: f64,
    /// γ₀d realized with the gap rounded to whole cells.
    pub gamma0_d: f64,
    pub kx_continuum: f64,
    pub kx_discrete: f64,
    pub omega_prime: f64,
    pub lambda_perturbative: f64,
    pub lambda_spectral: f64,
    pub relative_difference: f64,
}

/// Places slab 1 and slab 2 of thickness h on a grid with
/// `cells_per_thickness` cells across h, separated by the whole-cell gap
/// nearest `gamma0_d/γ₀`, with 2·gap of vacuum across the periodic wrap.
/// The discrete phase match is found again on that grid before the growth
/// rate is read off by shift-invert iteration.
pub fn perturbative_crosscheck(
    b1: &LabBranch,
    b2: &LabBranch,
    gamma0_d: f64,
    cells_per_thickness: usize,
) -> Result<CrossCheck> {
    let h = b1.slab.thickness();
    if (b2.slab.thickness() - h).abs() > 1e-12 * h {
        return Err(Error::InvalidArgument("cross-check needs slabs of equal thickness".into()));
    }
    let kx_c = phase_match(b1, b2, &MatchSearch::default())?;
    let dz = h / cells_per_thickness as f64;
    let probe = CoupledPair::at(b1, b2, kx_c, h)?;
    let ngap = ((gamma0_d / probe.gamma0) / dz).round().max(1.0) as usize;
    let gap = ngap as f64 * dz;
    let nout = 2 * ngap;
    let nz = 2 * cells_per_thickness + ngap + nout;
    let grid = Grid::new(nz as f64 * dz, nz)?;
    let z0 = (nout / 2) as f64 * dz;
    let s1 = b1.slab.placed_at(z0);
    let s2 = b2.slab.placed_at(z0 + h + gap);
    let pair = CoupledPair::at(b1, b2, kx_c, gap)?;
    let cc = coupling_constants(&pair)?;
    let hm = hybridize(&cc, pair.omega_prime)?;

    let ky = b1.ky;
    let detuning = |kx: f64| -> Result<(f64, f64)> {
        let w1 = discrete_mode_frequency(&s1, kx, ky, grid, b1.omega(kx)?)?;
        let w2 = discrete_mode_frequency(&s2, kx, ky, grid, b2.omega(kx)?)?;
        Ok((w1 - w2, w1))
    };
    let (mut xa, mut xb) = (kx_c, kx_c * (1.0 + 1e-2));
    let (mut fa, mut fb) = (detuning(xa)?.0, detuning(xb)?.0);
    for _ in 0..40 {
        if fb == fa {
            break;
        }
        let xc = xb - fb * (xb - xa) / (fb - fa);
        xa = xb;
        fa = fb;
        xb = xc;
        fb = detuning(xb)?.0;
        if fb.abs() <= 1e-13 * xb.abs().max(1.0) {
            break;
        }
    }
    if !(fb.abs() <= 1e-10 * xb.abs().max(1.0)) {
        return Err(Error::NoMatch(format!("discrete phase match did not converge (residual {fb:.3e})")));
    }
    let omega_d = detuning(xb)?.1;
    let op = assemble_operators(&[s1, s2], xb, ky, grid)?;
    let near = nearest_eigenvalues(&op, Complex64::new(omega_d, hm.lambda), 6)?;
    let lambda_spectral = near.values.iter().map(|w| w.im).fold(0.0, f64::max);
    Ok(CrossCheck {
        nz,
        dz,
        gap,
        gamma0_d: pair.gamma0_d(),
        kx_continuum: kx_c,
        kx_discrete: xb,
        omega_prime: pair.omega_prime,
        lambda_perturbative: hm.lambda,
        lambda_spectral,
        relative_difference: (lambda_spectral - hm.lambda).abs() / hm.lambda,
    })
}

/// One spectrum per transverse wavevector, jobs independent.
pub fn spectrum_sweep(
    stack: &[MovingSlab],
    ks: &[(f64, f64)],
    grid: Grid,
    route: SolveRoute,
    mode: ExecMode,
) -> Vec<Result<SpectrumClassification>> {
    exec::map(mode, ks, |&(kx, ky)| {
        let op = assemble_operators(stack, kx, ky, grid)?;
        solve_spectrum_with(&op, route)
    })
}
