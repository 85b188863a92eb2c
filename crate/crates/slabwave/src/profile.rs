//! Piecewise-analytic six-component fields F(z) = (E, H) and exact integrals
//! of their sesquilinear forms.
//!
//! On each z-interval a field is a finite sum of terms `amp · exp(s (z − z_ref))`
//! with complex `s`. Trigonometric interiors and exponential tails of slab
//! modes are both of this form, as are their Lorentz transforms and linear
//! combinations, so every integral of `conj(F1)ᵀ W F2` against a piecewise
//! constant weight `W` has a closed form.
//!
//! The transverse dependence `exp(i(kx x + ky y − ω t))` is implicit.

use nalgebra::Matrix6;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::media::{build_material_matrix, lorentz_gamma, MovingSlab, RestFrameMaterial};

pub type C6 = [Complex64; 6];

const ZERO6: C6 = [Complex64 { re: 0.0, im: 0.0 }; 6];

#[derive(Debug, Clone, PartialEq)]
pub struct ExpTerm {
    pub amp: C6,
    pub s: Complex64,
    pub z_ref: f64,
}

impl ExpTerm {
    fn factor(&self, z: f64) -> Complex64 {
        (self.s * (z - self.z_ref)).exp()
    }
}

/// One interval of a profile together with the medium that fills it.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub z_lo: f64,
    pub z_hi: f64,
    pub medium: RestFrameMaterial,
    /// Lab-frame velocity of the medium in this interval.
    pub body_beta: f64,
    pub terms: Vec<ExpTerm>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldProfile {
    pub omega: f64,
    pub kx: f64,
    pub ky: f64,
    /// Velocity of the observing frame relative to the lab (0 = lab frame).
    pub frame_beta: f64,
    /// Sorted, contiguous, covering (−∞, ∞).
    pub pieces: Vec<Piece>,
}

fn relative_velocity(body: f64, frame: f64) -> f64 {
    (body - frame) / (1.0 - body * frame)
}

fn medium_matrix(medium: RestFrameMaterial, body_beta: f64, frame_beta: f64) -> Matrix6<f64> {
    if medium.is_vacuum() {
        return Matrix6::identity();
    }
    build_material_matrix(medium, relative_velocity(body_beta, frame_beta))
        .expect("profile media are validated when the profile is built")
        .to_matrix6()
}

fn mat_vec(m: &Matrix6<f64>, v: &C6) -> C6 {
    let mut out = ZERO6;
    for (i, o) in out.iter_mut().enumerate() {
        for (j, vj) in v.iter().enumerate() {
            *o += *vj * m[(i, j)];
        }
    }
    out
}

/// (e^x − 1)/x without cancellation near 0.
fn phi1(x: Complex64) -> Complex64 {
    if x.norm() < 0.1 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for k in 2..16 {
            term = term * x / k as f64;
            sum += term;
        }
        sum
    } else {
        (x.exp() - 1.0) / x
    }
}

/// ∫_lo^hi exp(conj(s1)(z − r1) + s2(z − r2)) dz; either limit may be infinite.
fn term_integral(t1: &ExpTerm, t2: &ExpTerm, lo: f64, hi: f64) -> Complex64 {
    let s1c = t1.s.conj();
    let sigma = s1c + t2.s;
    let at = |z: f64| (s1c * (z - t1.z_ref) + t2.s * (z - t2.z_ref)).exp();
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => {
            let len = hi - lo;
            at(lo) * len * phi1(sigma * len)
        }
        (true, false) => {
            if sigma.re >= 0.0 {
                return Complex64::new(f64::NAN, f64::NAN);
            }
            -at(lo) / sigma
        }
        (false, true) => {
            if sigma.re <= 0.0 {
                return Complex64::new(f64::NAN, f64::NAN);
            }
            at(hi) / sigma
        }
        (false, false) => Complex64::new(f64::NAN, f64::NAN),
    }
}

/// Piecewise-constant 6×6 weight. `mats[i]` applies between `breaks[i−1]`
/// and `breaks[i]`, with the ends extending to ±∞.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseWeight {
    pub breaks: Vec<f64>,
    pub mats: Vec<Matrix6<f64>>,
}

impl PiecewiseWeight {
    pub fn constant(m: Matrix6<f64>) -> Self {
        PiecewiseWeight { breaks: vec![], mats: vec![m] }
    }

    pub fn identity() -> Self {
        Self::constant(Matrix6::identity())
    }

    /// M(z) of a stack of slabs as seen from a frame moving at `frame_beta`.
    pub fn material(stack: &[MovingSlab], frame_beta: f64) -> Result<Self> {
        let mut slabs: Vec<&MovingSlab> = stack.iter().collect();
        slabs.sort_by(|a, b| a.z0.total_cmp(&b.z0));
        for w in slabs.windows(2) {
            if w[1].z0 < w[0].z1 {
                return Err(Error::InvalidSlab("slabs overlap".into()));
            }
        }
        let mut breaks = Vec::new();
        let mut mats = vec![Matrix6::identity()];
        for s in slabs {
            s.validate()?;
            let m = if s.material.is_vacuum() {
                Matrix6::identity()
            } else {
                build_material_matrix(s.material, relative_velocity(s.beta, frame_beta))?
                    .to_matrix6()
            };
            if breaks.last() == Some(&s.z0) {
                *mats.last_mut().unwrap() = m;
            } else {
                breaks.push(s.z0);
                mats.push(m);
            }
            breaks.push(s.z1);
            mats.push(Matrix6::identity());
        }
        Ok(PiecewiseWeight { breaks, mats })
    }

    pub fn at(&self, z: f64) -> &Matrix6<f64> {
        let idx = self.breaks.partition_point(|b| *b <= z);
        &self.mats[idx]
    }

    /// Pointwise combination of two weights on the union of their breaks.
    pub fn zip_with<F>(&self, other: &PiecewiseWeight, f: F) -> PiecewiseWeight
    where
        F: Fn(&Matrix6<f64>, &Matrix6<f64>) -> Matrix6<f64>,
    {
        let breaks = merge_breaks(&[&self.breaks, &other.breaks]);
        let mats = sample_points(&breaks)
            .into_iter()
            .map(|z| f(self.at(z), other.at(z)))
            .collect();
        PiecewiseWeight { breaks, mats }
    }

    pub fn minus(&self, other: &PiecewiseWeight) -> PiecewiseWeight {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn map<F>(&self, f: F) -> PiecewiseWeight
    where
        F: Fn(&Matrix6<f64>) -> Matrix6<f64>,
    {
        PiecewiseWeight { breaks: self.breaks.clone(), mats: self.mats.iter().map(f).collect() }
    }
}

fn merge_breaks(lists: &[&[f64]]) -> Vec<f64> {
    let mut all: Vec<f64> = lists.iter().flat_map(|l| l.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}

/// One interior point per interval of a break list (including the two ends).
fn sample_points(breaks: &[f64]) -> Vec<f64> {
    if breaks.is_empty() {
        return vec![0.0];
    }
    let mut pts = Vec::with_capacity(breaks.len() + 1);
    pts.push(breaks[0] - 1.0);
    for w in breaks.windows(2) {
        pts.push(0.5 * (w[0] + w[1]));
    }
    pts.push(breaks[breaks.len() - 1] + 1.0);
    pts
}

/// x̂·(A × B) as a matrix on (A, B) halves of a 6-vector pair:
/// returns J with conj(U)ᵀ J V = x̂·(conj(U_a) × V_b), where U_a = U[0..3], V_b = V[3..6].
fn cross_x_matrix() -> Matrix6<f64> {
    let mut j = Matrix6::zeros();
    j[(1, 5)] = 1.0;
    j[(2, 4)] = -1.0;
    j
}

impl FieldProfile {
    fn piece_index(&self, z: f64) -> usize {
        self.pieces
            .iter()
            .position(|p| z >= p.z_lo && z < p.z_hi)
            .unwrap_or(self.pieces.len() - 1)
    }

    pub fn eval(&self, z: f64) -> C6 {
        let p = &self.pieces[self.piece_index(z)];
        let mut out = ZERO6;
        for t in &p.terms {
            let f = t.factor(z);
            for (o, a) in out.iter_mut().zip(t.amp.iter()) {
                *o += *a * f;
            }
        }
        out
    }

    /// Local material matrix of the profile's own media, in the profile's frame.
    pub fn local_matrix(&self, z: f64) -> Matrix6<f64> {
        let p = &self.pieces[self.piece_index(z)];
        medium_matrix(p.medium, p.body_beta, self.frame_beta)
    }

    /// G = (D, B) = M·F using the profile's own media.
    pub fn eval_g(&self, z: f64) -> C6 {
        mat_vec(&self.local_matrix(z), &self.eval(z))
    }

    pub fn breaks(&self) -> Vec<f64> {
        self.pieces.iter().skip(1).map(|p| p.z_lo).collect()
    }

    pub fn scaled(&self, c: Complex64) -> FieldProfile {
        let mut out = self.clone();
        for p in &mut out.pieces {
            for t in &mut p.terms {
                for a in t.amp.iter_mut() {
                    *a *= c;
                }
            }
        }
        out
    }

    /// The complex-conjugate solution, living at (−ω, −k).
    pub fn conjugate(&self) -> FieldProfile {
        let mut out = self.clone();
        out.omega = -self.omega;
        out.kx = -self.kx;
        out.ky = -self.ky;
        for p in &mut out.pieces {
            for t in &mut p.terms {
                t.s = t.s.conj();
                for a in t.amp.iter_mut() {
                    *a = a.conj();
                }
            }
        }
        out
    }

    /// Same wavevector (to rounding) as `other`.
    pub fn same_k(&self, other: &FieldProfile) -> bool {
        let scale = 1.0 + self.kx.abs().max(self.ky.abs());
        (self.kx - other.kx).abs() <= 1e-9 * scale && (self.ky - other.ky).abs() <= 1e-9 * scale
    }

    /// Σ c_i F_i for profiles sharing (ω, k) and frame. Each interval takes
    /// the first non-vacuum medium found among the constituents.
    pub fn combine(parts: &[(Complex64, &FieldProfile)]) -> Result<FieldProfile> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty combination".into()))?
            .1;
        for (_, p) in parts {
            let scale = 1.0 + first.omega.abs();
            if !first.same_k(p)
                || (p.omega - first.omega).abs() > 1e-9 * scale
                || (p.frame_beta - first.frame_beta).abs() > 1e-15
            {
                return Err(Error::InvalidArgument(
                    "combined profiles must share omega, k and frame".into(),
                ));
            }
        }
        let break_lists: Vec<Vec<f64>> = parts.iter().map(|(_, p)| p.breaks()).collect();
        let refs: Vec<&[f64]> = break_lists.iter().map(|v| v.as_slice()).collect();
        let breaks = merge_breaks(&refs);
        let mids = sample_points(&breaks);
        let mut pieces = Vec::with_capacity(mids.len());
        for (i, z) in mids.iter().enumerate() {
            let z_lo = if i == 0 { f64::NEG_INFINITY } else { breaks[i - 1] };
            let z_hi = if i == breaks.len() { f64::INFINITY } else { breaks[i] };
            let mut medium = RestFrameMaterial::vacuum();
            let mut body_beta = 0.0;
            let mut terms = Vec::new();
            for (c, p) in parts {
                let src = &p.pieces[p.piece_index(*z)];
                if medium.is_vacuum() && !src.medium.is_vacuum() {
                    medium = src.medium;
                    body_beta = src.body_beta;
                }
                for t in &src.terms {
                    let mut amp = t.amp;
                    for a in amp.iter_mut() {
                        *a *= *c;
                    }
                    terms.push(ExpTerm { amp, s: t.s, z_ref: t.z_ref });
                }
            }
            pieces.push(Piece { z_lo, z_hi, medium, body_beta, terms });
        }
        Ok(FieldProfile {
            omega: first.omega,
            kx: first.kx,
            ky: first.ky,
            frame_beta: first.frame_beta,
            pieces,
        })
    }

    /// Fields seen from a frame relative to which the current frame moves at
    /// `beta` along x̂. (E, B) and (D, H) transform alike.
    pub fn lorentz(&self, beta: f64) -> FieldProfile {
        if beta == 0.0 {
            return self.clone();
        }
        let g = lorentz_gamma(beta);
        let (omega, kx) = crate::media::boost_dispersion_point(self.omega, self.kx, beta);
        let mut out = self.clone();
        out.omega = omega;
        out.kx = kx;
        out.frame_beta = relative_velocity(self.frame_beta, beta);
        for p in &mut out.pieces {
            let m = medium_matrix(p.medium, p.body_beta, self.frame_beta);
            for t in &mut p.terms {
                let f = t.amp;
                let gv = mat_vec(&m, &f);
                let (e, h) = (&f[0..3], &f[3..6]);
                let (d, b) = (&gv[0..3], &gv[3..6]);
                t.amp = [
                    e[0],
                    (e[1] + b[2] * beta) * g,
                    (e[2] - b[1] * beta) * g,
                    h[0],
                    (h[1] - d[2] * beta) * g,
                    (h[2] + d[1] * beta) * g,
                ];
            }
        }
        out
    }

    /// Largest |Re s| among tail terms: the slowest exterior decay rate.
    pub fn slowest_decay(&self) -> f64 {
        let ends = [&self.pieces[0], &self.pieces[self.pieces.len() - 1]];
        ends.iter()
            .flat_map(|p| p.terms.iter())
            .map(|t| t.s.re.abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Pseudo-momentum density Re[x̂·(D*×B − E*×H)] at z (the F, F* form of
    /// the frame-invariant bilinear).
    pub fn pseudo_momentum_density(&self, z: f64) -> f64 {
        let f = self.eval(z);
        let g = self.eval_g(z);
        let dxb = g[1].conj() * g[5] - g[2].conj() * g[4];
        let exh = f[1].conj() * f[5] - f[2].conj() * f[4];
        (dxb - exh).re
    }

    /// Lagrangian-type invariant ½Re(D*·E − B*·H) at z.
    pub fn lagrangian_density(&self, z: f64) -> f64 {
        let f = self.eval(z);
        let g = self.eval_g(z);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..3 {
            acc += g[i].conj() * f[i] - g[i + 3].conj() * f[i + 3];
        }
        0.5 * acc.re
    }
}

/// ∫ conj(F1)ᵀ W F2 dz. Zero exactly when the transverse wavevectors differ.
pub fn bilinear(f1: &FieldProfile, w: &PiecewiseWeight, f2: &FieldProfile) -> Complex64 {
    if !f1.same_k(f2) {
        return Complex64::new(0.0, 0.0);
    }
    let breaks = merge_breaks(&[&f1.breaks(), &f2.breaks(), &w.breaks]);
    let mids = sample_points(&breaks);
    let mut total = Complex64::new(0.0, 0.0);
    for (i, z) in mids.iter().enumerate() {
        let lo = if i == 0 { f64::NEG_INFINITY } else { breaks[i - 1] };
        let hi = if i == breaks.len() { f64::INFINITY } else { breaks[i] };
        let p1 = &f1.pieces[f1.piece_index(*z)];
        let p2 = &f2.pieces[f2.piece_index(*z)];
        let m = w.at(*z);
        for t1 in &p1.terms {
            for t2 in &p2.terms {
                let wa = mat_vec(m, &t2.amp);
                let mut coeff = Complex64::new(0.0, 0.0);
                for (a, b) in t1.amp.iter().zip(wa.iter()) {
                    coeff += a.conj() * b;
                }
                if coeff == Complex64::new(0.0, 0.0) {
                    continue;
                }
                total += coeff * term_integral(t1, t2, lo, hi);
            }
        }
    }
    total
}

/// Krein product ⟨F1|F2⟩ = ½∫ F1*·M·F2 dz for the given stack (frame taken from F1).
pub fn krein_product(f1: &FieldProfile, stack: &[MovingSlab], f2: &FieldProfile) -> Result<Complex64> {
    let w = PiecewiseWeight::material(stack, f1.frame_beta)?;
    Ok(bilinear(f1, &w, f2) * 0.5)
}

/// Canonical product ⟨F1|W|F2⟩_c = ½∫ F1*·W·F2 dz.
pub fn canonical_product(f1: &FieldProfile, w: &PiecewiseWeight, f2: &FieldProfile) -> Complex64 {
    bilinear(f1, w, f2) * 0.5
}

/// ½∫ F*·M·F dz per unit transverse area.
pub fn wave_energy(f: &FieldProfile, stack: &[MovingSlab]) -> Result<f64> {
    Ok(krein_product(f, stack, f)?.re)
}

/// ∫ Re[x̂·(D*×B)] dz with D, B from the stack's M.
pub fn wave_momentum_direct(f: &FieldProfile, stack: &[MovingSlab]) -> Result<f64> {
    let j = cross_x_matrix();
    let w = PiecewiseWeight::material(stack, f.frame_beta)?.map(|m| m.transpose() * j * m);
    Ok(bilinear(f, &w, f).re)
}

/// ∫ Re[x̂·(D*×B − E*×H)] dz with D, B from the stack's M.
pub fn pseudo_momentum_direct(f: &FieldProfile, stack: &[MovingSlab]) -> Result<f64> {
    let j = cross_x_matrix();
    let w = PiecewiseWeight::material(stack, f.frame_beta)?.map(|m| m.transpose() * j * m - j);
    Ok(bilinear(f, &w, f).re)
}

/// Composite-Simpson estimate of ½∫F*·M·F dz on a sampled grid with
/// `per_piece` intervals per finite piece; used only to cross-check the
/// closed form. Tails are truncated where they fall below e^(−20).
pub fn wave_energy_sampled(f: &FieldProfile, stack: &[MovingSlab], per_piece: usize) -> Result<f64> {
    let w = PiecewiseWeight::material(stack, f.frame_beta)?;
    let coarse = simpson_energy(f, &w, per_piece);
    let fine = simpson_energy(f, &w, 2 * per_piece);
    let err = (fine - coarse).abs() / fine.abs().max(f64::MIN_POSITIVE);
    if err > 1e-8 {
        return Err(Error::GridTooCoarse(err));
    }
    Ok(fine)
}

fn simpson_energy(f: &FieldProfile, w: &PiecewiseWeight, per_piece: usize) -> f64 {
    let n = (per_piece.max(2) + 1) & !1;
    let tail = 20.0 / f.slowest_decay();
    let mut breaks = merge_breaks(&[&f.breaks(), &w.breaks]);
    let lo = breaks[0] - tail;
    let hi = breaks[breaks.len() - 1] + tail;
    breaks.insert(0, lo);
    breaks.push(hi);
    let density = |z: f64| {
        let v = f.eval(z);
        let mv = mat_vec(w.at(z), &v);
        0.5 * v.iter().zip(mv.iter()).map(|(a, b)| (a.conj() * b).re).sum::<f64>()
    };
    let mut total = 0.0;
    for seg in breaks.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let h = (b - a) / n as f64;
        // evaluate just inside the interval so each side uses its own piece
        let inset = |z: f64| z.clamp(a + 1e-12 * h, b - 1e-12 * h);
        let mut s = density(inset(a)) + density(inset(b));
        for i in 1..n {
            let wgt = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += wgt * density(a + i as f64 * h);
        }
        total += s * h / 3.0;
    }
    total
}
