//! Guided modes of a single slab, solved in its rest frame and carried to
//! the lab frame.
//!
//! With half-thickness h, κ = √(n²ω² − k²) inside and γ₀ = √(k² − ω²)
//! outside (k the transverse wavenumber), the symmetric-slab characteristic
//! functions are written in their pole-free forms
//!
//! * even: (κ/p)·sin(κh) − γ₀·cos(κh)
//! * odd:  (κ/p)·cos(κh) + γ₀·sin(κh)
//!
//! with p = μ for TE and p = ε for TM. Branch m has parity m mod 2 and is
//! the (m/2)-th root of its parity, counted upward in ω.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::media::{boost_dispersion_point, lorentz_gamma, MovingSlab, RestFrameMaterial};
use crate::profile::{self, ExpTerm, FieldProfile, Piece};

/// Relative tolerance contract for dispersion roots (bisection runs to
/// machine precision, well inside it).
pub const TAU_ROOT: f64 = 1e-12;
pub const DEFAULT_PROBES: usize = 512;
pub const H_V: f64 = 1e-5;
pub const H_K_REL: f64 = 1e-5;
/// Allowed relative disagreement between Richardson levels.
pub const TAU_RICHARDSON: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "UPPERCASE")]
pub enum Polarization {
    #[default]
    TE,
    TM,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeQuery {
    pub slab: MovingSlab,
    pub kx_co: f64,
    pub ky: f64,
    pub polarization: Polarization,
    pub branch: usize,
}

impl ModeQuery {
    pub fn kt(&self) -> f64 {
        self.kx_co.hypot(self.ky)
    }

    fn with_kx_co(&self, kx_co: f64) -> ModeQuery {
        ModeQuery { kx_co, ..*self }
    }

    fn with_beta(&self, beta: f64) -> ModeQuery {
        ModeQuery { slab: self.slab.with_beta(beta), ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GuidedModeCo {
    pub omega_co: f64,
    pub kappa: f64,
    pub gamma0: f64,
    pub residual: f64,
}

fn parity_weight(mat: RestFrameMaterial, pol: Polarization) -> f64 {
    match pol {
        Polarization::TE => mat.mu,
        Polarization::TM => mat.epsilon,
    }
}

/// Pole-free characteristic function evaluated at interior wavenumber κ.
fn char_kappa(kappa: f64, kt: f64, n2: f64, h: f64, p: f64, odd: bool) -> f64 {
    let omega2 = (kt * kt + kappa * kappa) / n2;
    let gamma0 = (kt * kt - omega2).max(0.0).sqrt();
    let (s, c) = (kappa * h).sin_cos();
    if odd {
        kappa / p * c + gamma0 * s
    } else {
        kappa / p * s - gamma0 * c
    }
}

pub fn solve_comoving_dispersion(q: &ModeQuery) -> Result<GuidedModeCo> {
    solve_comoving_dispersion_with(q, DEFAULT_PROBES)
}

/// Root finding with a configurable probe count. The bracket
/// kt/n < ω < kt is scanned uniformly in κ ∈ (0, kt√(n²−1)), which keeps
/// the roots evenly spaced even when they crowd against ω = kt/n.
pub fn solve_comoving_dispersion_with(q: &ModeQuery, probes: usize) -> Result<GuidedModeCo> {
    let mat = q.slab.material;
    let n2 = mat.n2();
    if n2 - 1.0 <= 1e-14 {
        return Err(Error::NoContrast);
    }
    let kt = q.kt();
    if !(kt > 0.0 && kt.is_finite()) {
        return Err(Error::NoMode { branch: q.branch, k: kt });
    }
    let h = 0.5 * q.slab.thickness();
    let p = parity_weight(mat, q.polarization);
    let odd = q.branch % 2 == 1;
    let want = q.branch / 2;
    let kmax = kt * (n2 - 1.0).sqrt();
    let f = |k: f64| char_kappa(k, kt, n2, h, p, odd);

    // keep at least four probes per half-period of sin(κh) so neighbouring
    // roots of one parity never share a probe interval
    let probes = probes.max(8).max((4.0 * kmax * h / std::f64::consts::PI).ceil() as usize);
    let mut found = 0usize;
    let mut prev_k = kmax * 1e-12;
    let mut prev_f = f(prev_k);
    for i in 1..=probes {
        let k = if i == probes { kmax } else { kmax * i as f64 / probes as f64 };
        let fk = f(k);
        if prev_f == 0.0 || prev_f.signum() != fk.signum() {
            if found == want {
                let kappa = bisect(&f, prev_k, k, prev_f);
                return Ok(mode_from_kappa(kappa, kt, n2, h, p, odd));
            }
            found += 1;
        }
        prev_k = k;
        prev_f = fk;
    }
    Err(Error::NoMode { branch: q.branch, k: kt })
}

fn mode_from_kappa(kappa: f64, kt: f64, n2: f64, h: f64, p: f64, odd: bool) -> GuidedModeCo {
    let omega_co = ((kt * kt + kappa * kappa) / n2).sqrt();
    let gamma0 = (kt * kt - omega_co * omega_co).max(0.0).sqrt();
    let residual = char_kappa(kappa, kt, n2, h, p, odd).abs() / kt;
    GuidedModeCo { omega_co, kappa, gamma0, residual }
}

/// Bisection to machine precision; `flo` is f(lo).
fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, flo: f64) -> f64 {
    let slo = flo.signum();
    if flo == 0.0 {
        return lo;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == slo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Scalar field pieces φ(z) for a slab mode: (coefficient, exponent, z_ref) per piece.
type ScalarPieces = [Vec<(Complex64, Complex64, f64)>; 3];

fn scalar_pieces(mode: &GuidedModeCo, slab: &MovingSlab, odd: bool) -> ScalarPieces {
    let h = 0.5 * slab.thickness();
    let (k, g) = (mode.kappa, mode.gamma0);
    let i = Complex64::i();
    let one = Complex64::new(1.0, 0.0);
    let (inside, phi_lo, phi_hi) = if odd {
        let s = (k * h).sin();
        (vec![(-i * 0.5, i * k, slab.center()), (i * 0.5, -i * k, slab.center())], -s, s)
    } else {
        let c = (k * h).cos();
        (vec![(one * 0.5, i * k, slab.center()), (one * 0.5, -i * k, slab.center())], c, c)
    };
    [
        vec![(one * phi_lo, Complex64::new(g, 0.0), slab.z0)],
        inside,
        vec![(one * phi_hi, Complex64::new(-g, 0.0), slab.z1)],
    ]
}

/// Closed-form co-moving fields of a guided mode, normalized to unit
/// co-moving wave energy. The returned profile's frame moves with the slab.
pub fn mode_field_profile(mode: &GuidedModeCo, q: &ModeQuery) -> Result<FieldProfile> {
    let slab = q.slab;
    let kt = q.kt();
    let (tx, ty) = (q.kx_co / kt, q.ky / kt);
    // ŝ = ẑ × t̂ is the transverse direction of the "TE" component
    let shat = [-ty, tx, 0.0];
    let that = [tx, ty, 0.0];
    let w = mode.omega_co;
    let odd = q.branch % 2 == 1;
    let pieces_phi = scalar_pieces(mode, &slab, odd);
    let media = [RestFrameMaterial::vacuum(), slab.material, RestFrameMaterial::vacuum()];
    let bounds = [(f64::NEG_INFINITY, slab.z0), (slab.z0, slab.z1), (slab.z1, f64::INFINITY)];
    let i = Complex64::i();
    let mut pieces = Vec::with_capacity(3);
    for idx in 0..3 {
        let med = media[idx];
        let terms = pieces_phi[idx]
            .iter()
            .map(|&(c, s, z_ref)| {
                let mut amp = [Complex64::new(0.0, 0.0); 6];
                match q.polarization {
                    Polarization::TE => {
                        let mu = med.mu;
                        for a in 0..3 {
                            amp[a] = c * shat[a];
                            amp[3 + a] = i * s * c * that[a] / (w * mu);
                        }
                        amp[5] += c * kt / (w * mu);
                    }
                    Polarization::TM => {
                        let eps = med.epsilon;
                        for a in 0..3 {
                            amp[3 + a] = c * shat[a];
                            amp[a] = -i * s * c * that[a] / (w * eps);
                        }
                        amp[2] += -c * kt / (w * eps);
                    }
                }
                ExpTerm { amp, s, z_ref }
            })
            .collect();
        pieces.push(Piece {
            z_lo: bounds[idx].0,
            z_hi: bounds[idx].1,
            medium: med,
            body_beta: slab.beta,
            terms,
        });
    }
    let raw = FieldProfile { omega: w, kx: q.kx_co, ky: q.ky, frame_beta: slab.beta, pieces };
    let e = profile::wave_energy(&raw, &[slab])?;
    Ok(raw.scaled(Complex64::new(1.0 / e.sqrt(), 0.0)))
}

/// Fields as seen from a frame relative to which the profile's frame moves
/// at `beta`. Transforming a co-moving profile by the slab velocity yields
/// the lab-frame fields.
pub fn lorentz_transform_fields(f: &FieldProfile, beta: f64) -> FieldProfile {
    f.lorentz(beta)
}

pub fn wave_energy(f: &FieldProfile, stack: &[MovingSlab]) -> Result<f64> {
    profile::wave_energy(f, stack)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabModeRecord {
    pub slab: MovingSlab,
    pub polarization: Polarization,
    pub branch: usize,
    pub beta: f64,
    pub omega_co: f64,
    pub kx_co: f64,
    pub omega: f64,
    pub kx: f64,
    pub ky: f64,
    pub gamma0: f64,
    pub e_s: f64,
    pub e_s_co: f64,
    pub p_wv: f64,
    pub p_ps: f64,
    pub v_ph: f64,
    pub v_g: f64,
    pub v_ph_co: f64,
    pub v_g_co: f64,
    /// ∂ω/∂v at fixed lab kx.
    pub domega_dv: f64,
    /// |(1−β²)∂ω/∂v − kx(1 − v_ph v_g)| / |kx|.
    pub energy_identity_residual: f64,
    pub profile: FieldProfile,
    pub profile_co: FieldProfile,
}

impl LabModeRecord {
    /// The conjugate solution at (−ω, −k): same energy, momenta and velocities.
    pub fn conjugate(&self) -> LabModeRecord {
        LabModeRecord {
            omega_co: -self.omega_co,
            kx_co: -self.kx_co,
            omega: -self.omega,
            kx: -self.kx,
            ky: -self.ky,
            profile: self.profile.conjugate(),
            profile_co: self.profile_co.conjugate(),
            ..self.clone()
        }
    }
}

fn co_omega(q: &ModeQuery, kx_co: f64) -> Result<f64> {
    Ok(solve_comoving_dispersion(&q.with_kx_co(kx_co))?.omega_co)
}

/// Lab frequency at lab wavenumber `kx_lab` for the branch of `q`, with the
/// slab moving at `v`. The co-moving wavenumber is found by inverting the
/// monotone map kx_co ↦ γ(kx_co + v·Ω(kx_co)); `guess` seeds the bracket.
fn lab_omega_at(q: &ModeQuery, v: f64, kx_lab: f64, guess: f64) -> Result<(f64, f64)> {
    let g = lorentz_gamma(v);
    let target = |k: f64| -> Result<f64> { Ok(g * (k + v * co_omega(q, k)?) - kx_lab) };
    let mut step = 1e-6 * (guess.abs() + q.ky.abs()).max(1e-300);
    let (mut lo, mut hi);
    let f0 = target(guess)?;
    if f0 == 0.0 {
        let k = guess;
        return Ok((g * (co_omega(q, k)? + v * k), k));
    }
    // walk against the sign of the residual until it flips
    let dir = if f0 > 0.0 { -1.0 } else { 1.0 };
    let mut prev = guess;
    loop {
        let cand = guess + dir * step;
        if q.ky == 0.0 && cand.signum() != guess.signum() {
            return Err(Error::NoMode { branch: q.branch, k: kx_lab });
        }
        let fc = target(cand)?;
        if fc.signum() != f0.signum() || fc == 0.0 {
            lo = prev.min(cand);
            hi = prev.max(cand);
            break;
        }
        prev = cand;
        step *= 2.0;
        if step > 1e6 * (1.0 + guess.abs()) {
            return Err(Error::NoMode { branch: q.branch, k: kx_lab });
        }
    }
    let flo = target(lo)?;
    let slo = flo.signum();
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = target(mid)?;
        if fm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if fm.signum() == slo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = 0.5 * (lo + hi);
    Ok((g * (co_omega(q, k)? + v * k), k))
}

/// Central difference with one Richardson level and a stability check.
fn richardson<F: Fn(f64) -> Result<f64>>(f: F, x: f64, h: f64) -> Result<f64> {
    let d = |h: f64| -> Result<f64> { Ok((f(x + h)? - f(x - h)?) / (2.0 * h)) };
    let d1 = d(h)?;
    let d2 = d(0.5 * h)?;
    let r = (4.0 * d2 - d1) / 3.0;
    let dis = (r - d2).abs() / r.abs().max(f64::MIN_POSITIVE);
    if dis > TAU_RICHARDSON {
        return Err(Error::DerivativeUnstable(dis));
    }
    Ok(r)
}

/// Full lab-frame record for the mode of `q` (slab velocity `q.slab.beta`).
pub fn lab_mode_record(q: &ModeQuery) -> Result<LabModeRecord> {
    let mode = solve_comoving_dispersion(q)?;
    let beta = q.slab.beta;
    let prof_co = mode_field_profile(&mode, q)?;
    let prof = lorentz_transform_fields(&prof_co, beta);
    let (omega, kx) = boost_dispersion_point(mode.omega_co, q.kx_co, beta);
    let stack = [q.slab];
    let e_s = wave_energy(&prof, &stack)?;
    let e_s_co = wave_energy(&prof_co, &stack)?;

    let kx_co = q.kx_co;
    let domega_dv = richardson(|v| Ok(lab_omega_at(&q.with_beta(v), v, kx, kx_co)?.0), beta, H_V)?;
    let h_k = H_K_REL * kx.abs().max(q.ky.abs());
    let v_g = richardson(|k| Ok(lab_omega_at(q, beta, k, kx_co)?.0), kx, h_k)?;
    let h_kco = H_K_REL * kx_co.abs().max(q.ky.abs());
    let v_g_co = richardson(|k| co_omega(q, k), kx_co, h_kco)?;

    let v_ph = omega / kx;
    let p_wv = kx / omega * e_s;
    let p_ps = (1.0 - beta * beta) / omega * domega_dv * e_s;
    let energy_identity_residual =
        ((1.0 - beta * beta) * domega_dv - kx * (1.0 - v_ph * v_g)).abs() / kx.abs();
    Ok(LabModeRecord {
        slab: q.slab,
        polarization: q.polarization,
        branch: q.branch,
        beta,
        omega_co: mode.omega_co,
        kx_co,
        omega,
        kx,
        ky: q.ky,
        gamma0: mode.gamma0,
        e_s,
        e_s_co,
        p_wv,
        p_ps,
        v_ph,
        v_g,
        v_ph_co: mode.omega_co / kx_co,
        v_g_co,
        domega_dv,
        energy_identity_residual,
        profile: prof,
        profile_co: prof_co,
    })
}

/// Sign of the co-moving frequency of a lab-frame mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoSign {
    Positive,
    Negative,
}

/// A dispersion branch of a moving slab, addressed in lab terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabBranch {
    pub slab: MovingSlab,
    pub polarization: Polarization,
    pub branch: usize,
    pub sign: CoSign,
    pub ky: f64,
}

impl LabBranch {
    fn query(&self, kx_co: f64) -> ModeQuery {
        ModeQuery {
            slab: self.slab,
            kx_co,
            ky: self.ky,
            polarization: self.polarization,
            branch: self.branch,
        }
    }

    /// Co-moving wavenumber (with ω_co > 0) whose boost lands on `kx_lab`.
    fn solve_kx_co(&self, kx_lab: f64) -> Result<f64> {
        let v = self.slab.beta;
        let g = lorentz_gamma(v);
        let guess = kx_lab / g;
        let q = self.query(guess);
        Ok(lab_omega_at(&q, v, kx_lab, guess)?.1)
    }

    /// Lab frequency at lab wavenumber `kx_lab`.
    pub fn omega(&self, kx_lab: f64) -> Result<f64> {
        match self.sign {
            CoSign::Positive => {
                let k = self.solve_kx_co(kx_lab)?;
                let w = co_omega(&self.query(k), k)?;
                Ok(boost_dispersion_point(w, k, self.slab.beta).0)
            }
            CoSign::Negative => {
                let k = self.solve_kx_co(-kx_lab)?;
                let w = co_omega(&self.query(k), k)?;
                Ok(-boost_dispersion_point(w, k, self.slab.beta).0)
            }
        }
    }

    /// Full record at lab wavenumber `kx_lab`.
    pub fn record(&self, kx_lab: f64) -> Result<LabModeRecord> {
        match self.sign {
            CoSign::Positive => lab_mode_record(&self.query(self.solve_kx_co(kx_lab)?)),
            CoSign::Negative => {
                Ok(lab_mode_record(&self.query(self.solve_kx_co(-kx_lab)?))?.conjugate())
            }
        }
    }
}

/// Records for a list of co-moving wavenumbers.
pub fn dispersion_sweep(
    template: &ModeQuery,
    kx_co: &[f64],
    mode: ExecMode,
) -> Vec<Result<LabModeRecord>> {
    exec::map(mode, kx_co, |k| lab_mode_record(&template.with_kx_co(*k)))
}

/// Records of a lab-addressed branch over lab wavenumbers.
pub fn lab_dispersion_sweep(
    branch: &LabBranch,
    kx_lab: &[f64],
    mode: ExecMode,
) -> Vec<Result<LabModeRecord>> {
    exec::map(mode, kx_lab, |k| branch.record(*k))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignTheoremReport {
    pub momentum_lab: f64,
    pub momentum_co: f64,
    pub momentum_residual: f64,
    pub momentum_pass: bool,
    pub energy_negative: bool,
    /// v_ph · v_ph^co < 0 (required when E_s < 0).
    pub phase_velocities_opposed: bool,
    /// v_ph · v > 0 (required when E_s < 0).
    pub phase_velocity_along_motion: bool,
    pub sign_pass: bool,
    pub ky_zero: bool,
}

impl SignTheoremReport {
    pub fn pass(&self) -> bool {
        self.momentum_pass && self.sign_pass
    }
}

/// Frame comparison of the pseudo-momentum per unit volume and the sign
/// implications for negative-energy modes. Energies are per unit transverse
/// area; the body thickness is frame independent, so the volume cancels.
pub fn appendix_c_checks(rec: &LabModeRecord) -> SignTheoremReport {
    let momentum_lab = (1.0 - rec.v_ph * rec.v_g) / rec.v_ph * rec.e_s;
    let momentum_co = (1.0 - rec.v_ph_co * rec.v_g_co) / rec.v_ph_co * rec.e_s_co;
    let momentum_residual = (momentum_lab - momentum_co).abs() / momentum_lab.abs().max(momentum_co.abs());
    let energy_negative = rec.e_s < 0.0;
    let opposed = rec.v_ph * rec.v_ph_co < 0.0;
    let along = rec.v_ph * rec.beta > 0.0;
    let ky_zero = rec.ky == 0.0;
    let sign_pass = !(energy_negative && ky_zero) || (opposed && along);
    SignTheoremReport {
        momentum_lab,
        momentum_co,
        momentum_residual,
        momentum_pass: momentum_residual <= 1e-6,
        energy_negative,
        phase_velocities_opposed: opposed,
        phase_velocity_along_motion: along,
        sign_pass,
        ky_zero,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn slab(eps: f64, beta: f64, d: f64) -> MovingSlab {
        MovingSlab::new(RestFrameMaterial::new(eps, 1.0).unwrap(), beta, 0.0, d).unwrap()
    }

    fn q(eps: f64, beta: f64, kx: f64, pol: Polarization, branch: usize) -> ModeQuery {
        ModeQuery { slab: slab(eps, beta, 1.0), kx_co: kx, ky: 0.0, polarization: pol, branch }
    }

    #[test]
    fn vacuum_slab_has_no_contrast() {
        assert_eq!(solve_comoving_dispersion(&q(1.0, 0.0, 2.0, Polarization::TE, 0)), Err(Error::NoContrast));
    }

    #[test]
    fn roots_sit_in_bracket_and_order_by_branch() {
        let mut last = 0.0;
        for b in 0..4 {
            let m = solve_comoving_dispersion(&q(12.0, 0.0, 6.0, Polarization::TE, b)).unwrap();
            assert!(m.omega_co > 6.0 / 12f64.sqrt() && m.omega_co < 6.0);
            assert!(m.omega_co > last);
            assert!(m.residual < 1e-12);
            last = m.omega_co;
        }
    }

    #[test]
    fn higher_branch_below_cutoff() {
        let r = solve_comoving_dispersion(&q(2.0, 0.0, 0.5, Polarization::TE, 3));
        assert!(matches!(r, Err(Error::NoMode { .. })));
    }

    #[test]
    fn profile_normalized_and_continuous() {
        for pol in [Polarization::TE, Polarization::TM] {
            for b in 0..2 {
                let qq = q(4.0, 0.0, 3.0, pol, b);
                let m = solve_comoving_dispersion(&qq).unwrap();
                let p = mode_field_profile(&m, &qq).unwrap();
                assert_relative_eq!(wave_energy(&p, &[qq.slab]).unwrap(), 1.0, epsilon = 1e-12);
                for face in [0.0, 1.0] {
                    let a = p.eval(face - 1e-13);
                    let c = p.eval(face + 1e-13);
                    let scale = a.iter().map(|x| x.norm()).fold(0.0, f64::max);
                    // tangential E (x, y) and H (x, y) components continue
                    for idx in [0, 1, 3, 4] {
                        assert!((a[idx] - c[idx]).norm() <= 1e-10 * scale, "{pol:?} {b} {idx}");
                    }
                }
                let d = 0.37;
                let f1 = p.eval(1.0);
                let f2 = p.eval(1.0 + d);
                let ratio = f2.iter().map(|x| x.norm()).sum::<f64>() / f1.iter().map(|x| x.norm()).sum::<f64>();
                assert_relative_eq!(ratio, (-m.gamma0 * d).exp(), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn te0_is_even_te1_odd() {
        for (b, sign) in [(0usize, 1.0), (1, -1.0)] {
            let qq = q(4.0, 0.0, 3.0, Polarization::TE, b);
            let p = mode_field_profile(&solve_comoving_dispersion(&qq).unwrap(), &qq).unwrap();
            for u in [0.1, 0.3, 0.45, 0.8, 2.0] {
                let a = p.eval(0.5 + u)[1];
                let c = p.eval(0.5 - u)[1];
                assert!((a - c * sign).norm() < 1e-12 * (1.0 + a.norm()));
            }
        }
    }

    /// N F = ω M F checked pointwise with finite differences in z.
    #[test]
    fn profiles_solve_maxwell_in_every_frame() {
        let qq = ModeQuery { slab: slab(4.0, 0.7, 1.0), kx_co: 2.5, ky: 0.8, polarization: Polarization::TM, branch: 0 };
        let rec = lab_mode_record(&qq).unwrap();
        for p in [&rec.profile_co, &rec.profile] {
            let i = Complex64::i();
            for z in [-0.7, 0.2, 0.55, 1.9] {
                let h = 1e-5;
                let f = p.eval(z);
                let dz: Vec<Complex64> = p.eval(z + h).iter().zip(p.eval(z - h).iter()).map(|(a, b)| (a - b) / (2.0 * h)).collect();
                let (kx, ky) = (p.kx, p.ky);
                let curl = |a: [Complex64; 3], da: [Complex64; 3]| {
                    [i * ky * a[2] - da[1], da[0] - i * kx * a[2], i * kx * a[1] - i * ky * a[0]]
                };
                let ch = curl([f[3], f[4], f[5]], [dz[3], dz[4], dz[5]]);
                let ce = curl([f[0], f[1], f[2]], [dz[0], dz[1], dz[2]]);
                let g = p.eval_g(z);
                let scale = f.iter().map(|x| x.norm()).fold(0.0, f64::max) * (1.0 + kx.abs() + ky.abs());
                for a in 0..3 {
                    assert!((i * ch[a] - g[a] * p.omega).norm() < 1e-7 * scale);
                    assert!((-i * ce[a] - g[3 + a] * p.omega).norm() < 1e-7 * scale);
                }
            }
        }
    }

    #[test]
    fn rest_record_is_trivial() {
        let rec = lab_mode_record(&q(12.0, 0.0, 2.0, Polarization::TE, 0)).unwrap();
        assert_relative_eq!(rec.omega, rec.omega_co);
        assert_relative_eq!(rec.e_s, 1.0, epsilon = 1e-12);
        assert_relative_eq!(rec.p_wv, rec.kx / rec.omega, epsilon = 1e-12);
        assert!(appendix_c_checks(&rec).pass());
    }

    #[test]
    fn lorentz_round_trip() {
        let qq = q(4.0, 0.6, 2.0, Polarization::TE, 0);
        let rec = lab_mode_record(&qq).unwrap();
        let back = lorentz_transform_fields(&rec.profile, -0.6);
        for z in [-1.0, 0.3, 0.9, 2.5] {
            let a = back.eval(z);
            let b = rec.profile_co.eval(z);
            let s = b.iter().map(|x| x.norm()).fold(0.0, f64::max);
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).norm() <= 1e-12 * s);
            }
        }
        assert_eq!(lorentz_transform_fields(&rec.profile, 0.0), rec.profile);
    }

    #[test]
    fn negative_branch_lands_on_requested_lab_k() {
        let br = LabBranch { slab: slab(4.0, 0.9, 1.0), polarization: Polarization::TE, branch: 0, sign: CoSign::Negative, ky: 0.0 };
        let rec = br.record(3.0).unwrap();
        assert_relative_eq!(rec.kx, 3.0, epsilon = 1e-12);
        assert_relative_eq!(rec.omega, br.omega(3.0).unwrap(), epsilon = 1e-12);
        assert!(rec.omega_co < 0.0);
    }
}
