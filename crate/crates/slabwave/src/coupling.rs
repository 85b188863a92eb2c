//! Weak coupling of two slabs through their evanescent tails.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::media::{MovingSlab, TAU_SING};
use crate::profile::{canonical_product, krein_product, FieldProfile, PiecewiseWeight};
use crate::slabmodes::{LabBranch, LabModeRecord};

pub const TAU_MATCH: f64 = 1e-9;
/// γ₀d must exceed ln 10 for e^(−2γ₀d) < 0.1·e^(−γ₀d).
pub const PERTURBATIVE_GAMMA0_D: f64 = std::f64::consts::LN_10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchSearch {
    pub kx_min: f64,
    pub kx_max: f64,
    pub probes: usize,
}

impl Default for MatchSearch {
    fn default() -> Self {
        MatchSearch { kx_min: 0.05, kx_max: 500.0, probes: 240 }
    }
}

/// Lab wavenumbers where both branches share a frequency, in increasing
/// order. Probes are log-spaced; each bracket is bisected to rounding.
pub fn phase_match_all(b1: &LabBranch, b2: &LabBranch, search: &MatchSearch) -> Result<Vec<f64>> {
    if !(search.kx_min > 0.0 && search.kx_max > search.kx_min && search.probes >= 2) {
        return Err(Error::InvalidArgument("bad phase-match search range".into()));
    }
    let diff = |k: f64| -> Option<f64> {
        let w1 = b1.omega(k).ok()?;
        let w2 = b2.omega(k).ok()?;
        Some(w1 - w2)
    };
    let ratio = (search.kx_max / search.kx_min).ln() / (search.probes - 1) as f64;
    let ks: Vec<f64> =
        (0..search.probes).map(|i| search.kx_min * (ratio * i as f64).exp()).collect();
    let vals: Vec<Option<f64>> = ks.iter().map(|&k| diff(k)).collect();
    let mut out = Vec::new();
    for i in 1..ks.len() {
        let (Some(a), Some(b)) = (vals[i - 1], vals[i]) else { continue };
        if a == 0.0 {
            out.push(ks[i - 1]);
            continue;
        }
        if a.signum() == b.signum() {
            continue;
        }
        let (mut lo, mut hi, slo) = (ks[i - 1], ks[i], a.signum());
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            match diff(mid) {
                Some(d) if d == 0.0 => {
                    lo = mid;
                    hi = mid;
                    break;
                }
                Some(d) if d.signum() == slo => lo = mid,
                Some(_) => hi = mid,
                None => return Err(Error::NoMatch(format!("branch lost at kx = {mid}"))),
            }
        }
        out.push(0.5 * (lo + hi));
    }
    Ok(out)
}

/// First phase-matched lab wavenumber.
pub fn phase_match(b1: &LabBranch, b2: &LabBranch, search: &MatchSearch) -> Result<f64> {
    phase_match_all(b1, b2, search)?
        .into_iter()
        .next()
        .ok_or_else(|| Error::NoMatch(format!("no crossing in [{}, {}]", search.kx_min, search.kx_max)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPair {
    pub rec1: LabModeRecord,
    pub rec2: LabModeRecord,
    pub slab1: MovingSlab,
    pub slab2: MovingSlab,
    pub gap: f64,
    pub gamma0: f64,
    pub omega_prime: f64,
    pub kx: f64,
    pub ky: f64,
}

impl CoupledPair {
    /// Places slab 2 at distance `gap` above slab 1 and solves both modes at
    /// the lab wavenumber `kx`.
    pub fn at(b1: &LabBranch, b2: &LabBranch, kx: f64, gap: f64) -> Result<CoupledPair> {
        if !(gap > 0.0 && gap.is_finite()) {
            return Err(Error::InvalidArgument(format!("gap must be positive, got {gap}")));
        }
        if b1.ky != b2.ky {
            return Err(Error::InvalidArgument("branches must share ky".into()));
        }
        let slab1 = b1.slab;
        let slab2 = b2.slab.placed_at(slab1.z1 + gap);
        let rec1 = LabBranch { slab: slab1, ..*b1 }.record(kx)?;
        let rec2 = LabBranch { slab: slab2, ..*b2 }.record(kx)?;
        let mismatch = (rec1.omega - rec2.omega).abs();
        if mismatch > TAU_MATCH * rec1.omega.abs() {
            return Err(Error::NoMatch(format!("frequency mismatch {mismatch:e} at kx = {kx}")));
        }
        let omega_prime = 0.5 * (rec1.omega + rec2.omega);
        let gamma0 = (kx * kx + b1.ky * b1.ky - omega_prime * omega_prime).sqrt();
        Ok(CoupledPair { rec1, rec2, slab1, slab2, gap, gamma0, omega_prime, kx, ky: b1.ky })
    }

    /// Phase-matches the branches and sets the gap from the product γ₀d.
    pub fn matched(
        b1: &LabBranch,
        b2: &LabBranch,
        gamma0_d: f64,
        search: &MatchSearch,
    ) -> Result<CoupledPair> {
        let kx = phase_match(b1, b2, search)?;
        let w = b1.omega(kx)?;
        let gamma0 = (kx * kx + b1.ky * b1.ky - w * w).sqrt();
        CoupledPair::at(b1, b2, kx, gamma0_d / gamma0)
    }

    pub fn gamma0_d(&self) -> f64 {
        self.gamma0 * self.gap
    }

    pub fn stack(&self) -> [MovingSlab; 2] {
        [self.slab1, self.slab2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingConstants {
    pub omega1: Complex64,
    pub omega2: Complex64,
    pub e_s1: f64,
    pub e_s2: f64,
    pub gamma0_d: f64,
    pub perturbative: bool,
    /// |Ω₁/Ω₂* − E_s1/E_s2| / |E_s1/E_s2|.
    pub ratio_residual: f64,
    /// |Im(Ω₁Ω₂)| / |Ω₁Ω₂|.
    pub product_imag: f64,
}

impl CouplingConstants {
    pub fn require_perturbative(&self) -> Result<()> {
        if self.perturbative {
            Ok(())
        } else {
            Err(Error::NotPerturbative(self.gamma0_d))
        }
    }
}

/// Ω₁ = ω′⟨F₁|M−M₂|F₂⟩_c/E_s2 and Ω₂ = ω′⟨F₂|M−M₁|F₁⟩_c/E_s1, with the
/// weights evaluated in the lab frame. M − M₂ is the contrast of slab 1
/// alone and vice versa. A small γ₀d is flagged, not rejected.
pub fn coupling_constants(pair: &CoupledPair) -> Result<CouplingConstants> {
    let vac = PiecewiseWeight::identity();
    let contrast1 = PiecewiseWeight::material(&[pair.slab1], 0.0)?.minus(&vac);
    let contrast2 = PiecewiseWeight::material(&[pair.slab2], 0.0)?.minus(&vac);
    let (f1, f2) = (&pair.rec1.profile, &pair.rec2.profile);
    let (e1, e2) = (pair.rec1.e_s, pair.rec2.e_s);
    let w = pair.omega_prime;
    let omega1 = canonical_product(f1, &contrast1, f2) * w / e2;
    let omega2 = canonical_product(f2, &contrast2, f1) * w / e1;
    let target = e1 / e2;
    let ratio_residual = ((omega1 / omega2.conj()) - target).norm() / target.abs();
    let prod = omega1 * omega2;
    let product_imag = prod.im.abs() / prod.norm().max(f64::MIN_POSITIVE);
    let gamma0_d = pair.gamma0_d();
    Ok(CouplingConstants {
        omega1,
        omega2,
        e_s1: e1,
        e_s2: e2,
        gamma0_d,
        perturbative: gamma0_d > PERTURBATIVE_GAMMA0_D,
        ratio_residual,
        product_imag,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HybridKind {
    RealSplitting,
    ComplexPair,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HybridModes {
    pub kind: HybridKind,
    pub omega_prime: f64,
    /// ω′ + iλ for f in the complex case, ω′ + √(Ω₁Ω₂) otherwise.
    pub omega_c: Complex64,
    /// The partner frequency (ω′ − iλ, or ω′ − √(Ω₁Ω₂)).
    pub omega_partner: Complex64,
    pub lambda: f64,
    #[serde(skip)]
    pub f: Option<FieldProfile>,
    #[serde(skip)]
    pub e: Option<FieldProfile>,
    pub ff: Option<Complex64>,
    pub ee: Option<Complex64>,
    pub ef: Option<Complex64>,
    /// ⟨f|f*⟩, zero by transverse-wavevector orthogonality.
    pub f_fconj: Option<Complex64>,
    pub tau_weak: Option<f64>,
}

/// ω = ω′ ± √(Ω₁Ω₂); the sign of E_s1·E_s2 decides the classification.
pub fn hybridize(cc: &CouplingConstants, omega_prime: f64) -> Result<HybridModes> {
    let prod = cc.omega1 * cc.omega2;
    if prod.norm() <= TAU_SING {
        return Err(Error::DegenerateCoupling(prod.norm()));
    }
    let split = prod.norm().sqrt();
    let (kind, d) = if cc.e_s1 * cc.e_s2 < 0.0 {
        (HybridKind::ComplexPair, Complex64::new(0.0, split))
    } else {
        (HybridKind::RealSplitting, Complex64::new(split, 0.0))
    };
    let w = Complex64::new(omega_prime, 0.0);
    Ok(HybridModes {
        kind,
        omega_prime,
        omega_c: w + d,
        omega_partner: w - d,
        lambda: if kind == HybridKind::ComplexPair { split } else { 0.0 },
        f: None,
        e: None,
        ff: None,
        ee: None,
        ef: None,
        f_fconj: None,
        tau_weak: None,
    })
}

/// Growing (f) and decaying (e) hybrid fields with unit cross product and
/// their Krein products under the full two-slab weight.
pub fn hybrid_mode_fields(pair: &CoupledPair, cc: &CouplingConstants, hm: &HybridModes) -> Result<HybridModes> {
    if hm.kind != HybridKind::ComplexPair {
        return Err(Error::InvalidArgument("hybrid fields need opposite wave energies".into()));
    }
    cc.require_perturbative()?;
    let (e1, e2) = (cc.e_s1, cc.e_s2);
    let u = cc.omega1 / cc.omega1.norm();
    let a = u / (2.0 * e1.abs()).sqrt();
    let b = Complex64::i() / (2.0 * e2.abs()).sqrt();
    let s = e1.signum();
    let (f1, f2) = (&pair.rec1.profile, &pair.rec2.profile);
    let f = FieldProfile::combine(&[(a, f1), (b, f2)])?;
    let e = FieldProfile::combine(&[(a * s, f1), (-b * s, f2)])?;
    let stack = pair.stack();
    let ff = krein_product(&f, &stack, &f)?;
    let ee = krein_product(&e, &stack, &e)?;
    let ef = krein_product(&e, &stack, &f)?;
    let f_fconj = krein_product(&f, &stack, &f.conjugate())?;
    Ok(HybridModes {
        f: Some(f),
        e: Some(e),
        ff: Some(ff),
        ee: Some(ee),
        ef: Some(ef),
        f_fconj: Some(f_fconj),
        tau_weak: Some(10.0 * (-cc.gamma0_d).exp()),
        ..hm.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HybridMember {
    Growing,
    Decaying,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassicalTrajectory {
    pub member: HybridMember,
    pub lambda: f64,
    /// Slabs are relabelled so that slab 1 carries the positive energy.
    pub swapped: bool,
    pub t: Vec<f64>,
    pub e_s1: Vec<f64>,
    pub e_s2: Vec<f64>,
    pub p_wv1: Vec<f64>,
    pub p_wv2: Vec<f64>,
    pub p_ps1: Vec<f64>,
    pub p_ps2: Vec<f64>,
    pub f_ext1: Vec<f64>,
    pub f_ext2: Vec<f64>,
    pub dhtot1: Vec<f64>,
    pub dhtot2: Vec<f64>,
    /// (v_i/v_ph)(1 − v_ph v_g,i) − 1 per slab.
    pub bracket: [f64; 2],
    pub velocities: [f64; 2],
}

impl ClassicalTrajectory {
    pub const CSV_HEADER: [&'static str; 11] = [
        "t", "E_s1", "E_s2", "p_wv1", "p_wv2", "p_ps1", "p_ps2", "F_ext1", "F_ext2", "dHtot1", "dHtot2",
    ];

    pub fn rows(&self) -> Vec<[f64; 11]> {
        (0..self.t.len())
            .map(|i| {
                [
                    self.t[i],
                    self.e_s1[i],
                    self.e_s2[i],
                    self.p_wv1[i],
                    self.p_wv2[i],
                    self.p_ps1[i],
                    self.p_ps2[i],
                    self.f_ext1[i],
                    self.f_ext2[i],
                    self.dhtot1[i],
                    self.dhtot2[i],
                ]
            })
            .collect()
    }

    /// Σ v_i F_ext,i at each sample.
    pub fn external_power(&self) -> Vec<f64> {
        (0..self.t.len())
            .map(|i| self.velocities[0] * self.f_ext1[i] + self.velocities[1] * self.f_ext2[i])
            .collect()
    }
}

/// Energy and momentum ledger of one hybrid member over `t_grid`. Works for
/// λ = 0 as well (every rate vanishes).
pub fn classical_trajectory(
    lambda: f64,
    pair: &CoupledPair,
    member: HybridMember,
    t_grid: &[f64],
    mode: ExecMode,
) -> ClassicalTrajectory {
    let swapped = pair.rec1.e_s < 0.0;
    let (r1, r2) = if swapped { (&pair.rec2, &pair.rec1) } else { (&pair.rec1, &pair.rec2) };
    let w = pair.omega_prime;
    let kx = pair.kx;
    let rate = match member {
        HybridMember::Growing => 2.0 * lambda,
        HybridMember::Decaying => -2.0 * lambda,
    };
    let rho = [r1.p_ps / r1.e_s, r2.p_ps / r2.e_s];
    let v = [r1.beta, r2.beta];
    let v_ph = w / kx;
    let v_g = [r1.v_g, r2.v_g];
    let bracket = [0, 1].map(|i| v[i] / v_ph * (1.0 - v_ph * v_g[i]) - 1.0);
    let samples = exec::map(mode, t_grid, |&t| {
        let e1 = 0.5 * (rate * t).exp();
        let e2 = -e1;
        let de = [rate * e1, rate * e2];
        let f_ext = [-rho[0] * de[0], -rho[1] * de[1]];
        [
            e1,
            e2,
            kx / w * e1,
            kx / w * e2,
            rho[0] * e1,
            rho[1] * e2,
            f_ext[0],
            f_ext[1],
            v[0] * f_ext[0] + de[0],
            v[1] * f_ext[1] + de[1],
        ]
    });
    let col = |j: usize| samples.iter().map(|s| s[j]).collect::<Vec<f64>>();
    ClassicalTrajectory {
        member,
        lambda,
        swapped,
        t: t_grid.to_vec(),
        e_s1: col(0),
        e_s2: col(1),
        p_wv1: col(2),
        p_wv2: col(3),
        p_ps1: col(4),
        p_ps2: col(5),
        f_ext1: col(6),
        f_ext2: col(7),
        dhtot1: col(8),
        dhtot2: col(9),
        bracket,
        velocities: v,
    }
}

/// β₂ > 2n/(n²+1) for identical slabs with slab 1 at rest.
pub fn instability_criterion(slab2_beta: f64, n: f64) -> bool {
    if n <= 1.0 {
        return false;
    }
    slab2_beta > 2.0 * n / (n * n + 1.0)
}
