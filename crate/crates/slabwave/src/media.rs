//! Constitutive matrices of uniformly moving, non-dispersive media and the
//! relativistic kinematics used by the rest of the crate.
//!
//! Natural units: c = ε₀ = μ₀ = 1. Velocities are along x̂.
//! Field ordering everywhere is F = (Ex, Ey, Ez, Hx, Hy, Hz), and the
//! material matrix maps F to G = (Dx, Dy, Dz, Bx, By, Bz).

use nalgebra::{Matrix6, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on 1 − n²β² and on scaled matrix eigenvalues.
pub const TAU_SING: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestFrameMaterial {
    pub epsilon: f64,
    pub mu: f64,
}

impl RestFrameMaterial {
    pub fn new(epsilon: f64, mu: f64) -> Result<Self> {
        let m = RestFrameMaterial { epsilon, mu };
        m.validate()?;
        Ok(m)
    }

    pub const fn vacuum() -> Self {
        RestFrameMaterial { epsilon: 1.0, mu: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.mu.is_finite()) {
            return Err(Error::InvalidMaterial("epsilon and mu must be finite".into()));
        }
        if self.mu <= 0.0 {
            return Err(Error::InvalidMaterial(format!("mu = {} must be positive", self.mu)));
        }
        if self.epsilon * self.mu < 1.0 {
            return Err(Error::InvalidMaterial(format!(
                "n^2 = epsilon*mu = {} must be at least 1",
                self.epsilon * self.mu
            )));
        }
        Ok(())
    }

    pub fn n2(&self) -> f64 {
        self.epsilon * self.mu
    }

    pub fn index(&self) -> f64 {
        self.n2().sqrt()
    }

    pub fn is_vacuum(&self) -> bool {
        self.epsilon == 1.0 && self.mu == 1.0
    }
}

/// A body occupying z0 ≤ z < z1, moving with velocity `beta` along x̂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovingSlab {
    pub material: RestFrameMaterial,
    pub beta: f64,
    pub z0: f64,
    pub z1: f64,
}

impl MovingSlab {
    pub fn new(material: RestFrameMaterial, beta: f64, z0: f64, z1: f64) -> Result<Self> {
        let s = MovingSlab { material, beta, z0, z1 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        check_beta(self.beta)?;
        if !(self.z0.is_finite() && self.z1.is_finite() && self.z1 > self.z0) {
            return Err(Error::InvalidSlab(format!("extent [{}, {}) is empty", self.z0, self.z1)));
        }
        Ok(())
    }

    pub fn thickness(&self) -> f64 {
        self.z1 - self.z0
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.z0 + self.z1)
    }

    pub fn contains(&self, z: f64) -> bool {
        z >= self.z0 && z < self.z1
    }

    /// Same body translated so that it starts at `z0`.
    pub fn placed_at(&self, z0: f64) -> MovingSlab {
        MovingSlab { z0, z1: z0 + self.thickness(), ..*self }
    }

    /// Same body with a different velocity.
    pub fn with_beta(&self, beta: f64) -> MovingSlab {
        MovingSlab { beta, ..*self }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !beta.is_finite() || beta.abs() >= 1.0 {
        return Err(Error::Superluminal(beta));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaterialMatrix {
    /// Row-major 6×6 entries.
    pub m: [[f64; 6]; 6],
    pub eps_t: f64,
    pub mu_t: f64,
    pub a: f64,
    pub beta: f64,
    pub n: f64,
}

impl MaterialMatrix {
    pub fn identity() -> Self {
        build_material_matrix(RestFrameMaterial::vacuum(), 0.0).expect("vacuum is regular")
    }

    pub fn to_matrix6(&self) -> Matrix6<f64> {
        Matrix6::from_fn(|i, j| self.m[i][j])
    }

    pub fn apply(&self, f: &[f64; 6]) -> [f64; 6] {
        let mut g = [0.0; 6];
        for (i, gi) in g.iter_mut().enumerate() {
            *gi = (0..6).map(|j| self.m[i][j] * f[j]).sum();
        }
        g
    }
}

/// Constitutive matrix of a medium with rest-frame (ε, μ) moving at `beta`.
pub fn build_material_matrix(material: RestFrameMaterial, beta: f64) -> Result<MaterialMatrix> {
    material.validate()?;
    check_beta(beta)?;
    let (eps, mu) = (material.epsilon, material.mu);
    let n2 = eps * mu;
    let b2 = beta * beta;
    let den = 1.0 - n2 * b2;
    if den.abs() <= TAU_SING {
        return Err(Error::SingularMaterial { beta, gap: den.abs() });
    }
    let eps_t = eps * (1.0 - b2) / den;
    let mu_t = mu * (1.0 - b2) / den;
    let a = beta * (n2 - 1.0) / den;

    // M = [[ε̄, aX], [-aX, μ̄]] with X the matrix of x̂ × (·).
    let mut m = [[0.0; 6]; 6];
    m[0][0] = eps;
    m[1][1] = eps_t;
    m[2][2] = eps_t;
    m[3][3] = mu;
    m[4][4] = mu_t;
    m[5][5] = mu_t;
    // Dy = ε_t Ey − a Hz, Dz = ε_t Ez + a Hy
    m[1][5] = -a;
    m[2][4] = a;
    // By = μ_t Hy + a Ez, Bz = μ_t Hz − a Ey
    m[4][2] = a;
    m[5][1] = -a;
    Ok(MaterialMatrix { m, eps_t, mu_t, a, beta, n: n2.sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DefinitenessTag {
    PositiveDefinite,
    Indefinite,
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Definiteness {
    pub tag: DefinitenessTag,
    pub min_eigenvalue: f64,
}

pub fn classify_definiteness(mm: &MaterialMatrix) -> Definiteness {
    let eig = SymmetricEigen::new(mm.to_matrix6()).eigenvalues;
    let scale = mm
        .m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, x| acc.max(x.abs()));
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let min_abs = eig.iter().fold(f64::INFINITY, |acc, x| acc.min(x.abs()));
    let tag = if min_abs <= TAU_SING * scale {
        DefinitenessTag::Singular
    } else if min > 0.0 {
        DefinitenessTag::PositiveDefinite
    } else {
        DefinitenessTag::Indefinite
    };
    Definiteness { tag, min_eigenvalue: min }
}

/// Classification straight from (material, β); reports `Singular` at the
/// Cherenkov resonance, where the matrix itself cannot be built.
pub fn classify_material(material: RestFrameMaterial, beta: f64) -> Result<Definiteness> {
    match build_material_matrix(material, beta) {
        Ok(mm) => Ok(classify_definiteness(&mm)),
        Err(Error::SingularMaterial { .. }) => Ok(Definiteness {
            tag: DefinitenessTag::Singular,
            min_eigenvalue: 0.0,
        }),
        Err(e) => Err(e),
    }
}

/// Bisection on β ∈ [0, 0.999] for the PositiveDefinite → not-PD flip.
pub fn locate_definiteness_flip(material: RestFrameMaterial) -> Result<f64> {
    let pd = |b: f64| -> Result<bool> {
        // sign of the spectrum itself; the relative Singular window around
        // the resonance would otherwise bias the located edge
        Ok(classify_material(material, b)?.min_eigenvalue > 0.0)
    };
    let (mut lo, mut hi) = (0.0f64, 0.999f64);
    if !pd(lo)? {
        return Err(Error::InvalidArgument("material is not positive definite at rest".into()));
    }
    if pd(hi)? {
        return Err(Error::InvalidArgument("no flip below beta = 0.999".into()));
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pd(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// (β_c, β_refined) = (1/n, 2n/(n²+1)).
pub fn cherenkov_thresholds(material: RestFrameMaterial) -> (f64, f64) {
    let n = material.index();
    (1.0 / n, 2.0 * n / (n * n + 1.0))
}

pub fn lorentz_gamma(beta: f64) -> f64 {
    1.0 / (1.0 - beta * beta).sqrt()
}

/// Lab-frame (ω, kx) of a wave with (omega, kx) in a frame moving at `beta`.
pub fn boost_dispersion_point(omega: f64, kx: f64, beta: f64) -> (f64, f64) {
    let g = lorentz_gamma(beta);
    (g * (omega + beta * kx), g * (kx + beta * omega))
}

pub fn velocity_addition(v_co: f64, v: f64) -> f64 {
    (v_co + v) / (1.0 + v_co * v)
}
