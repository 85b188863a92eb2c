#![allow(dead_code)]

use slabwave::coupling::{CoupledPair, MatchSearch, phase_match_all};
use slabwave::media::{MovingSlab, RestFrameMaterial};
use slabwave::slabmodes::{CoSign, LabBranch, Polarization};

pub fn slab(eps: f64, beta: f64) -> MovingSlab {
    MovingSlab::new(RestFrameMaterial::new(eps, 1.0).unwrap(), beta, 0.0, 1.0).unwrap()
}

pub fn branch(eps: f64, beta: f64, sign: CoSign, pol: Polarization) -> LabBranch {
    LabBranch { slab: slab(eps, beta), polarization: pol, branch: 0, sign, ky: 0.0 }
}

/// Slab 1 at rest, slab 2 moving at `beta2` on its counter-propagating
/// branch, matched at the first crossing and separated so that γ₀d equals
/// `gamma0_d`.
pub fn counter_moving_pair(n: f64, beta2: f64, gamma0_d: f64, pol: Polarization) -> Option<CoupledPair> {
    let b1 = branch(n * n, 0.0, CoSign::Positive, pol);
    let b2 = branch(n * n, beta2, CoSign::Negative, pol);
    let k = *phase_match_all(&b1, &b2, &MatchSearch::default()).ok()?.first()?;
    let w = b1.omega(k).ok()?;
    let gamma0 = (k * k - w * w).sqrt();
    CoupledPair::at(&b1, &b2, k, gamma0_d / gamma0).ok()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
