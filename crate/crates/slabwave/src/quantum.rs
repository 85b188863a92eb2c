//! Truncated Fock-space algebra of oscillator pairs with complex frequency
//! ω_c = ω′ + iλ, and the evolution of the pair vacuum (ħ = 1).

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::{self, Dp45Options, Dp45Stats};

pub const TAU_LEAK: f64 = 1e-12;
pub const DEFAULT_EVOLVE_NMAX: usize = 256;
pub const DEFAULT_ALGEBRA_NMAX: usize = 16;

type CMat = DMatrix<Complex64>;

/// Oscillator content of a quantized field: real oscillators (sign-carrying
/// frequencies) and complex pairs (ω′, λ).
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct HamiltonianSpec {
    pub real_oscillators: Vec<f64>,
    pub complex_pairs: Vec<(f64, f64)>,
}

impl HamiltonianSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some((_, l)) = self.complex_pairs.iter().find(|(_, l)| !(*l > 0.0)) {
            return Err(Error::InvalidArgument(format!("complex pair needs lambda > 0, got {l}")));
        }
        Ok(())
    }

    /// ⟨Â_C⟩ + Σ|ω|/2 in the state with every occupation zero.
    pub fn pseudo_ground_strength(&self) -> f64 {
        let r: f64 = self.real_oscillators.iter().map(|w| 0.5 * w.abs()).sum();
        let c: f64 = self.complex_pairs.iter().map(|&(w, l)| 0.5 * w.hypot(l)).sum();
        r + c
    }
}

/// Two-mode truncation (n_a, n_b) ∈ [0, n_max]².
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TruncatedFock {
    pub n_max: usize,
}

impl TruncatedFock {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 2 {
            return Err(Error::InvalidArgument(format!("n_max must be at least 2, got {n_max}")));
        }
        Ok(TruncatedFock { n_max })
    }

    pub fn levels(&self) -> usize {
        self.n_max + 1
    }

    pub fn dim(&self) -> usize {
        self.levels() * self.levels()
    }

    pub fn index(&self, na: usize, nb: usize) -> usize {
        na * self.levels() + nb
    }

    fn ladder(&self, on_a: bool) -> CMat {
        let mut m = CMat::zeros(self.dim(), self.dim());
        for na in 0..=self.n_max {
            for nb in 0..=self.n_max {
                let (src, n) = (self.index(na, nb), if on_a { na } else { nb });
                if n == 0 {
                    continue;
                }
                let dst = if on_a { self.index(na - 1, nb) } else { self.index(na, nb - 1) };
                m[(dst, src)] = Complex64::new((n as f64).sqrt(), 0.0);
            }
        }
        m
    }

    /// Annihilation operator of mode a.
    pub fn a(&self) -> CMat {
        self.ladder(true)
    }

    /// Annihilation operator of mode b.
    pub fn b(&self) -> CMat {
        self.ladder(false)
    }

    /// Indices of states with both occupations ≤ n_max − 2.
    pub fn interior(&self) -> Vec<usize> {
        let top = self.n_max - 2;
        let mut v = Vec::new();
        for na in 0..=top {
            for nb in 0..=top {
                v.push(self.index(na, nb));
            }
        }
        v
    }
}

/// Ĥ = (ω′/2)(ââ† + â†â − b̂b̂† − b̂†b̂) + iλ(â†b̂† − âb̂). The diagonal is
/// written in closed form so the top level is exact.
pub fn build_pair_hamiltonian(omega_prime: f64, lambda: f64, fock: &TruncatedFock) -> CMat {
    let mut h = CMat::zeros(fock.dim(), fock.dim());
    for na in 0..=fock.n_max {
        for nb in 0..=fock.n_max {
            let i = fock.index(na, nb);
            h[(i, i)] = Complex64::new(omega_prime * (na as f64 - nb as f64), 0.0);
            if na < fock.n_max && nb < fock.n_max {
                let j = fock.index(na + 1, nb + 1);
                let v = Complex64::new(0.0, lambda * (((na + 1) * (nb + 1)) as f64).sqrt());
                h[(j, i)] = v;
                h[(i, j)] = v.conj();
            }
        }
    }
    h
}

fn comm(x: &CMat, y: &CMat) -> CMat {
    x * y - y * x
}

fn interior_max(m: &CMat, idx: &[usize]) -> f64 {
    let mut r = 0.0f64;
    for &i in idx {
        for &j in idx {
            r = r.max(m[(i, j)].norm());
        }
    }
    r
}

fn identity_like(dim: usize, c: Complex64) -> CMat {
    CMat::from_diagonal_element(dim, dim, c)
}

/// Square-root branch used for √ω_c; √ω_c* is taken as its conjugate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SqrtBranch {
    Principal,
    Negated,
}

/// β̂ = ½√ω_c(â + b̂†), χ̂ = ½√ω_c*(â − b̂†).
pub fn beta_chi(fock: &TruncatedFock, omega_c: Complex64, branch: SqrtBranch) -> (CMat, CMat) {
    let mut s = omega_c.sqrt();
    if branch == SqrtBranch::Negated {
        s = -s;
    }
    let a = fock.a();
    let bd = fock.b().adjoint();
    let beta = (&a + &bd) * (s * 0.5);
    let chi = (&a - &bd) * (s.conj() * 0.5);
    (beta, chi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommutatorReport {
    pub n_max: usize,
    pub branch: SqrtBranch,
    /// [β†,β], [χ†,χ], [χ,β].
    pub pair_operators: [f64; 3],
    /// [χ†,β] + ω_c/2.
    pub cross_term: f64,
    /// [a,a†] − 1, [b,b†] − 1, [a,b], [a,b†].
    pub ladder: [f64; 4],
    pub hamiltonian: f64,
    pub max_residual: f64,
}

fn commutator_report(fock: &TruncatedFock, omega_c: Complex64, branch: SqrtBranch) -> CommutatorReport {
    let idx = fock.interior();
    let dim = fock.dim();
    let scale = omega_c.norm().max(1.0);
    let (beta, chi) = beta_chi(fock, omega_c, branch);
    let (bd, cd) = (beta.adjoint(), chi.adjoint());
    let a = fock.a();
    let b = fock.b();
    let (ad, bdag) = (a.adjoint(), b.adjoint());
    let one = identity_like(dim, Complex64::new(1.0, 0.0));

    let pair_operators = [
        interior_max(&comm(&bd, &beta), &idx) / scale,
        interior_max(&comm(&cd, &chi), &idx) / scale,
        interior_max(&comm(&chi, &beta), &idx) / scale,
    ];
    let cross_term = interior_max(&(comm(&cd, &beta) + identity_like(dim, omega_c * 0.5)), &idx) / scale;
    let ladder = [
        interior_max(&(comm(&a, &ad) - &one), &idx),
        interior_max(&(comm(&b, &bdag) - &one), &idx),
        interior_max(&comm(&a, &b), &idx),
        interior_max(&comm(&a, &bdag), &idx),
    ];
    let lhs = &cd * &beta + &bd * &chi + &beta * &cd + &chi * &bd;
    let (wp, lam) = (omega_c.re, omega_c.im);
    let rhs = (&a * &ad + &ad * &a - &b * &bdag - &bdag * &b) * Complex64::new(0.5 * wp, 0.0)
        + (&ad * &bdag - &a * &b) * Complex64::new(0.0, lam);
    let hamiltonian = interior_max(&(lhs - rhs), &idx) / scale;
    let max_residual = pair_operators
        .iter()
        .chain(ladder.iter())
        .chain([cross_term, hamiltonian].iter())
        .fold(0.0f64, |m, x| m.max(*x));
    CommutatorReport { n_max: fock.n_max, branch, pair_operators, cross_term, ladder, hamiltonian, max_residual }
}

/// Interior-block residuals of the pair algebra for both square-root
/// branches. Residuals of β̂, χ̂ relations are relative to max(1, |ω_c|).
pub fn verify_commutators(fock: &TruncatedFock, omega_c: Complex64) -> Result<[CommutatorReport; 2]> {
    if fock.n_max < 4 {
        return Err(Error::InvalidArgument("commutator checks need n_max >= 4".into()));
    }
    let reports = [
        commutator_report(fock, omega_c, SqrtBranch::Principal),
        commutator_report(fock, omega_c, SqrtBranch::Negated),
    ];
    for r in &reports {
        if r.max_residual > TAU_LEAK {
            return Err(Error::TruncationLeak(r.max_residual));
        }
    }
    Ok(reports)
}

/// Â_C = β̂β̂† + χ̂χ̂†.
pub fn strength_operator(fock: &TruncatedFock, omega_c: Complex64) -> CMat {
    let (beta, chi) = beta_chi(fock, omega_c, SqrtBranch::Principal);
    &beta * beta.adjoint() + &chi * chi.adjoint()
}

/// ⟨n_a, n_b|Â_C|n_a, n_b⟩ = (|ω_c|/2)(n_a + n_b + 1).
pub fn strength_expectation(omega_c: Complex64, na: f64, nb: f64) -> f64 {
    0.5 * omega_c.norm() * (na + nb + 1.0)
}

/// sech(λt)·tanh(λt)ⁿ.
pub fn analytic_coefficients(lambda: f64, t: f64, n: usize) -> f64 {
    let x = lambda * t;
    if n == 0 {
        return 1.0 / x.cosh();
    }
    x.tanh().powi(n as i32) / x.cosh()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvolveOptions {
    pub n_max: usize,
    pub rtol: f64,
    pub atol: f64,
    /// Enforce λ·t_max ≤ ln(n_max)/2 and |c_{n_max}| ≤ `tail_limit` per step.
    pub tail_guard: bool,
    pub tail_limit: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { n_max: DEFAULT_EVOLVE_NMAX, rtol: 1e-10, atol: 1e-14, tail_guard: true, tail_limit: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FockEvolution {
    pub lambda: f64,
    pub n_max: usize,
    pub t: Vec<f64>,
    /// c_n(t) on the |n, n⟩ chain, one vector per time sample.
    pub c: Vec<Vec<f64>>,
    pub norm: Vec<f64>,
    pub max_tail: f64,
    pub steps: usize,
    pub rejected: usize,
}

/// dc_n/dt = λ[n c_{n−1} − (n+1)c_{n+1}] from c_n(0) = δ_{n0}, truncated at
/// n_max with c_{n_max+1} = 0.
pub fn evolve_pair_vacuum(lambda: f64, t_grid: &[f64], opts: &EvolveOptions) -> Result<FockEvolution> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    if opts.n_max < 2 {
        return Err(Error::InvalidArgument("n_max must be at least 2".into()));
    }
    if t_grid.first().is_some_and(|&t| t != 0.0) {
        return Err(Error::InvalidArgument("time grid must start at 0".into()));
    }
    let t_max = t_grid.last().copied().unwrap_or(0.0);
    let n_max = opts.n_max;
    if opts.tail_guard {
        let limit = (n_max as f64).ln() / 2.0;
        if lambda * t_max > limit {
            return Err(Error::TailOverflow(format!(
                "guard lambda*t_max <= ln(n_max)/2 violated: {:.4} > {:.4} at n_max = {n_max}; raise n_max",
                lambda * t_max,
                limit
            )));
        }
    }
    let mut y0 = vec![0.0; n_max + 1];
    y0[0] = 1.0;
    let rhs = |_t: f64, c: &[f64], d: &mut [f64]| {
        let last = c.len() - 1;
        d[0] = -lambda * c[1];
        for n in 1..last {
            d[n] = lambda * (n as f64 * c[n - 1] - (n + 1) as f64 * c[n + 1]);
        }
        d[last] = lambda * last as f64 * c[last - 1];
    };
    let mut max_tail = 0.0f64;
    let guard = opts.tail_guard;
    let limit = opts.tail_limit;
    let on_step = |t: f64, c: &[f64]| -> Result<()> {
        let tail = c[c.len() - 1].abs();
        max_tail = max_tail.max(tail);
        if guard && tail > limit {
            return Err(Error::TailOverflow(format!(
                "|c_n_max| = {tail:.3e} > {limit:e} at t = {t:.6} (n_max = {n_max}); raise n_max"
            )));
        }
        Ok(())
    };
    let dp = Dp45Options { rtol: opts.rtol, atol: opts.atol, ..Dp45Options::default() };
    let (c, stats): (Vec<Vec<f64>>, Dp45Stats) = ode::integrate(rhs, &y0, t_grid, &dp, on_step)?;
    let norm = c.iter().map(|v| v.iter().map(|x| x * x).sum()).collect();
    Ok(FockEvolution {
        lambda,
        n_max,
        t: t_grid.to_vec(),
        c,
        norm,
        max_tail,
        steps: stats.accepted,
        rejected: stats.rejected,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observables {
    pub t: Vec<f64>,
    pub norm: Vec<f64>,
    pub n_a: Vec<f64>,
    pub n_b: Vec<f64>,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    pub h_mean: Vec<f64>,
    pub strength: Vec<f64>,
}

/// Expectations along the evolved chain: ⟨n_a⟩ = ⟨n_b⟩ = Σ n c_n²,
/// E₁ = ω′(⟨n_a⟩ + ½), E₂ = −ω′(⟨n_b⟩ + ½), ⟨Ĥ⟩ from the chain Hamiltonian
/// and ⟨Â_C⟩ = (|ω_c|/2)(⟨n_a⟩ + ⟨n_b⟩ + 1).
pub fn observables(ev: &FockEvolution, omega_prime: f64) -> Observables {
    let omega_c = Complex64::new(omega_prime, ev.lambda);
    let mut out = Observables {
        t: ev.t.clone(),
        norm: ev.norm.clone(),
        n_a: Vec::new(),
        n_b: Vec::new(),
        e1: Vec::new(),
        e2: Vec::new(),
        h_mean: Vec::new(),
        strength: Vec::new(),
    };
    for c in &ev.c {
        let na: f64 = c.iter().enumerate().map(|(n, x)| n as f64 * x * x).sum();
        let nb = na;
        // diagonal ω′(n − n) vanishes; off-diagonal pairs iλ(n+1)(c_{n+1}c_n − c_n c_{n+1})
        let mut h = Complex64::new(0.0, 0.0);
        for n in 0..c.len() - 1 {
            let v = Complex64::new(0.0, ev.lambda * (n + 1) as f64);
            h += v * c[n + 1] * c[n] + v.conj() * c[n] * c[n + 1];
        }
        out.n_a.push(na);
        out.n_b.push(nb);
        out.e1.push(omega_prime * (na + 0.5));
        out.e2.push(-omega_prime * (nb + 0.5));
        out.h_mean.push(h.re);
        out.strength.push(strength_expectation(omega_c, na, nb));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LadderEffect {
    IncreasesEnergy,
    DecreasesEnergy,
}

/// Energy ω(m + ½) of a real oscillator and what its raising operator does.
pub fn ladder_energy_direction(omega: f64, m: usize) -> (f64, LadderEffect) {
    let e = omega * (m as f64 + 0.5);
    let effect = if omega > 0.0 { LadderEffect::IncreasesEnergy } else { LadderEffect::DecreasesEnergy };
    (e, effect)
}

/// Chain Hamiltonian on |n, n⟩, n ≤ n_max.
pub fn chain_hamiltonian(lambda: f64, n_max: usize) -> CMat {
    let mut h = CMat::zeros(n_max + 1, n_max + 1);
    for n in 0..n_max {
        let v = Complex64::new(0.0, lambda * (n + 1) as f64);
        h[(n + 1, n)] = v;
        h[(n, n + 1)] = v.conj();
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HcTruncation {
    pub n_max: usize,
    pub eigenvalues: Vec<f64>,
    /// |v_{n_max}|² + |v_{n_max−1}|² per eigenvector, in eigenvalue order.
    pub boundary_mass: Vec<f64>,
    pub min_boundary_mass: f64,
    pub smallest_positive: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HcDiagnostic {
    pub lambda: f64,
    pub omega_prime: f64,
    pub truncations: Vec<HcTruncation>,
    /// Relative change of the smallest positive eigenvalue between successive truncations.
    pub relative_shifts: Vec<f64>,
}

/// Diagonalizes the chain Hamiltonian for each truncation. The diagonal
/// ω′(n − n) vanishes on the chain, so only λ enters.
pub fn hc_no_eigenstate_diagnostic(lambda: f64, omega_prime: f64, n_maxes: &[usize]) -> Result<HcDiagnostic> {
    let mut truncations = Vec::new();
    for &n_max in n_maxes {
        if n_max < 2 {
            return Err(Error::InvalidArgument("n_max must be at least 2".into()));
        }
        let h = chain_hamiltonian(lambda, n_max);
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..=n_max).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let boundary_mass: Vec<f64> = order
            .iter()
            .map(|&i| {
                let v = eig.eigenvectors.column(i);
                v[n_max].norm_sqr() + v[n_max - 1].norm_sqr()
            })
            .collect();
        let min_boundary_mass = boundary_mass.iter().cloned().fold(f64::INFINITY, f64::min);
        let scale = lambda.abs().max(f64::MIN_POSITIVE) * 1e-9;
        let smallest_positive = eigenvalues.iter().cloned().filter(|&e| e > scale).reduce(f64::min);
        truncations.push(HcTruncation { n_max, eigenvalues, boundary_mass, min_boundary_mass, smallest_positive });
    }
    let relative_shifts = truncations
        .windows(2)
        .filter_map(|w| match (w[0].smallest_positive, w[1].smallest_positive) {
            (Some(a), Some(b)) => Some((a - b).abs() / a),
            _ => None,
        })
        .collect();
    Ok(HcDiagnostic { lambda, omega_prime, truncations, relative_shifts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hamiltonian_elements() {
        let f = TruncatedFock::new(4).unwrap();
        let h = build_pair_hamiltonian(1.3, 0.2, &f);
        assert_relative_eq!(h[(f.index(3, 1), f.index(3, 1))].re, 1.3 * 2.0);
        assert_eq!(h[(f.index(1, 1), f.index(0, 0))], Complex64::new(0.0, 0.2));
        assert_eq!(h.adjoint(), h);
        let h0 = build_pair_hamiltonian(1.3, 0.0, &f);
        for i in 0..f.dim() {
            for j in 0..f.dim() {
                if i != j {
                    assert_eq!(h0[(i, j)].norm(), 0.0);
                }
            }
        }
    }

    /// Hand-built 2-level check of the interaction element √1·√1.
    #[test]
    fn pair_hamiltonian_matches_ladder_products() {
        let f = TruncatedFock::new(5).unwrap();
        let (a, b) = (f.a(), f.b());
        let (ad, bd) = (a.adjoint(), b.adjoint());
        let (wp, l) = (0.7, 0.3);
        let h = (&a * &ad + &ad * &a - &b * &bd - &bd * &b) * Complex64::new(wp / 2.0, 0.0)
            + (&ad * &bd - &a * &b) * Complex64::new(0.0, l);
        let built = build_pair_hamiltonian(wp, l, &f);
        for &i in &f.interior() {
            for &j in &f.interior() {
                assert!((h[(i, j)] - built[(i, j)]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn algebra_holds_on_interior() {
        let f = TruncatedFock::new(8).unwrap();
        let reps = verify_commutators(&f, Complex64::new(1.0, 0.25)).unwrap();
        for r in reps {
            assert!(r.max_residual <= 1e-12);
        }
    }

    #[test]
    fn coefficients_examples() {
        assert_eq!(analytic_coefficients(1.0, 0.0, 0), 1.0);
        assert_eq!(analytic_coefficients(1.0, 0.0, 3), 0.0);
        let t = 0.5f64.atanh();
        assert_relative_eq!(analytic_coefficients(1.0, t, 0), 0.75f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(analytic_coefficients(1.0, t, 1), 0.433013, epsilon = 1e-6);
    }

    #[test]
    fn ladder_directions() {
        assert_eq!(ladder_energy_direction(1.0, 0), (0.5, LadderEffect::IncreasesEnergy));
        assert_eq!(ladder_energy_direction(-1.0, 0), (-0.5, LadderEffect::DecreasesEnergy));
        assert_eq!(ladder_energy_direction(-1.0, 3).0, -3.5);
    }

    #[test]
    fn guard_rejects_long_windows() {
        let r = evolve_pair_vacuum(1.0, &[0.0, 3.0], &EvolveOptions { n_max: 64, ..Default::default() });
        assert!(matches!(r, Err(Error::TailOverflow(m)) if m.contains("ln(n_max)/2")));
    }

    #[test]
    fn strength_is_smallest_in_pair_vacuum() {
        let f = TruncatedFock::new(6).unwrap();
        let w = Complex64::new(1.1, 0.4);
        let a = strength_operator(&f, w);
        let v0 = a[(0, 0)].re;
        assert_relative_eq!(v0, w.norm() / 2.0, epsilon = 1e-14);
        for na in 0..=4 {
            for nb in 0..=4 {
                let i = f.index(na, nb);
                assert_relative_eq!(a[(i, i)].re, strength_expectation(w, na as f64, nb as f64), epsilon = 1e-13);
                assert!(a[(i, i)].re >= v0 - 1e-14);
            }
        }
    }
}
