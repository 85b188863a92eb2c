use num_complex::Complex64;
use proptest::prelude::*;
use slabwave::quantum::*;
use slabwave::Error;

fn grid(t_max: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| t_max * i as f64 / n as f64).collect()
}

#[test]
fn ode_hits_six_digit_values_at_unit_lambda_t() {
    let ev = evolve_pair_vacuum(0.5, &grid(2.0, 8), &EvolveOptions { n_max: 256, ..Default::default() }).unwrap();
    let c = ev.c.last().unwrap();
    // oracle: sech(1)·tanhⁿ(1) evaluated with std hyperbolics
    let (s, th) = (1.0 / 1f64.cosh(), 1f64.tanh());
    assert!((s - 0.648054).abs() < 5e-7);
    for n in 0..3 {
        let want = s * th.powi(n as i32);
        assert!((c[n] - want).abs() < 5e-7, "c_{n} = {} vs {want}", c[n]);
    }
    assert!((c[1] - 0.493554).abs() < 5e-7 && (c[2] - 0.375888).abs() < 5e-7);
    assert_eq!(ev.c[0][0], 1.0);
    assert!(ev.c[0][1..].iter().all(|&x| x == 0.0));
}

#[test]
fn ode_agrees_with_closed_form_and_keeps_norm() {
    let lam = 0.8;
    let t = grid(2.0 / lam, 40);
    let ev = evolve_pair_vacuum(lam, &t, &EvolveOptions { n_max: 1024, ..Default::default() }).unwrap();
    let mut err = 0.0f64;
    for (ti, c) in t.iter().zip(&ev.c) {
        for (n, x) in c.iter().enumerate().take(65) {
            err = err.max((x - analytic_coefficients(lam, *ti, n)).abs());
        }
    }
    assert!(err <= 1e-8, "{err}");
    let drift = ev.norm.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
    assert!(drift <= 1e-9, "{drift}");
}

#[test]
fn occupation_is_sinh_squared() {
    // series oracle straight from the closed form
    let series: f64 = (0..400).map(|n| n as f64 * analytic_coefficients(1.0, 1.0, n).powi(2)).sum();
    assert!((series - 1.381098).abs() < 5e-7);
    assert!((series - 1f64.sinh().powi(2)).abs() < 1e-12);

    let lam = 1.0;
    let t = grid(1.5, 30);
    let ev = evolve_pair_vacuum(lam, &t, &EvolveOptions { n_max: 256, ..Default::default() }).unwrap();
    let obs = observables(&ev, 0.9);
    for (i, ti) in t.iter().enumerate() {
        assert!((obs.n_a[i] - (lam * ti).sinh().powi(2)).abs() <= 1e-8, "t={ti}");
        assert_eq!(obs.e1[i] + obs.e2[i], 0.0);
        assert!(obs.h_mean[i].abs() <= 1e-12 * (1.0 + obs.n_a[i]));
        assert_eq!(obs.n_a[i], obs.n_b[i]);
    }
}

#[test]
fn plateau_ratio_approaches_one() {
    let c0 = analytic_coefficients(1.0, 12.0, 0);
    for n in 0..6 {
        assert!((analytic_coefficients(1.0, 12.0, n) / c0 - 1.0).abs() < 1e-8);
    }
}

#[test]
fn tail_overflow_names_the_guard() {
    let e = evolve_pair_vacuum(1.0, &[0.0, 2.5], &EvolveOptions { n_max: 64, ..Default::default() }).unwrap_err();
    match e {
        Error::TailOverflow(m) => assert!(m.contains("ln(n_max)/2"), "{m}"),
        other => panic!("{other:?}"),
    }
    // inside the λt window but the last level still fills up
    let e = evolve_pair_vacuum(1.0, &[0.0, 1.38], &EvolveOptions { n_max: 16, ..Default::default() }).unwrap_err();
    assert!(matches!(e, Error::TailOverflow(ref m) if m.contains("|c_n_max|")), "{e:?}");
}

#[test]
fn bad_inputs_rejected() {
    let o = EvolveOptions::default();
    assert!(evolve_pair_vacuum(0.0, &[0.0, 1.0], &o).is_err());
    assert!(evolve_pair_vacuum(1.0, &[0.5, 1.0], &o).is_err());
    assert!(TruncatedFock::new(1).is_err());
    assert!(verify_commutators(&TruncatedFock::new(3).unwrap(), Complex64::new(1.0, 0.1)).is_err());
    assert!(HamiltonianSpec { real_oscillators: vec![], complex_pairs: vec![(1.0, 0.0)] }.validate().is_err());
}

/// Pair Hamiltonian left side against matrix elements written out by hand:
/// diagonal ω′(n_a − n_b) and ⟨n_a+1, n_b+1|·|n_a, n_b⟩ = iλ√((n_a+1)(n_b+1)).
#[test]
fn pair_hamiltonian_against_hand_expansion() {
    let f = TruncatedFock::new(4).unwrap();
    let w = Complex64::new(0.6, 0.35);
    for branch in [SqrtBranch::Principal, SqrtBranch::Negated] {
        let (beta, chi) = beta_chi(&f, w, branch);
        let (bd, cd) = (beta.adjoint(), chi.adjoint());
        let lhs = &cd * &beta + &bd * &chi + &beta * &cd + &chi * &bd;
        for na in 0..=2 {
            for nb in 0..=2 {
                for ma in 0..=2 {
                    for mb in 0..=2 {
                        let want = if (ma, mb) == (na, nb) {
                            Complex64::new(w.re * (na as f64 - nb as f64), 0.0)
                        } else if (ma, mb) == (na + 1, nb + 1) {
                            Complex64::new(0.0, w.im * (((na + 1) * (nb + 1)) as f64).sqrt())
                        } else if (ma + 1, mb + 1) == (na, nb) {
                            Complex64::new(0.0, -w.im * ((na * nb) as f64).sqrt())
                        } else {
                            Complex64::new(0.0, 0.0)
                        };
                        let got = lhs[(f.index(ma, mb), f.index(na, nb))];
                        assert!((got - want).norm() <= 1e-12, "{branch:?} ({ma},{mb})←({na},{nb}): {got} vs {want}");
                    }
                }
            }
        }
    }
}

#[test]
fn pseudo_ground_minimizes_strength() {
    let f = TruncatedFock::new(8).unwrap();
    let w = Complex64::new(-0.4, 0.9);
    let a = strength_operator(&f, w);
    let v0 = a[(0, 0)].re;
    assert!((v0 - w.norm() / 2.0).abs() < 1e-14);
    for &i in &f.interior() {
        assert!(a[(i, i)].re >= v0);
    }
    let spec = HamiltonianSpec { real_oscillators: vec![1.0, -2.0], complex_pairs: vec![(0.6, 0.8)] };
    assert!((spec.pseudo_ground_strength() - (0.5 + 1.0 + 0.5)).abs() < 1e-15);
}

#[test]
fn chain_truncations_do_not_converge() {
    let d = hc_no_eigenstate_diagnostic(1.0, 0.0, &[16, 32, 64, 128]).unwrap();
    assert_eq!(d.relative_shifts.len(), 3);
    for s in &d.relative_shifts {
        assert!(*s > 0.1, "{:?}", d.relative_shifts);
    }
    for t in &d.truncations {
        assert!(t.min_boundary_mass >= 1e-3, "n_max {}: {}", t.n_max, t.min_boundary_mass);
    }
    let free = hc_no_eigenstate_diagnostic(0.0, 0.0, &[16]).unwrap();
    assert!(free.truncations[0].eigenvalues.iter().all(|&e| e == 0.0));
    assert_eq!(free.truncations[0].min_boundary_mass, 0.0);
}

#[test]
fn ladder_examples() {
    assert_eq!(ladder_energy_direction(1.0, 0), (0.5, LadderEffect::IncreasesEnergy));
    assert_eq!(ladder_energy_direction(-1.0, 0), (-0.5, LadderEffect::DecreasesEnergy));
    let (e3, _) = ladder_energy_direction(-1.0, 3);
    assert_eq!(e3, -3.5);
    assert!(e3 < -0.5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn interior_commutators(re in -3.0f64..3.0, im in 0.01f64..3.0, n_max in 4usize..12) {
        let f = TruncatedFock::new(n_max).unwrap();
        let reps = verify_commutators(&f, Complex64::new(re, im)).unwrap();
        for r in &reps {
            prop_assert!(r.max_residual <= 1e-12);
        }
    }

    #[test]
    fn pair_hamiltonian_structure(wp in -3.0f64..3.0, lam in 0.0f64..2.0, n_max in 2usize..7) {
        let f = TruncatedFock::new(n_max).unwrap();
        let h = build_pair_hamiltonian(wp, lam, &f);
        prop_assert_eq!(h.adjoint(), h.clone());
        for na in 0..=n_max {
            for nb in 0..=n_max {
                let i = f.index(na, nb);
                prop_assert!((h[(i, i)].re - wp * (na as f64 - nb as f64)).abs() <= 1e-14 * (1.0 + wp.abs() * n_max as f64));
            }
        }
        prop_assert_eq!(h[(f.index(1, 1), f.index(0, 0))], Complex64::new(0.0, lam));
    }

    #[test]
    fn raising_moves_energy_by_omega(w in -5.0f64..5.0, m in 0usize..50) {
        prop_assume!(w != 0.0);
        let (e0, eff) = ladder_energy_direction(w, m);
        let (e1, _) = ladder_energy_direction(w, m + 1);
        prop_assert!((e1 - e0 - w).abs() <= 1e-12 * (1.0 + w.abs() * m as f64));
        prop_assert_eq!(eff == LadderEffect::IncreasesEnergy, e1 > e0);
    }

    #[test]
    fn closed_form_norm(x in 0.0f64..3.0) {
        let s: f64 = (0..4000).map(|n| analytic_coefficients(1.0, x, n).powi(2)).sum();
        prop_assert!((s - 1.0).abs() <= 1e-9);
    }
}
