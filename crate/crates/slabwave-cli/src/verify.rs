//! One-shot invariant suite over a configuration, written as a RunReport.

use crate::commands::{pair_run, quantum_pair, run_evolution, spectrum_of};
use crate::config::{LambdaSpec, RunConfig};
use crate::error::CliError;
use crate::output::{render_json, OutDir};
use num_complex::Complex64;
use serde::Serialize;
use slabwave::media::locate_definiteness_flip;
use slabwave::quantum::{analytic_coefficients, verify_commutators, TruncatedFock};
use slabwave::slabmodes::appendix_c_checks;
use slabwave::spectral::{build_krein_basis, quartet_report, verify_commutator_kernel, verify_completeness};
use slabwave::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub checks: Vec<Check>,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub exit_code: i32,
}

#[derive(Default)]
struct Builder {
    checks: Vec<Check>,
}

impl Builder {
    fn measure(&mut self, name: impl Into<String>, residual: f64, tolerance: f64) {
        let status = if residual <= tolerance { Status::Pass } else { Status::Fail };
        // a NaN residual fails and is reported through the note
        let (residual, note) =
            if residual.is_finite() { (Some(residual), None) } else { (None, Some(format!("non-finite residual {residual}"))) };
        self.checks.push(Check { name: name.into(), status, residual, tolerance, note });
    }

    fn skip(&mut self, name: impl Into<String>, tolerance: f64, why: String) {
        self.checks.push(Check { name: name.into(), status: Status::Skipped, residual: None, tolerance, note: Some(why) });
    }

    fn error(&mut self, name: impl Into<String>, tolerance: f64, e: &CliError) {
        self.checks.push(Check {
            name: name.into(),
            status: Status::Fail,
            residual: None,
            tolerance,
            note: Some(e.message.clone()),
        });
    }
}

pub fn run_checks(cfg: &RunConfig) -> RunReport {
    let tol = cfg.tolerances;
    let mut b = Builder::default();
    let slabs = cfg.slabs();

    for (i, s) in slabs.iter().enumerate() {
        let n = s.material.index();
        if n > 1.0 {
            match locate_definiteness_flip(s.material) {
                Ok(flip) => b.measure(format!("media.flip[{i}]"), (flip - 1.0 / n).abs(), tol.flip),
                Err(e) => b.error(format!("media.flip[{i}]"), tol.flip, &e.into()),
            }
            let br = slabwave::slabmodes::LabBranch {
                slab: *s,
                polarization: cfg.mode.polarization,
                branch: cfg.mode.branch,
                sign: cfg.mode.sign,
                ky: cfg.mode.ky,
            };
            match br.record(cfg.mode.kx) {
                Ok(rec) => {
                    b.measure(format!("slabmodes.energy_identity[{i}]"), rec.energy_identity_residual, tol.energy_identity);
                    let ok = appendix_c_checks(&rec).pass();
                    b.measure(format!("slabmodes.sign_theorem[{i}]"), if ok { 0.0 } else { 1.0 }, 0.0);
                }
                Err(e @ Error::NoMode { .. }) => {
                    b.skip(format!("slabmodes.energy_identity[{i}]"), tol.energy_identity, e.to_string());
                }
                Err(e) => b.error(format!("slabmodes.energy_identity[{i}]"), tol.energy_identity, &e.into()),
            }
        }
    }

    if slabs.len() == 2 {
        match pair_run(cfg) {
            Ok(run) => {
                b.measure("coupling.ratio_identity", run.cc.ratio_residual, tol.ratio_identity);
                b.measure("coupling.product_imag", run.cc.product_imag, tol.product_imag);
            }
            Err(e) if e.code == 5 => b.skip("coupling.ratio_identity", tol.ratio_identity, e.message),
            Err(e) => b.error("coupling.ratio_identity", tol.ratio_identity, &e),
        }
    }

    let mut spectral_lambda = None;
    match spectrum_of(cfg) {
        Ok((op, spec)) => {
            let definite = op.is_positive_definite();
            let (tc, tk) = if definite {
                (tol.completeness, tol.kernel)
            } else {
                (tol.completeness_indefinite, tol.kernel_indefinite)
            };
            b.measure("spectral.hermiticity", op.hermiticity_residual(), tol.hermiticity);
            match quartet_report(&op, &spec) {
                Ok(q) => b.measure("spectral.quartet", q.residual(), tol.quartet),
                Err(e) => b.error("spectral.quartet", tol.quartet, &e.into()),
            }
            b.measure("spectral.null_product", spec.null_product_residual, tol.null_product);
            match build_krein_basis(&spec, &op) {
                Ok(basis) => {
                    b.measure("spectral.gram", basis.gram_residual, tol.gram);
                    b.measure("spectral.completeness", verify_completeness(&basis, &op), tc);
                    b.measure("spectral.kernel", verify_commutator_kernel(&basis, &op), tk);
                }
                Err(e) => b.error("spectral.gram", tol.gram, &e.into()),
            }
            spectral_lambda = spec.complex_pairs.iter().map(|p| p.omega).max_by(|a, c| a.im.total_cmp(&c.im));
        }
        Err(e) => b.error("spectral.hermiticity", tol.hermiticity, &e),
    }

    let pair = match cfg.quantum.lambda {
        LambdaSpec::Value(_) => quantum_pair(cfg).ok(),
        LambdaSpec::Source(_) => spectral_lambda.map(|w| (w.im, cfg.quantum.omega_prime.unwrap_or(w.re))),
    };
    match pair {
        Some((lambda, omega_prime)) => {
            let fock = TruncatedFock::new(16).expect("n_max 16");
            match verify_commutators(&fock, Complex64::new(omega_prime, lambda)) {
                Ok(reps) => {
                    let worst = reps.iter().map(|r| r.max_residual).fold(0.0, f64::max);
                    b.measure("quantum.commutators", worst, tol.commutators);
                }
                Err(e) => b.error("quantum.commutators", tol.commutators, &e.into()),
            }
            match run_evolution(cfg, lambda) {
                Ok(ev) => {
                    let drift = ev.norm.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
                    b.measure("quantum.norm", drift, tol.norm);
                    let top = (ev.n_max / 4).min(64);
                    let mut err = 0.0f64;
                    for (t, c) in ev.t.iter().zip(&ev.c) {
                        for (n, x) in c.iter().enumerate().take(top + 1) {
                            err = err.max((x - analytic_coefficients(lambda, *t, n)).abs());
                        }
                    }
                    b.measure("quantum.closed_form", err, tol.closed_form);
                }
                Err(e) => b.error("quantum.norm", tol.norm, &e),
            }
        }
        None => b.skip("quantum.commutators", tol.commutators, "no complex pair to quantize".into()),
    }

    let count = |s: Status| b.checks.iter().filter(|c| c.status == s).count();
    let (passed, failed, skipped) = (count(Status::Pass), count(Status::Fail), count(Status::Skipped));
    RunReport { passed, failed, skipped, exit_code: if failed > 0 { 1 } else { 0 }, checks: b.checks }
}

impl RunReport {
    pub fn table(&self) -> String {
        let w = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
        let mut s = format!("{:<w$}  {:<7}  {:>10}  {:>10}  note\n", "check", "status", "residual", "tolerance");
        for c in &self.checks {
            let status = serde_json::to_value(c.status).expect("enum");
            let r = c.residual.map(|x| format!("{x:.3e}")).unwrap_or_else(|| "-".into());
            s.push_str(&format!(
                "{:<w$}  {:<7}  {:>10}  {:>10.3e}  {}\n",
                c.name,
                status.as_str().expect("string"),
                r,
                c.tolerance,
                c.note.as_deref().unwrap_or("")
            ));
        }
        s.push_str(&format!("{} passed, {} failed, {} skipped\n", self.passed, self.failed, self.skipped));
        s
    }
}

pub fn verify(cfg: &RunConfig, out: &mut OutDir) -> Result<String, CliError> {
    let report = run_checks(cfg);
    let value = serde_json::to_value(&report).expect("report serializes");
    out.write("report.json", &render_json(&value)?)?;
    let table = report.table();
    out.write("report.txt", &table)?;
    if report.failed > 0 {
        let names: Vec<String> = report
            .checks
            .iter()
            .filter(|c| c.status == Status::Fail)
            .map(|c| match c.residual {
                Some(r) => format!("{} (residual {r:.3e} > tolerance {:.3e})", c.name, c.tolerance),
                None => format!("{} ({})", c.name, c.note.as_deref().unwrap_or("error")),
            })
            .collect();
        print!("{table}");
        return Err(CliError::verify(format!("verify failed: {}", names.join(", "))));
    }
    Ok(table)
}
