use crate::config::{Format, LambdaSpec, Member, RunConfig};
use crate::error::CliError;
use crate::output::{num, render_json, Csv, OutDir};
use num_complex::Complex64;
use serde_json::{json, Map, Value};
use slabwave::coupling::{
    classical_trajectory, coupling_constants, hybrid_mode_fields, hybridize, phase_match, ClassicalTrajectory,
    CoupledPair, CouplingConstants, HybridKind, HybridMember, HybridModes, MatchSearch,
};
use slabwave::media::{build_material_matrix, cherenkov_thresholds, classify_definiteness, MaterialMatrix};
use slabwave::quantum::{evolve_pair_vacuum, observables, EvolveOptions, FockEvolution};
use slabwave::slabmodes::{lab_dispersion_sweep, LabBranch};
use slabwave::spectral::{
    assemble_operators, build_krein_basis, quartet_report, solve_spectrum_with, verify_commutator_kernel,
    verify_completeness, DiscretizedOperator, SpectrumClassification,
};
use slabwave::{Error, ExecMode};

pub fn complex(z: Complex64) -> Result<Value, CliError> {
    Ok(json!({ "re": num(z.re)?, "im": num(z.im)? }))
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn matrix_json(mm: &MaterialMatrix) -> Result<Value, CliError> {
    let rows: Result<Vec<Value>, CliError> =
        mm.m.iter().map(|r| r.iter().map(|&x| num(x)).collect::<Result<Vec<_>, _>>().map(Value::Array)).collect();
    Ok(Value::Array(rows?))
}

pub fn material(cfg: &RunConfig, out: &mut OutDir) -> Result<String, CliError> {
    let mut slabs = Vec::new();
    let mut summary = String::new();
    for (i, s) in cfg.slabs().iter().enumerate() {
        let mm = build_material_matrix(s.material, s.beta).map_err(|e| CliError::from(e).context(&format!("stack[{i}]")))?;
        let d = classify_definiteness(&mm);
        let (bc, br) = cherenkov_thresholds(s.material);
        summary.push_str(&format!("stack[{i}]: n = {}, beta = {}, {:?}\n", s.material.index(), s.beta, d.tag));
        slabs.push(json!({
            "index": i,
            "epsilon": num(s.material.epsilon)?,
            "mu": num(s.material.mu)?,
            "beta": num(s.beta)?,
            "z0": num(s.z0)?,
            "z1": num(s.z1)?,
            "n": num(mm.n)?,
            "matrix": matrix_json(&mm)?,
            "eps_t": num(mm.eps_t)?,
            "mu_t": num(mm.mu_t)?,
            "a": num(mm.a)?,
            "definiteness": serde_json::to_value(d.tag).expect("enum"),
            "min_eigenvalue": num(d.min_eigenvalue)?,
            "cherenkov_threshold": num(bc)?,
            "refined_threshold": num(br)?,
        }));
    }
    let background = classify_definiteness(&MaterialMatrix::identity());
    let v = json!({
        "background": { "definiteness": serde_json::to_value(background.tag).expect("enum") },
        "slabs": slabs,
    });
    if cfg.output.wants(Format::Json) {
        out.write("material.json", &render_json(&v)?)?;
    }
    summary.push_str(&format!("background: {:?}\n", background.tag));
    Ok(summary)
}

fn branch_for(cfg: &RunConfig, i: usize, sign: slabwave::slabmodes::CoSign) -> LabBranch {
    let m = &cfg.mode;
    LabBranch { slab: cfg.slabs()[i], polarization: m.polarization, branch: m.branch, sign, ky: m.ky }
}

pub const DISPERSION_HEADER: [&str; 7] = ["kx_lab", "omega_lab", "E_s", "p_wv", "p_ps", "v_ph", "v_g"];

pub fn dispersion(cfg: &RunConfig, out: &mut OutDir) -> Result<String, CliError> {
    if cfg.stack.len() != 1 {
        return Err(CliError::config(format!("dispersion needs exactly one slab, got {}", cfg.stack.len())));
    }
    let m = &cfg.mode;
    let br = branch_for(cfg, 0, m.sign);
    let ks = linspace(m.kx_min, m.kx_max, m.kx_points);
    let mut csv = Csv::new(&DISPERSION_HEADER);
    let mut missing = 0;
    for r in lab_dispersion_sweep(&br, &ks, ExecMode::Parallel) {
        match r {
            Ok(rec) => csv.row(vec![rec.kx, rec.omega, rec.e_s, rec.p_wv, rec.p_ps, rec.v_ph, rec.v_g]),
            Err(Error::NoMode { .. }) => missing += 1,
            Err(e) => return Err(CliError::from(e).context("stack[0]")),
        }
    }
    let solved = ks.len() - missing;
    if solved == 0 {
        return Err(CliError::new(4, format!("stack[0]: no guided mode at any of {} points", ks.len())));
    }
    csv.note(format!("solved {solved} of {} points; {missing} without a guided mode", ks.len()));
    csv.note(format!("polarization {:?}, branch {}, sign {:?}, ky {}", m.polarization, m.branch, m.sign, m.ky));
    if cfg.output.wants(Format::Csv) {
        out.write("dispersion.csv", &csv.render()?)?;
    }
    Ok(format!("dispersion: {solved} of {} points solved\n", ks.len()))
}

pub struct PairRun {
    pub pair: CoupledPair,
    pub cc: CouplingConstants,
    pub hm: HybridModes,
}

/// Builds the coupled pair from stack[0] and stack[1].
pub fn pair_run(cfg: &RunConfig) -> Result<PairRun, CliError> {
    if cfg.stack.len() != 2 {
        return Err(CliError::config(format!("a coupled pair needs exactly two slabs, got {}", cfg.stack.len())));
    }
    let p = &cfg.pair;
    let b1 = branch_for(cfg, 0, p.signs[0]);
    let b2 = branch_for(cfg, 1, p.signs[1]);
    let kx = match p.kx {
        Some(k) => k,
        None => phase_match(&b1, &b2, &MatchSearch::default())?,
    };
    let gap = match (p.gap, p.gamma0_d) {
        (Some(g), _) => g,
        (None, Some(gd)) => {
            let w = b1.omega(kx).map_err(|e| CliError::from(e).context("stack[0]"))?;
            gd / (kx * kx + cfg.mode.ky * cfg.mode.ky - w * w).sqrt()
        }
        (None, None) => {
            let g = cfg.stack[1].z0 - cfg.stack[0].z1;
            if !(g > 0.0) {
                return Err(CliError::config("pair: stack[1] must sit above stack[0] when no gap is given".into()));
            }
            g
        }
    };
    let pair = CoupledPair::at(&b1, &b2, kx, gap)?;
    let cc = coupling_constants(&pair)?;
    let hm = hybridize(&cc, pair.omega_prime)?;
    Ok(PairRun { pair, cc, hm })
}

fn trajectory(cfg: &RunConfig, run: &PairRun) -> ClassicalTrajectory {
    let lam = run.hm.lambda;
    let t_max = cfg.pair.t_max.unwrap_or(if lam > 0.0 { 1.0 / lam } else { 1.0 / run.pair.omega_prime.abs() });
    let t = linspace(0.0, t_max, cfg.pair.t_points);
    let member = match cfg.pair.member {
        Member::Growing => HybridMember::Growing,
        Member::Decaying => HybridMember::Decaying,
    };
    classical_trajectory(lam, &run.pair, member, &t, ExecMode::Parallel)
}

pub fn hybridize_cmd(cfg: &RunConfig, out: &mut OutDir) -> Result<String, CliError> {
    let run = pair_run(cfg)?;
    let (pair, cc, hm) = (&run.pair, &run.cc, &run.hm);
    let tr = trajectory(cfg, &run);
    let power = tr.external_power();
    let mean_power = power.iter().sum::<f64>() / power.len() as f64;
    let mut v = Map::new();
    v.insert("kx".into(), num(pair.kx)?);
    v.insert("ky".into(), num(pair.ky)?);
    v.insert("omega_prime".into(), num(pair.omega_prime)?);
    v.insert("gap".into(), num(pair.gap)?);
    v.insert("gamma0_d".into(), num(cc.gamma0_d)?);
    v.insert("perturbative".into(), Value::Bool(cc.perturbative));
    v.insert("e_s1".into(), num(cc.e_s1)?);
    v.insert("e_s2".into(), num(cc.e_s2)?);
    v.insert("omega1".into(), complex(cc.omega1)?);
    v.insert("omega2".into(), complex(cc.omega2)?);
    v.insert("ratio_residual".into(), num(cc.ratio_residual)?);
    v.insert("product_imag".into(), num(cc.product_imag)?);
    v.insert("classification".into(), serde_json::to_value(hm.kind).expect("enum"));
    v.insert("omega_c".into(), complex(hm.omega_c)?);
    v.insert("omega_partner".into(), complex(hm.omega_partner)?);
    match hm.kind {
        HybridKind::ComplexPair => {
            v.insert("lambda".into(), num(hm.lambda)?);
            if cc.perturbative {
                let f = hybrid_mode_fields(pair, cc, hm)?;
                let mut products = Map::new();
                for (k, z) in [("ff", f.ff), ("ee", f.ee), ("ef", f.ef), ("f_fconj", f.f_fconj)] {
                    if let Some(z) = z {
                        products.insert(k.into(), complex(z)?);
                    }
                }
                if let Some(t) = f.tau_weak {
                    products.insert("tau_weak".into(), num(t)?);
                }
                v.insert("products".into(), Value::Object(products));
            }
        }
        HybridKind::RealSplitting => {
            v.insert("delta_omega".into(), num(0.5 * (hm.omega_c.re - hm.omega_partner.re))?);
        }
    }
    v.insert("bracket".into(), json!([num(tr.bracket[0])?, num(tr.bracket[1])?]));
    v.insert("mean_external_power".into(), num(mean_power)?);
    let mut csv = Csv::new(&ClassicalTrajectory::CSV_HEADER);
    for r in tr.rows() {
        csv.row(r.to_vec());
    }
    csv.note(format!("member {:?}, lambda {}, omega_prime {}", cfg.pair.member, hm.lambda, pair.omega_prime));
    if cfg.output.wants(Format::Json) {
        out.write("hybridize.json", &render_json(&Value::Object(v))?)?;
    }
    if cfg.output.wants(Format::Csv) {
        out.write("hybridize.csv", &csv.render()?)?;
    }
    Ok(format!("hybridize: {:?} at kx = {}, lambda = {}\n", hm.kind, pair.kx, hm.lambda))
}

pub fn spectrum_of(cfg: &RunConfig) -> Result<(DiscretizedOperator, SpectrumClassification), CliError> {
    let op = assemble_operators(&cfg.slabs(), cfg.mode.kx, cfg.mode.ky, cfg.grid())?;
    let spec = solve_spectrum_with(&op, cfg.domain.route)?;
    Ok((op, spec))
}

pub fn spectrum(cfg: &RunConfig, out: &mut OutDir) -> Result<String, CliError> {
    let (op, spec) = spectrum_of(cfg)?;
    let q = quartet_report(&op, &spec)?;
    let basis = build_krein_basis(&spec, &op)?;
    let completeness = verify_completeness(&basis, &op);
    let kernel = verify_commutator_kernel(&basis, &op);
    let (pos, neg) = basis.signature_counts();
    let records = serde_json::to_value(spec.records()).expect("records serialize");
    let v = json!({
        "kx": num(spec.kx)?,
        "ky": num(spec.ky)?,
        "lz": num(spec.grid.lz)?,
        "nz": spec.grid.nz,
        "route": serde_json::to_value(spec.route).expect("enum"),
        "max_abs_omega": num(spec.max_abs_omega)?,
        "max_lambda": num(spec.max_lambda())?,
        "condition": num(spec.condition)?,
        "counts": {
            "real": spec.real_modes.len(),
            "complex_pairs": spec.complex_pairs.len(),
            "null": spec.null_modes.len(),
            "positive_signature": pos,
            "negative_signature": neg,
        },
        "residuals": {
            "hermiticity": num(op.hermiticity_residual())?,
            "quartet_conj": num(q.conj_residual)?,
            "quartet_cross_k": num(q.cross_k_residual)?,
            "mirror": num(q.mirror_residual)?,
            "null_product": num(spec.null_product_residual)?,
            "gram": num(basis.gram_residual)?,
            "completeness": num(completeness)?,
            "kernel": num(kernel)?,
        },
        "eigenvalues": records,
    });
    if cfg.output.wants(Format::Json) {
        out.write("spectrum.json", &render_json(&v)?)?;
    }
    Ok(format!(
        "spectrum: {} real, {} complex pair(s), {} null; max lambda {}\n",
        spec.real_modes.len(),
        spec.complex_pairs.len(),
        spec.null_modes.len(),
        spec.max_lambda()
    ))
}

/// (λ, ω′) for the quantum commands.
pub fn quantum_pair(cfg: &RunConfig) -> Result<(f64, f64), CliError> {
    let q = &cfg.quantum;
    match q.lambda {
        LambdaSpec::Value(l) => Ok((l, q.omega_prime.unwrap_or(1.0))),
        LambdaSpec::Source(_) => {
            let (_, spec) = spectrum_of(cfg)?;
            let p = spec
                .complex_pairs
                .iter()
                .max_by(|a, b| a.omega.im.total_cmp(&b.omega.im))
                .ok_or_else(|| CliError::new(5, "quantum.lambda = \"from-spectrum\": the spectrum has no complex pair".into()))?;
            Ok((p.omega.im, q.omega_prime.unwrap_or(p.omega.re)))
        }
    }
}

pub fn run_evolution(cfg: &RunConfig, lambda: f64) -> Result<FockEvolution, CliError> {
    let q = &cfg.quantum;
    let t = linspace(0.0, q.t_max, q.t_points);
    Ok(evolve_pair_vacuum(lambda, &t, &EvolveOptions { n_max: q.n_max, ..Default::default() })?)
}

pub fn evolve(cfg: &RunConfig, out: &mut OutDir) -> Result<String, CliError> {
    let (lambda, omega_prime) = quantum_pair(cfg)?;
    let ev = run_evolution(cfg, lambda)?;
    let obs = observables(&ev, omega_prime);
    let k = cfg.quantum.coefficients;
    let mut header: Vec<String> = ["t", "norm", "n_a_mean", "E1_mean", "E2_mean"].iter().map(|s| s.to_string()).collect();
    header.extend((0..=k).map(|n| format!("c{n}")));
    let mut csv = Csv::new(&header);
    for i in 0..ev.t.len() {
        let mut r = vec![ev.t[i], ev.norm[i], obs.n_a[i], obs.e1[i], obs.e2[i]];
        r.extend_from_slice(&ev.c[i][..=k]);
        csv.row(r);
    }
    csv.note(format!("lambda {lambda}, omega_prime {omega_prime}, n_max {}", ev.n_max));
    csv.note(format!("max |c_n_max| {:e}, steps {}, rejected {}", ev.max_tail, ev.steps, ev.rejected));
    if cfg.output.wants(Format::Csv) {
        out.write("evolve.csv", &csv.render()?)?;
    }
    let drift = ev.norm.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
    Ok(format!("evolve: lambda {lambda}, {} samples, max norm drift {drift:e}\n", ev.t.len()))
}
