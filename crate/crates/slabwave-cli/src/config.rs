//! Run configuration: TOML on disk, dotted-key overrides, validation at load.

use crate::error::CliError;
use serde::Deserialize;
use slabwave::media::{classify_material, DefinitenessTag, MovingSlab, RestFrameMaterial};
use slabwave::slabmodes::{CoSign, Polarization};
use slabwave::spectral::{Grid, SolveRoute};
use std::path::Path;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub stack: Vec<SlabConfig>,
    #[serde(default)]
    pub domain: DomainConfig,
    #[serde(default)]
    pub mode: ModeConfig,
    #[serde(default)]
    pub pair: PairConfig,
    #[serde(default)]
    pub quantum: QuantumConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlabConfig {
    pub epsilon: f64,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default)]
    pub beta: f64,
    pub z0: f64,
    pub z1: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainConfig {
    pub lz: f64,
    pub nz: usize,
    pub route: SolveRoute,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig { lz: 8.0, nz: slabwave::spectral::DEFAULT_NZ, route: SolveRoute::Auto }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModeConfig {
    pub kx: f64,
    pub ky: f64,
    pub polarization: Polarization,
    pub branch: usize,
    pub sign: CoSign,
    pub kx_min: f64,
    pub kx_max: f64,
    pub kx_points: usize,
}

impl Default for ModeConfig {
    fn default() -> Self {
        ModeConfig {
            kx: 1.0,
            ky: 0.0,
            polarization: Polarization::TE,
            branch: 0,
            sign: CoSign::Positive,
            kx_min: 0.5,
            kx_max: 5.0,
            kx_points: 46,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Member {
    #[default]
    Growing,
    Decaying,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PairConfig {
    pub gap: Option<f64>,
    pub gamma0_d: Option<f64>,
    /// Lab wavenumber; phase-matched when absent.
    pub kx: Option<f64>,
    pub signs: [CoSign; 2],
    pub member: Member,
    /// Defaults to 1/λ, or 1/ω′ without growth.
    pub t_max: Option<f64>,
    pub t_points: usize,
}

impl Default for PairConfig {
    fn default() -> Self {
        PairConfig {
            gap: None,
            gamma0_d: None,
            kx: None,
            signs: [CoSign::Positive, CoSign::Negative],
            member: Member::Growing,
            t_max: None,
            t_points: 201,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub enum LambdaSource {
    #[serde(rename = "from-spectrum")]
    FromSpectrum,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Value(f64),
    Source(LambdaSource),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantumConfig {
    /// Taken from the spectrum together with λ when absent.
    pub omega_prime: Option<f64>,
    pub lambda: LambdaSpec,
    pub n_max: usize,
    pub t_max: f64,
    pub t_points: usize,
    /// Highest c_n written to the evolve CSV.
    pub coefficients: usize,
}

impl Default for QuantumConfig {
    fn default() -> Self {
        QuantumConfig {
            omega_prime: None,
            lambda: LambdaSpec::Value(0.5),
            n_max: 256,
            t_max: 2.0,
            t_points: 41,
            coefficients: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub flip: f64,
    pub energy_identity: f64,
    pub ratio_identity: f64,
    pub product_imag: f64,
    pub hermiticity: f64,
    pub quartet: f64,
    pub gram: f64,
    pub null_product: f64,
    /// Applied when every cell matrix is positive definite.
    pub completeness: f64,
    pub kernel: f64,
    /// Applied to indefinite (above-threshold) stacks.
    pub completeness_indefinite: f64,
    pub kernel_indefinite: f64,
    pub commutators: f64,
    pub norm: f64,
    pub closed_form: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            flip: 1e-12,
            energy_identity: 1e-6,
            ratio_identity: 1e-6,
            product_imag: 1e-8,
            hermiticity: 1e-13,
            quartet: 1e-8,
            gram: 1e-8,
            null_product: 1e-8,
            completeness: 1e-8,
            kernel: 1e-8,
            completeness_indefinite: 1e-6,
            kernel_indefinite: 1e-6,
            commutators: 1e-12,
            norm: 1e-9,
            closed_form: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".into(), formats: vec![Format::Csv, Format::Json] }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

fn one() -> f64 {
    1.0
}

/// Reads `path` (defaults when `None`), applies `key=value` overrides and
/// validates the result.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let source = path.map(|p| p.display().to_string()).unwrap_or_else(|| "<defaults>".into());
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::config(format!("{source}: {e}")))?;
            text.parse::<toml::Table>().map_err(|e| CliError::config(format!("{source}: {e}")))?
        }
        None => toml::Table::new(),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let cfg: RunConfig = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let at = e.path().to_string();
        let msg = e.inner().to_string();
        let msg = msg.lines().next().unwrap_or_default().trim_end();
        CliError::config(format!("{source}: at `{at}`: {msg}"))
    })?;
    validate(&cfg).map_err(|e| match e.code {
        2 => CliError::config(format!("{source}: {}", e.message)),
        _ => e,
    })?;
    Ok(cfg)
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override `{spec}` is not key=value")))?;
    let key = key.trim();
    let value = match format!("v = {}", raw.trim()).parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::config(format!("override key `{key}` is malformed")));
    }
    let bad = |why: String| CliError::config(format!("override key `{key}`: {why}"));
    let mut root = toml::Value::Table(std::mem::take(table));
    let mut cur = &mut root;
    for (depth, seg) in parts.iter().enumerate() {
        let last = depth + 1 == parts.len();
        cur = match cur {
            toml::Value::Table(t) => {
                if last {
                    t.insert(seg.to_string(), value);
                    break;
                }
                t.entry(seg.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()))
            }
            // `stack.1.beta`: numeric segments index arrays
            toml::Value::Array(a) => {
                let idx: usize = seg.parse().map_err(|_| bad(format!("`{seg}` is not an array index")))?;
                let slot = a.get_mut(idx).ok_or_else(|| bad(format!("no element {idx}")))?;
                if last {
                    *slot = value;
                    break;
                }
                slot
            }
            _ => return Err(bad(format!("`{}` is not a table", parts[..depth].join(".")))),
        };
    }
    let toml::Value::Table(t) = root else { unreachable!("root is a table") };
    *table = t;
    Ok(())
}

fn finite(name: &str, x: f64) -> Result<(), CliError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(format!("`{name}` must be finite, got {x}")))
    }
}

pub fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    let d = &cfg.domain;
    finite("domain.lz", d.lz)?;
    Grid::new(d.lz, d.nz).map_err(|e| CliError::config(format!("domain: {e}")))?;
    for (i, s) in cfg.stack.iter().enumerate() {
        for (k, v) in [("epsilon", s.epsilon), ("mu", s.mu), ("beta", s.beta), ("z0", s.z0), ("z1", s.z1)] {
            finite(&format!("stack[{i}].{k}"), v)?;
        }
        if !(s.z0 < s.z1) {
            return Err(CliError::config(format!("stack[{i}]: z0 = {} must be below z1 = {}", s.z0, s.z1)));
        }
        if s.z0 < 0.0 || s.z1 > d.lz {
            return Err(CliError::config(format!("stack[{i}]: [{}, {}] lies outside the domain [0, {}]", s.z0, s.z1, d.lz)));
        }
        let slab = s.to_slab().map_err(|e| CliError::material(format!("stack[{i}]: {e}")))?;
        let def = classify_material(slab.material, slab.beta).map_err(|e| CliError::material(format!("stack[{i}]: {e}")))?;
        if def.tag == DefinitenessTag::Singular {
            return Err(CliError::material(format!(
                "stack[{i}]: material matrix singular at beta = {} (Cherenkov resonance 1/n = {})",
                s.beta,
                1.0 / slab.material.index()
            )));
        }
    }
    let mut order: Vec<&SlabConfig> = cfg.stack.iter().collect();
    order.sort_by(|a, b| a.z0.total_cmp(&b.z0));
    if order.windows(2).any(|w| w[1].z0 < w[0].z1) {
        return Err(CliError::config("stack: slabs overlap".into()));
    }
    let m = &cfg.mode;
    for (k, v) in [("mode.kx", m.kx), ("mode.ky", m.ky), ("mode.kx_min", m.kx_min), ("mode.kx_max", m.kx_max)] {
        finite(k, v)?;
    }
    if m.kx_points == 0 || m.kx_min > m.kx_max {
        return Err(CliError::config("mode: need kx_points >= 1 and kx_min <= kx_max".into()));
    }
    let p = &cfg.pair;
    if p.gap.is_some() && p.gamma0_d.is_some() {
        return Err(CliError::config("pair: give either gap or gamma0_d, not both".into()));
    }
    for (k, v) in [("pair.gap", p.gap), ("pair.gamma0_d", p.gamma0_d), ("pair.t_max", p.t_max)] {
        if let Some(v) = v {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::config(format!("`{k}` must be positive, got {v}")));
            }
        }
    }
    if p.t_points < 2 {
        return Err(CliError::config("pair.t_points must be at least 2".into()));
    }
    let q = &cfg.quantum;
    if let LambdaSpec::Value(l) = q.lambda {
        if !(l.is_finite() && l > 0.0) {
            return Err(CliError::config(format!("`quantum.lambda` must be positive, got {l}")));
        }
    }
    if !(q.t_max.is_finite() && q.t_max > 0.0) || q.t_points < 2 {
        return Err(CliError::config("quantum: need t_max > 0 and t_points >= 2".into()));
    }
    if q.n_max < 2 || q.coefficients > q.n_max {
        return Err(CliError::config("quantum: need n_max >= 2 and coefficients <= n_max".into()));
    }
    if cfg.output.formats.is_empty() {
        return Err(CliError::config("output.formats is empty".into()));
    }
    Ok(())
}

impl SlabConfig {
    pub fn to_slab(&self) -> slabwave::Result<MovingSlab> {
        MovingSlab::new(RestFrameMaterial::new(self.epsilon, self.mu)?, self.beta, self.z0, self.z1)
    }
}

impl RunConfig {
    /// Slabs in config order; validated at load.
    pub fn slabs(&self) -> Vec<MovingSlab> {
        self.stack.iter().map(|s| s.to_slab().expect("validated at load")).collect()
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.domain.lz, self.domain.nz).expect("validated at load")
    }
}
