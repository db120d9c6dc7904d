//! Experiment configuration (TOML).
//!
//! Every parameter has a default; the resolved configuration, with defaults
//! filled in, is echoed into each output table.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub output: PathBuf,
    /// Parallel sweep workers; results do not depend on it, so it is not echoed.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    pub experiment: Experiment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Hfunction(HFunction),
    Gibbs(Gibbs),
    Equivalence(Equivalence),
    Genfunc(GenFunc),
    KacRun(KacRun),
    KacCounterexample(KacCounterexample),
    KacValidate(KacValidate),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Hfunction(_) => "hfunction",
            Experiment::Gibbs(_) => "gibbs",
            Experiment::Equivalence(_) => "equivalence",
            Experiment::Genfunc(_) => "genfunc",
            Experiment::KacRun(_) => "kac-run",
            Experiment::KacCounterexample(_) => "kac-counterexample",
            Experiment::KacValidate(_) => "kac-validate",
        }
    }
}

/// Counting entropy of magnetization windows over a range of `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HFunction {
    pub m: [f64; 3],
    pub n: Vec<usize>,
    pub delta_c: f64,
    pub delta_gamma: f64,
}

impl Default for HFunction {
    fn default() -> Self {
        Self {
            m: [0.0, 0.0, 0.5],
            n: (4..=12).collect(),
            delta_c: 1.0,
            delta_gamma: 0.4,
        }
    }
}

/// Gibbs state of the three magnetizations, at given `λ` or solved for a target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Gibbs {
    pub n: usize,
    pub lambda: [f64; 3],
    /// When set, `λ` is solved so the Gibbs means equal this value.
    pub target: Option<[f64; 3]>,
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for Gibbs {
    fn default() -> Self {
        Self {
            n: 6,
            lambda: [0.0, 0.0, 0.5f64.atanh()],
            target: None,
            tol: 1e-8,
            max_iterations: 200,
        }
    }
}

/// Product Gibbs state along `X_3`: tail masses, equipartition and projection gap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Equivalence {
    pub m3: f64,
    pub n: Vec<usize>,
    pub delta_c: f64,
    pub delta_gamma: f64,
    pub aep_delta: f64,
    pub rate_delta: f64,
}

impl Default for Equivalence {
    fn default() -> Self {
        Self {
            m3: 0.5,
            n: vec![4, 6, 8, 10, 12],
            delta_c: 1.0,
            delta_gamma: 0.4,
            aep_delta: 0.1,
            rate_delta: 0.2,
        }
    }
}

/// Scaled cumulant generating function of `X_3` in a product state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenFunc {
    /// `λ_3` of the reference state; 0 is the trace state.
    pub lambda3: f64,
    pub n: Vec<usize>,
    pub t: Vec<f64>,
}

impl Default for GenFunc {
    fn default() -> Self {
        Self {
            lambda3: 0.0,
            n: (1..=8).collect(),
            t: vec![0.1, 0.5, 1.0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    Iid,
    ExactCount,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Iterate the Bloch-vector map.
    Macro,
    /// Seed-ensemble mean of the product-state micro dynamics.
    Micro,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KacRun {
    pub mode: Mode,
    pub n_sites: usize,
    pub mu: f64,
    pub axis: [f64; 3],
    pub theta: f64,
    pub initial: [f64; 3],
    pub sampling: Sampling,
    pub horizon: usize,
    pub replicas: usize,
}

impl Default for KacRun {
    fn default() -> Self {
        Self {
            mode: Mode::Macro,
            n_sites: 1000,
            mu: 0.0,
            axis: [1.0, 0.0, 0.0],
            theta: 0.3,
            initial: [0.0, 0.0, 0.9],
            sampling: Sampling::ExactCount,
            horizon: 20,
            replicas: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KacCounterexample {
    pub mu: f64,
    pub axis: [f64; 3],
    pub theta: f64,
    pub m0: [f64; 3],
    pub horizon: usize,
    pub tolerance: f64,
}

impl Default for KacCounterexample {
    fn default() -> Self {
        Self {
            mu: 0.0,
            axis: [0.0, 0.0, 1.0],
            theta: 1.0,
            m0: [0.9, 0.0, 0.0],
            horizon: 20,
            tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KacValidate {
    pub n_sites: Vec<usize>,
    pub mu: f64,
    pub axis: [f64; 3],
    pub theta: f64,
    pub initial: [f64; 3],
    pub sampling: Sampling,
    pub horizon: usize,
    pub replicas: usize,
}

impl Default for KacValidate {
    fn default() -> Self {
        Self {
            n_sites: vec![100, 1_000, 10_000],
            mu: 0.0,
            axis: [1.0, 0.0, 0.0],
            theta: 1.0,
            initial: [0.0, 0.0, 1.0],
            sampling: Sampling::Iid,
            horizon: 50,
            replicas: 32,
        }
    }
}

fn check(ok: bool, message: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(invalid(message()))
    }
}

fn check_mu(mu: f64) -> Result<()> {
    check((-1.0..=1.0).contains(&mu), || format!("mu = {mu} outside [-1, 1]"))
}

fn check_bloch(name: &str, m: [f64; 3]) -> Result<()> {
    let len = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
    check(m.iter().all(|v| v.is_finite()) && len <= 1.0 + 1e-12, || {
        format!("{name} = {m:?} has length {len} > 1")
    })
}

fn check_axis(axis: [f64; 3], theta: f64) -> Result<()> {
    let len = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    check(len > 0.0 && len.is_finite() && theta.is_finite(), || {
        format!("scatterer needs a nonzero axis and finite theta, got {axis:?}, {theta}")
    })
}

fn check_sizes(name: &str, n: &[usize], max: usize) -> Result<()> {
    check(n.iter().all(|&v| v >= 1 && v <= max), || {
        format!("{name} entries must lie in 1..={max}, got {n:?}")
    })
}

fn check_schedule(c: f64, gamma: f64) -> Result<()> {
    check(c > 0.0 && gamma > 0.0 && gamma < 0.5, || {
        format!("delta schedule needs delta_c > 0 and 0 < delta_gamma < 1/2, got {c}, {gamma}")
    })
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Range checks mirroring the library preconditions, so bad input fails
    /// before any work starts.
    pub fn validate(&self) -> Result<()> {
        check(self.workers != Some(0), || "workers must be positive".into())?;
        match &self.experiment {
            Experiment::Hfunction(p) => {
                check_bloch("m", p.m)?;
                check_sizes("n", &p.n, 12)?;
                check_schedule(p.delta_c, p.delta_gamma)
            }
            Experiment::Gibbs(p) => {
                check_sizes("n", &[p.n], 12)?;
                check(p.lambda.iter().all(|l| l.is_finite()), || "lambda must be finite".into())?;
                if let Some(t) = p.target {
                    check_bloch("target", t)?;
                }
                check(p.tol > 0.0 && p.max_iterations > 0, || "tol and max_iterations must be positive".into())
            }
            Experiment::Equivalence(p) => {
                check(p.m3 > -1.0 && p.m3 < 1.0, || format!("m3 = {} outside (-1, 1)", p.m3))?;
                check_sizes("n", &p.n, 12)?;
                check_schedule(p.delta_c, p.delta_gamma)?;
                check(p.aep_delta > 0.0 && p.rate_delta > 0.0, || "window half widths must be positive".into())
            }
            Experiment::Genfunc(p) => {
                check(p.lambda3.is_finite(), || "lambda3 must be finite".into())?;
                check_sizes("n", &p.n, 12)?;
                check(p.t.iter().all(|t| t.is_finite()), || "t values must be finite".into())
            }
            Experiment::KacRun(p) => {
                check_mu(p.mu)?;
                check_axis(p.axis, p.theta)?;
                check_bloch("initial", p.initial)?;
                check(p.n_sites > 0 && p.horizon > 0 && p.replicas > 0, || {
                    "n_sites, horizon and replicas must be positive".into()
                })?;
                check(p.mode == Mode::Macro || p.horizon <= p.n_sites, || {
                    format!("micro runs need horizon ≤ n_sites, got {} > {}", p.horizon, p.n_sites)
                })
            }
            Experiment::KacCounterexample(p) => {
                check_mu(p.mu)?;
                check_axis(p.axis, p.theta)?;
                check_bloch("m0", p.m0)?;
                check(p.horizon > 0 && p.tolerance >= 0.0, || "horizon must be positive, tolerance nonnegative".into())
            }
            Experiment::KacValidate(p) => {
                check_mu(p.mu)?;
                check_axis(p.axis, p.theta)?;
                check_bloch("initial", p.initial)?;
                check(!p.n_sites.is_empty() && p.horizon > 0 && p.replicas > 0, || {
                    "n_sites must be nonempty; horizon and replicas positive".into()
                })?;
                check(p.n_sites.iter().all(|&n| n >= p.horizon), || {
                    format!("every ring size must be ≥ horizon {}", p.horizon)
                })
            }
        }
    }

    /// Resolved configuration as TOML, defaults included.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Copy with one numeric field replaced.
    ///
    /// `name` is `seed`, a scalar field of the experiment table, a list field
    /// (replaced by a one-element list), or `field[i]` for one array entry.
    pub fn with_parameter(&self, name: &str, value: f64) -> Result<Self> {
        let mut doc = toml::Value::try_from(self).expect("config serializes");
        let unknown = || CliError::UnknownParameter(name.to_string());
        if name == "seed" {
            doc["seed"] = integer(name, value)?;
        } else {
            let table = doc
                .get_mut("experiment")
                .and_then(|e| e.as_table_mut())
                .expect("experiment table");
            let (field, index) = match name.split_once('[') {
                Some((f, rest)) => {
                    let i = rest
                        .strip_suffix(']')
                        .and_then(|s| s.parse::<usize>().ok())
                        .ok_or_else(unknown)?;
                    (f, Some(i))
                }
                None => (name, None),
            };
            if field == "kind" {
                return Err(unknown());
            }
            let slot = table.get_mut(field).ok_or_else(unknown)?;
            match (slot, index) {
                (toml::Value::Array(items), Some(i)) => {
                    let item = items.get_mut(i).ok_or_else(unknown)?;
                    *item = like(item, name, value)?;
                }
                (toml::Value::Array(items), None) => {
                    let template = items.first().cloned().unwrap_or(toml::Value::Float(0.0));
                    *items = vec![like(&template, name, value)?];
                }
                (slot @ (toml::Value::Float(_) | toml::Value::Integer(_)), None) => {
                    *slot = like(slot, name, value)?;
                }
                _ => return Err(unknown()),
            }
        }
        let config: Self = doc.try_into().map_err(|e: toml::de::Error| invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }
}

fn integer(name: &str, value: f64) -> Result<toml::Value> {
    if value.fract() != 0.0 || value < 0.0 || value > i64::MAX as f64 {
        return Err(invalid(format!("{name} needs a nonnegative integer, got {value}")));
    }
    Ok(toml::Value::Integer(value as i64))
}

fn like(template: &toml::Value, name: &str, value: f64) -> Result<toml::Value> {
    match template {
        toml::Value::Integer(_) => integer(name, value),
        toml::Value::Float(_) => Ok(toml::Value::Float(value)),
        _ => Err(CliError::UnknownParameter(name.to_string())),
    }
}
