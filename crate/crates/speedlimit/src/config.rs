//! Experiment configuration, read from TOML.
//!
//! ```toml
//! kind = "ntk_scaling"      # optional when implied by the subcommand
//! seed = 7                  # optional, default 0
//! output_dir = "runs/ntk"   # optional, overridden by --out
//!
//! [parameters]
//! alpha = 1.0
//! delta = 0.0
//! n_modes = 100000
//! t_min = 100.0
//! t_max = 10000.0
//! ```
//!
//! Every key a kind requires is checked before anything is computed, and all
//! missing keys are reported together.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    NtkScaling,
    NtkInefficiency,
    LinregFinite,
    LinregAsymptotic,
    LangevinSim,
    AnalyzeTrajectory,
}

impl Kind {
    pub const ALL: [Kind; 6] = [
        Kind::NtkScaling,
        Kind::NtkInefficiency,
        Kind::LinregFinite,
        Kind::LinregAsymptotic,
        Kind::LangevinSim,
        Kind::AnalyzeTrajectory,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::NtkScaling => "ntk_scaling",
            Kind::NtkInefficiency => "ntk_inefficiency",
            Kind::LinregFinite => "linreg_finite",
            Kind::LinregAsymptotic => "linreg_asymptotic",
            Kind::LangevinSim => "langevin_sim",
            Kind::AnalyzeTrajectory => "analyze_trajectory",
        }
    }

    /// Keys that must be present under `[parameters]`. Alternatives are
    /// written `a|b` (at least one of them).
    fn required(self) -> &'static [&'static str] {
        match self {
            Kind::NtkScaling => &["alpha", "delta", "n_modes", "t_min", "t_max"],
            Kind::NtkInefficiency => &["t_min", "t_max"],
            Kind::LinregFinite => &["d", "n|gamma", "lambda", "beta", "alpha"],
            Kind::LinregAsymptotic => &["gamma", "lambda", "beta", "alpha"],
            Kind::LangevinSim => &[
                "eigenvalues|a",
                "init_variance|init_covariance",
                "beta_inv",
                "dt",
                "horizon",
            ],
            Kind::AnalyzeTrajectory => &["archive"],
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Kind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| HarnessError::Config(format!("kind: unknown experiment `{s}`")))
    }
}

fn one() -> f64 {
    1.0
}

fn first_mode() -> usize {
    1
}

fn n_quad() -> usize {
    speedlimit_core::ntk::DEFAULT_N_QUAD
}

fn twenty() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NtkScalingParams {
    pub alpha: f64,
    pub delta: f64,
    pub n_modes: usize,
    pub t_min: f64,
    pub t_max: f64,
    #[serde(default = "twenty")]
    pub n_points: usize,
    #[serde(default = "one")]
    pub eigen_scale: f64,
    #[serde(default = "one")]
    pub residue_scale: f64,
    #[serde(default = "first_mode")]
    pub first_mode: usize,
    #[serde(default = "n_quad")]
    pub n_quad: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NtkInefficiencyParams {
    /// Explicit spectrum; otherwise a power law from the fields below.
    pub eigenvalues: Option<Vec<f64>>,
    pub residues_sq: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub delta: Option<f64>,
    pub n_modes: Option<usize>,
    #[serde(default = "one")]
    pub eigen_scale: f64,
    #[serde(default = "one")]
    pub residue_scale: f64,
    pub t_min: f64,
    pub t_max: f64,
    #[serde(default = "twenty")]
    pub n_points: usize,
    #[serde(default = "n_quad")]
    pub n_quad: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinregFiniteParams {
    pub d: usize,
    /// Sample count; derived from `gamma = d/n` when absent.
    pub n: Option<usize>,
    pub gamma: Option<f64>,
    pub lambda: f64,
    pub beta: f64,
    pub alpha: f64,
    #[serde(default = "one_seed")]
    pub n_seeds: usize,
}

fn one_seed() -> usize {
    1
}

impl LinregFiniteParams {
    pub fn samples(&self) -> usize {
        match (self.n, self.gamma) {
            (Some(n), _) => n,
            (None, Some(g)) => ((self.d as f64 / g).round() as usize).max(1),
            (None, None) => unreachable!("validated"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Gamma,
    Lambda,
    Beta,
    Alpha,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinregAsymptoticParams {
    pub gamma: f64,
    pub lambda: f64,
    pub beta: f64,
    pub alpha: f64,
    pub sweep: Option<Sweep>,
    #[serde(default = "mp_nodes")]
    pub nodes: usize,
}

fn mp_nodes() -> usize {
    speedlimit_core::linreg::mp::DEFAULT_NODES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LangevinParams {
    /// Diagonal of `A`; alternative to the full matrix `a`.
    pub eigenvalues: Option<Vec<f64>>,
    pub a: Option<Vec<Vec<f64>>>,
    pub b: Option<Vec<f64>>,
    #[serde(default)]
    pub c: f64,
    pub init_mean: Option<Vec<f64>>,
    pub init_variance: Option<f64>,
    pub init_covariance: Option<Vec<Vec<f64>>>,
    pub beta_inv: f64,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "realizations")]
    pub n_realizations: usize,
    #[serde(default = "twenty")]
    pub n_points: usize,
    #[serde(default = "n_quad")]
    pub n_quad: usize,
}

fn realizations() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeParams {
    /// Archive directory, relative to the config file.
    pub archive: PathBuf,
    pub warm_start: Option<usize>,
    #[serde(default)]
    pub triplets: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    NtkScaling(NtkScalingParams),
    NtkInefficiency(NtkInefficiencyParams),
    LinregFinite(LinregFiniteParams),
    LinregAsymptotic(LinregAsymptoticParams),
    LangevinSim(LangevinParams),
    AnalyzeTrajectory(AnalyzeParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    /// The `[parameters]` table as written, echoed into run summaries.
    pub parameters: toml::Table,
    pub experiment: Experiment,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: Option<String>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    parameters: Option<toml::Table>,
}

impl ExperimentConfig {
    /// Reads a config file. `expected` is the kind implied by the caller;
    /// a `kind` key in the file must agree with it. Relative `output_dir`
    /// and archive paths are resolved against the file's directory.
    pub fn load(path: &Path, expected: Option<Kind>) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg = Self::parse(&text, expected)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(dir) = &mut cfg.output_dir {
            *dir = base.join(&*dir);
        }
        if let Experiment::AnalyzeTrajectory(p) = &mut cfg.experiment {
            p.archive = base.join(&p.archive);
        }
        Ok(cfg)
    }

    pub fn parse(text: &str, expected: Option<Kind>) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let at = e
                .span()
                .map(|s| format!(" (byte offset {})", s.start))
                .unwrap_or_default();
            HarnessError::Config(format!("{}{at}", e.message().trim()))
        })?;

        let kind = match (raw.kind.as_deref(), expected) {
            (Some(k), Some(e)) => {
                let k: Kind = k.parse()?;
                if k != e {
                    return Err(HarnessError::Config(format!(
                        "kind: file declares `{k}` but `{e}` was requested"
                    )));
                }
                k
            }
            (Some(k), None) => k.parse()?,
            (None, Some(e)) => e,
            (None, None) => {
                return Err(HarnessError::Config(format!(
                    "missing keys: kind, {}",
                    missing_keys(Kind::NtkScaling, &toml::Table::new()).join(", ")
                )))
            }
        };

        let parameters = raw.parameters.unwrap_or_default();
        let missing = missing_keys(kind, &parameters);
        if !missing.is_empty() {
            return Err(HarnessError::Config(format!(
                "missing keys: {}",
                missing.join(", ")
            )));
        }

        let experiment = match kind {
            Kind::NtkScaling => Experiment::NtkScaling(decode(&parameters)?),
            Kind::NtkInefficiency => Experiment::NtkInefficiency(decode(&parameters)?),
            Kind::LinregFinite => Experiment::LinregFinite(decode(&parameters)?),
            Kind::LinregAsymptotic => Experiment::LinregAsymptotic(decode(&parameters)?),
            Kind::LangevinSim => Experiment::LangevinSim(decode(&parameters)?),
            Kind::AnalyzeTrajectory => Experiment::AnalyzeTrajectory(decode(&parameters)?),
        };
        validate(&experiment)?;
        Ok(Self {
            kind,
            seed: raw.seed.unwrap_or(0),
            output_dir: raw.output_dir,
            parameters,
            experiment,
        })
    }
}

fn missing_keys(kind: Kind, table: &toml::Table) -> Vec<String> {
    kind.required()
        .iter()
        .filter(|alts| !alts.split('|').any(|k| table.contains_key(k)))
        .map(|alts| format!("parameters.{}", alts.replace('|', " or parameters.")))
        .collect()
}

fn decode<T: DeserializeOwned>(table: &toml::Table) -> Result<T> {
    T::deserialize(toml::Value::Table(table.clone()))
        .map_err(|e| HarnessError::Config(format!("parameters: {}", e.message().trim())))
}

fn field_error(field: &str, reason: &str) -> HarnessError {
    HarnessError::Config(format!("parameters.{field}: {reason}"))
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(field_error(field, "must be finite and > 0"))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(field_error(field, "must be finite and >= 0"))
    }
}

fn at_least(field: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(field_error(field, &format!("must be >= {min}")))
    }
}

fn time_grid(t_min: f64, t_max: f64, n_points: usize) -> Result<()> {
    positive("t_min", t_min)?;
    positive("t_max", t_max)?;
    if t_max < t_min {
        return Err(field_error("t_max", "must be >= t_min"));
    }
    at_least("n_points", n_points, 1)
}

fn square(field: &str, rows: &[Vec<f64>]) -> Result<usize> {
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(field_error(field, "must be a non-empty square matrix"));
    }
    Ok(d)
}

fn validate(experiment: &Experiment) -> Result<()> {
    match experiment {
        Experiment::NtkScaling(p) => {
            positive("alpha", p.alpha)?;
            non_negative("delta", p.delta)?;
            at_least("n_modes", p.n_modes, 1)?;
            at_least("first_mode", p.first_mode, 1)?;
            positive("eigen_scale", p.eigen_scale)?;
            non_negative("residue_scale", p.residue_scale)?;
            at_least("n_quad", p.n_quad, 2)?;
            time_grid(p.t_min, p.t_max, p.n_points)?;
            if p.n_points < 3 {
                return Err(field_error("n_points", "slope fits need >= 3 points"));
            }
        }
        Experiment::NtkInefficiency(p) => {
            match (&p.eigenvalues, &p.residues_sq) {
                (Some(l), Some(r)) => {
                    if l.len() != r.len() || l.is_empty() {
                        return Err(field_error(
                            "residues_sq",
                            "must be non-empty and as long as eigenvalues",
                        ));
                    }
                }
                (None, None) => {
                    let missing: Vec<&str> = [
                        ("parameters.alpha", p.alpha.is_none()),
                        ("parameters.delta", p.delta.is_none()),
                        ("parameters.n_modes", p.n_modes.is_none()),
                    ]
                    .into_iter()
                    .filter_map(|(k, m)| m.then_some(k))
                    .collect();
                    if !missing.is_empty() {
                        return Err(HarnessError::Config(format!(
                            "missing keys: {} (or give eigenvalues and residues_sq)",
                            missing.join(", ")
                        )));
                    }
                    positive("alpha", p.alpha.unwrap_or_default())?;
                    non_negative("delta", p.delta.unwrap_or_default())?;
                    at_least("n_modes", p.n_modes.unwrap_or_default(), 1)?;
                }
                _ => {
                    return Err(field_error(
                        "eigenvalues",
                        "eigenvalues and residues_sq must be given together",
                    ))
                }
            }
            positive("eigen_scale", p.eigen_scale)?;
            non_negative("residue_scale", p.residue_scale)?;
            at_least("n_quad", p.n_quad, 2)?;
            time_grid(p.t_min, p.t_max, p.n_points)?;
        }
        Experiment::LinregFinite(p) => {
            at_least("d", p.d, 1)?;
            if let Some(n) = p.n {
                at_least("n", n, 1)?;
            }
            if let Some(g) = p.gamma {
                positive("gamma", g)?;
            }
            positive("lambda", p.lambda)?;
            positive("beta", p.beta)?;
            positive("alpha", p.alpha)?;
            at_least("n_seeds", p.n_seeds, 1)?;
        }
        Experiment::LinregAsymptotic(p) => {
            positive("gamma", p.gamma)?;
            positive("lambda", p.lambda)?;
            positive("beta", p.beta)?;
            positive("alpha", p.alpha)?;
            at_least("nodes", p.nodes, 1)?;
            if let Some(s) = &p.sweep {
                if s.values.is_empty() {
                    return Err(field_error("sweep.values", "must not be empty"));
                }
                for v in &s.values {
                    positive("sweep.values", *v)?;
                }
            }
        }
        Experiment::LangevinSim(p) => {
            let d = match (&p.eigenvalues, &p.a) {
                (Some(l), None) if !l.is_empty() => l.len(),
                (None, Some(a)) => square("a", a)?,
                _ => return Err(field_error("a", "give exactly one of eigenvalues or a")),
            };
            for (field, v) in [("b", &p.b), ("init_mean", &p.init_mean)] {
                if let Some(v) = v {
                    if v.len() != d {
                        return Err(field_error(field, &format!("must have length {d}")));
                    }
                }
            }
            match (&p.init_variance, &p.init_covariance) {
                (Some(_), Some(_)) => {
                    return Err(field_error(
                        "init_covariance",
                        "give at most one of init_variance or init_covariance",
                    ))
                }
                (Some(v), None) => non_negative("init_variance", *v)?,
                (None, Some(c)) => {
                    if square("init_covariance", c)? != d {
                        return Err(field_error("init_covariance", &format!("must be {d}x{d}")));
                    }
                }
                // a point mass has unbounded entropy production
                (None, None) => unreachable!("required key"),
            }
            positive("beta_inv", p.beta_inv)?;
            positive("dt", p.dt)?;
            positive("horizon", p.horizon)?;
            at_least("n_realizations", p.n_realizations, 1)?;
            at_least("n_points", p.n_points, 1)?;
            at_least("n_quad", p.n_quad, 2)?;
        }
        Experiment::AnalyzeTrajectory(p) => {
            if let Some(t) = p.triplets.iter().find(|t| t.len() != 3) {
                return Err(field_error(
                    "triplets",
                    &format!("each triplet needs exactly 3 indices, got {}", t.len()),
                ));
            }
        }
    }
    Ok(())
}
