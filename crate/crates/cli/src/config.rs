//! Strict JSON experiment configuration.
//!
//! Unknown keys are rejected everywhere so machine-generated sweeps fail
//! loudly instead of silently ignoring a typo. Command line flags override
//! config values (`--seed` beats `sim.master_seed`, `--out` beats
//! `output_dir`).

use crate::error::CliError;
use qedlab_core::analysis::InstantonKind;
use qedlab_core::calibrate::{FitParams, ParamBounds};
use qedlab_core::models::{MicroParams, ModelSpec};
use qedlab_core::potential::QuarticPotential;
use qedlab_core::simulate::SimConfig;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Model description; see [`parse_model`] for the accepted forms.
    pub model: Option<serde_json::Value>,
    pub sim: Option<SimSection>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Emit SVG plots alongside machine-readable outputs.
    #[serde(default)]
    pub plots: bool,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub potential: Option<PotentialSection>,
    #[serde(default)]
    pub default_prob: Option<DefaultProbSection>,
    #[serde(default)]
    pub instanton: Option<InstantonSection>,
    #[serde(default)]
    pub calibrate: Option<CalibrateSection>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub master_seed: u64,
    pub x0: f64,
    #[serde(default)]
    pub absorb_threshold: f64,
}

impl SimSection {
    pub fn to_sim_config(self, seed_override: Option<u64>) -> SimConfig {
        SimConfig {
            dt: self.dt,
            horizon: self.horizon,
            n_paths: self.n_paths,
            master_seed: seed_override.unwrap_or(self.master_seed),
            x0: self.x0,
            absorb_threshold: self.absorb_threshold,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "default_true")]
    pub moments: bool,
    #[serde(default)]
    pub histogram: Option<HistogramSection>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramSection {
    /// Time window `[start, end]` within the horizon.
    pub window: [f64; 2],
    pub bins: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    #[serde(default)]
    pub x_min: Option<f64>,
    #[serde(default)]
    pub x_max: Option<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self {
            x_min: None,
            x_max: None,
            points: default_points(),
            tol: default_tol(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefaultProbSection {
    pub sigmas: Vec<f64>,
    pub horizons: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstantonSection {
    pub kind: InstantonKind,
    #[serde(default = "default_t_span")]
    pub t_span: f64,
    #[serde(default = "default_ode_tol")]
    pub ode_tol: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateSection {
    /// Input CSV with `t,x` rows.
    pub input: Option<PathBuf>,
    /// Sampling interval; inferred from the time column when absent.
    #[serde(default)]
    pub dt: Option<f64>,
    pub init: InitSection,
    #[serde(default)]
    pub bounds: Option<BoundsSection>,
    #[serde(default = "default_opt_tol")]
    pub opt_tol: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    pub theta: f64,
    pub kappa: f64,
    pub g: f64,
    pub sigma: f64,
}

impl InitSection {
    pub fn to_params(self) -> FitParams {
        FitParams::new(self.theta, self.kappa, self.g, self.sigma)
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub lo: InitSection,
    pub hi: InitSection,
}

impl BoundsSection {
    pub fn to_bounds(self) -> ParamBounds {
        ParamBounds {
            lo: self.lo.to_params(),
            hi: self.hi.to_params(),
        }
    }
}

fn default_true() -> bool {
    true
}
fn default_points() -> usize {
    400
}
fn default_tol() -> f64 {
    1e-9
}
fn default_t_span() -> f64 {
    40.0
}
fn default_ode_tol() -> f64 {
    1e-8
}
fn default_opt_tol() -> f64 {
    1e-9
}

pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
}

/// Parses the `model` object. The accepted forms are
///
/// ```json
/// {"type": "abm", "mu": 0.0, "sigma": 0.3}
/// {"type": "gbm", "mu": 0.05, "sigma": 0.2}
/// {"type": "langevin", "theta": 1.0, "kappa": 1.0, "g": 1.0, "sigma": 0.2}
/// {"type": "micro", "r_f": 0.05, "c": 0.01, "u_bar": 0.0, "phi": -0.4,
///  "lambda": 0.3, "mu_impact": 2.0, "sigma": 0.2, "signal_offset": 0.0}
/// ```
///
/// Strictness is enforced manually because serde cannot combine
/// `deny_unknown_fields` with an internal `type` tag.
pub fn parse_model(value: &serde_json::Value) -> Result<ModelSpec, CliError> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct DriftSigma {
        mu: f64,
        sigma: f64,
    }
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct LangevinParams {
        theta: f64,
        kappa: f64,
        g: f64,
        sigma: f64,
    }
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct MicroSection {
        r_f: f64,
        c: f64,
        u_bar: f64,
        phi: f64,
        lambda: f64,
        mu_impact: f64,
        sigma: f64,
        #[serde(default)]
        signal_offset: f64,
    }

    let obj = value
        .as_object()
        .ok_or_else(|| CliError::Config("model must be an object".into()))?;
    let kind = obj
        .get("type")
        .and_then(|t| t.as_str())
        .ok_or_else(|| CliError::Config("model needs a string \"type\" key".into()))?
        .to_owned();
    let mut rest = obj.clone();
    rest.remove("type");
    let rest = serde_json::Value::Object(rest);
    let bad = |e: serde_json::Error| CliError::Config(format!("model ({kind}): {e}"));

    let model = match kind.as_str() {
        "abm" => {
            let p: DriftSigma = serde_json::from_value(rest).map_err(bad)?;
            ModelSpec::Abm {
                mu: p.mu,
                sigma: p.sigma,
            }
        }
        "gbm" => {
            let p: DriftSigma = serde_json::from_value(rest).map_err(bad)?;
            ModelSpec::Gbm {
                mu: p.mu,
                sigma: p.sigma,
            }
        }
        "langevin" => {
            let p: LangevinParams = serde_json::from_value(rest).map_err(bad)?;
            ModelSpec::Langevin {
                potential: QuarticPotential::new(p.theta, p.kappa, p.g),
                sigma: p.sigma,
            }
        }
        "micro" => {
            let p: MicroSection = serde_json::from_value(rest).map_err(bad)?;
            ModelSpec::Micro(MicroParams {
                r_f: p.r_f,
                c: p.c,
                u_bar: p.u_bar,
                phi: p.phi,
                lambda: p.lambda,
                mu_impact: p.mu_impact,
                sigma: p.sigma,
                signal_offset: p.signal_offset,
            })
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown model type {other:?}; expected abm, gbm, langevin or micro"
            )))
        }
    };
    model
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(model)
}

/// The quartic potential a model diffuses in; ABM has none.
pub fn model_potential(model: &ModelSpec) -> Result<QuarticPotential, CliError> {
    match model {
        ModelSpec::Abm { .. } => Err(CliError::Shape(
            "arithmetic Brownian motion has no quartic potential form".into(),
        )),
        ModelSpec::Gbm { mu, .. } => Ok(QuarticPotential::gbm(*mu)),
        ModelSpec::Langevin { potential, .. } => Ok(*potential),
        ModelSpec::Micro(p) => Ok(p.potential()),
    }
}

/// Same model with its volatility replaced (for sigma-grid sweeps).
pub fn with_sigma(model: &ModelSpec, sigma: f64) -> ModelSpec {
    match *model {
        ModelSpec::Abm { mu, .. } => ModelSpec::Abm { mu, sigma },
        ModelSpec::Gbm { mu, .. } => ModelSpec::Gbm { mu, sigma },
        ModelSpec::Langevin { potential, .. } => ModelSpec::Langevin { potential, sigma },
        ModelSpec::Micro(p) => ModelSpec::Micro(MicroParams { sigma, ..p }),
    }
}
