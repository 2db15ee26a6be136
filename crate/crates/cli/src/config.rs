//! TOML run manifests. Unknown keys are rejected before anything runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ldpsgd::inference::DEFAULT_KAPPA;
use ldpsgd::{Family, LossModel, Mu, SigmaStructure, SimDesign, StepSchedule};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Simulate,
    Analyze,
    Critvals,
}

/// `mu = 1.0` or `mu = "inf"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MuSetting {
    Value(f64),
    Named(String),
}

impl MuSetting {
    pub fn resolve(&self) -> Result<Mu> {
        match self {
            MuSetting::Value(v) => Ok(Mu::new(*v)?),
            MuSetting::Named(s) => match s.to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "none" | "off" => Ok(Mu::Infinite),
                other => Err(CliError::Config(format!("privacy.mu: expected a number or \"inf\", got \"{other}\""))),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub family: Family,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
}

fn default_c() -> f64 {
    1.345
}

fn default_tau() -> f64 {
    0.5
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            family: Family::HuberLinear,
            c: default_c(),
            tau: default_tau(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacySection {
    pub mu: MuSetting,
}

impl Default for PrivacySection {
    fn default() -> Self {
        Self {
            mu: MuSetting::Value(1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Starting point; zero vector when absent.
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
}

fn default_gamma() -> f64 {
    0.5
}

fn default_alpha() -> f64 {
    0.51
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            gamma: default_gamma(),
            alpha: default_alpha(),
            initial: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceSection {
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub sweep_levels: Vec<f64>,
    #[serde(default = "default_kappa")]
    pub kappa1: f64,
    #[serde(default = "default_kappa")]
    pub kappa2: f64,
    #[serde(default = "default_paths")]
    pub critical_paths: usize,
    #[serde(default = "default_grid")]
    pub critical_grid: usize,
    /// Cache file for the random-scaling critical values.
    #[serde(default)]
    pub critical_cache: Option<PathBuf>,
}

fn default_level() -> f64 {
    0.95
}

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}

fn default_paths() -> usize {
    100_000
}

fn default_grid() -> usize {
    1_000
}

impl Default for InferenceSection {
    fn default() -> Self {
        Self {
            level: default_level(),
            sweep_levels: Vec::new(),
            kappa1: default_kappa(),
            kappa2: default_kappa(),
            critical_paths: default_paths(),
            critical_grid: default_grid(),
            critical_cache: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaKind {
    Identity,
    Ar,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub p: usize,
    pub n: usize,
    #[serde(default = "default_reps")]
    pub replications: usize,
    #[serde(default = "default_sigma")]
    pub sigma: SigmaKind,
    #[serde(default = "default_rho")]
    pub ar_rho: f64,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
    /// Truth including the intercept; all ones when absent.
    #[serde(default)]
    pub theta0: Option<Vec<f64>>,
    #[serde(default)]
    pub checkpoints: Vec<usize>,
}

fn default_reps() -> usize {
    200
}

fn default_sigma() -> SigmaKind {
    SigmaKind::Identity
}

fn default_rho() -> f64 {
    0.5
}

fn default_noise_sd() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSection {
    pub response: String,
    #[serde(default = "default_true")]
    pub standardize: bool,
    /// Number of evenly spaced trajectory checkpoints.
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    /// Ordinal codes for text columns: `[analyze.categorical.<column>] label = code`.
    #[serde(default)]
    pub categorical: BTreeMap<String, BTreeMap<String, f64>>,
}

fn default_true() -> bool {
    true
}

fn default_checkpoints() -> usize {
    20
}

/// One experiment manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub privacy: PrivacySection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub inference: InferenceSection,
    #[serde(default)]
    pub simulate: Option<SimulateSection>,
    #[serde(default)]
    pub analyze: Option<AnalyzeSection>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Confirms the manifest targets `mode` (when it names one).
    pub fn expect_mode(&self, mode: Mode) -> Result<()> {
        match self.mode {
            Some(m) if m != mode => Err(CliError::Config(format!(
                "manifest is for mode {m:?} but {mode:?} was requested"
            ))),
            _ => Ok(()),
        }
    }

    pub fn loss_model(&self) -> Result<LossModel> {
        Ok(LossModel::new(self.model.family, self.model.c, self.model.tau)?)
    }

    pub fn schedule(&self) -> Result<StepSchedule> {
        Ok(StepSchedule::new(self.schedule.gamma, self.schedule.alpha)?)
    }

    pub fn mu(&self) -> Result<Mu> {
        self.privacy.mu.resolve()
    }

    pub fn sim_design(&self) -> Result<SimDesign> {
        let sim = self
            .simulate
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [simulate] section".into()))?;
        let sigma = match sim.sigma {
            SigmaKind::Identity => SigmaStructure::Identity,
            SigmaKind::Ar => SigmaStructure::Ar(sim.ar_rho),
        };
        let design = SimDesign {
            model: self.loss_model()?,
            p: sim.p,
            n: sim.n,
            mu: self.mu()?,
            sigma,
            theta0: sim.theta0.clone().unwrap_or_else(|| vec![1.0; sim.p + 1]),
            noise_sd: sim.noise_sd,
            replications: sim.replications,
            level: self.inference.level,
            sweep_levels: self.inference.sweep_levels.clone(),
            checkpoints: sim.checkpoints.clone(),
            schedule: self.schedule()?,
            kappa1: self.inference.kappa1,
            kappa2: self.inference.kappa2,
            seed: self.seed,
        };
        design.validate()?;
        Ok(design)
    }

    pub fn analyze_section(&self) -> Result<&AnalyzeSection> {
        self.analyze
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [analyze] section".into()))
    }
}
