//! Monte Carlo coverage experiments: synthetic streams, replications and
//! CP/AL aggregation.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{
    plugin_interval, rs_interval, ConfidenceInterval, CriticalValueTable,
    PluginCovarianceState, RandomScalingState, DEFAULT_KAPPA,
};
use crate::models::{Family, LossModel, Observation};
use crate::privacy::{Mu, NoiseSource, PrivacyBudget};
use crate::sgd::{SgdState, StepSchedule};

/// Covariance of the non-intercept covariates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaStructure {
    Identity,
    /// `Σⱼₖ = ρ^|j−k|`.
    Ar(f64),
}

impl SigmaStructure {
    pub fn matrix(&self, p: usize) -> DMatrix<f64> {
        match *self {
            SigmaStructure::Identity => DMatrix::identity(p, p),
            SigmaStructure::Ar(rho) => {
                DMatrix::from_fn(p, p, |j, k| rho.powi((j as i32 - k as i32).abs()))
            }
        }
    }
}

/// Full description of one simulation cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub model: LossModel,
    /// Number of covariates excluding the intercept.
    pub p: usize,
    /// Stream length.
    pub n: usize,
    pub mu: Mu,
    pub sigma: SigmaStructure,
    /// True parameter, intercept first (`p + 1` entries).
    pub theta0: Vec<f64>,
    pub noise_sd: f64,
    pub replications: usize,
    pub level: f64,
    /// Further confidence levels evaluated on the same replications.
    #[serde(default)]
    pub sweep_levels: Vec<f64>,
    /// Stream positions at which intervals are formed; empty means `[n]`.
    #[serde(default)]
    pub checkpoints: Vec<usize>,
    pub schedule: StepSchedule,
    pub kappa1: f64,
    pub kappa2: f64,
    pub seed: u64,
}

impl SimDesign {
    /// Linear design with θ₀ = 1, N(0, 0.5²) errors, Huber c = 1.345 and
    /// identity covariates, 200 replications at the 95% level.
    pub fn linear(p: usize, n: usize, mu: Mu) -> Self {
        Self {
            model: LossModel::huber_linear(1.345).expect("valid constant"),
            p,
            n,
            mu,
            sigma: SigmaStructure::Identity,
            theta0: vec![1.0; p + 1],
            noise_sd: 0.5,
            replications: 200,
            level: 0.95,
            sweep_levels: Vec::new(),
            checkpoints: Vec::new(),
            schedule: StepSchedule::default(),
            kappa1: DEFAULT_KAPPA,
            kappa2: DEFAULT_KAPPA,
            seed: 20240101,
        }
    }

    pub fn dim(&self) -> usize {
        self.p + 1
    }

    pub fn budget(&self) -> PrivacyBudget {
        PrivacyBudget::from_mu(self.mu)
    }

    pub fn is_private(&self) -> bool {
        !self.mu.is_infinite()
    }

    /// Primary level followed by the sweep levels.
    pub fn levels(&self) -> Vec<f64> {
        let mut out = vec![self.level];
        out.extend(self.sweep_levels.iter().copied().filter(|l| *l != self.level));
        out
    }

    pub fn checkpoint_list(&self) -> Vec<usize> {
        if self.checkpoints.is_empty() {
            vec![self.n]
        } else {
            self.checkpoints.clone()
        }
    }

    /// Quantile levels a critical-value table must cover for this design.
    pub fn critical_levels(&self) -> Vec<f64> {
        critical_levels_for(&self.levels())
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 && self.theta0.is_empty() {
            return Err(Error::domain("design needs at least one parameter"));
        }
        if self.theta0.len() != self.p + 1 {
            return Err(Error::domain(format!(
                "theta0 has {} entries, expected p + 1 = {}",
                self.theta0.len(),
                self.p + 1
            )));
        }
        if self.n == 0 || self.replications == 0 {
            return Err(Error::domain("stream length and replications must be >= 1"));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd > 0.0) {
            return Err(Error::domain(format!("noise sd must be > 0, got {}", self.noise_sd)));
        }
        for l in self.levels() {
            if !(l > 0.0 && l < 1.0) {
                return Err(Error::domain(format!("confidence level must lie in (0,1), got {l}")));
            }
        }
        let cps = self.checkpoint_list();
        if cps.windows(2).any(|w| w[0] >= w[1]) || cps[0] == 0 || *cps.last().unwrap() > self.n {
            return Err(Error::domain("checkpoints must be strictly increasing within 1..=n"));
        }
        if let SigmaStructure::Ar(rho) = self.sigma {
            if rho.is_nan() || rho.abs() >= 1.0 {
                return Err(Error::domain(format!("AR coefficient must lie in (-1,1), got {rho}")));
            }
        }
        PluginCovarianceState::with_floors(1, self.kappa1, self.kappa2)?;
        Ok(())
    }
}

/// `{0.5} ∪ {1 − (1 − level)/2}` for each confidence level, sorted.
pub fn critical_levels_for(levels: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = levels.iter().map(|l| 1.0 - (1.0 - l) / 2.0).collect();
    out.push(0.5);
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Synthetic observations `x = (1, s)`, `s ~ N(0, Σ)`.
pub struct ObservationStream {
    chol: DMatrix<f64>,
    theta0: DVector<f64>,
    family: Family,
    noise_sd: f64,
    remaining: usize,
    rng: NoiseSource,
    scratch: Vec<f64>,
}

impl Iterator for ObservationStream {
    type Item = Observation;

    fn next(&mut self) -> Option<Observation> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let p = self.chol.nrows();
        self.rng.fill_standard_normal(&mut self.scratch);
        let mut x = DVector::zeros(p + 1);
        x[0] = 1.0;
        for j in 0..p {
            let mut s = 0.0;
            for k in 0..=j {
                s += self.chol[(j, k)] * self.scratch[k];
            }
            x[j + 1] = s;
        }
        let eta = x.dot(&self.theta0);
        let y = match self.family {
            Family::Logistic => {
                let prob = 1.0 / (1.0 + (-eta).exp());
                if self.rng.random::<f64>() < prob {
                    1.0
                } else {
                    0.0
                }
            }
            Family::HuberLinear | Family::Expectile => eta + self.noise_sd * self.rng.standard_normal(),
        };
        Some(Observation { x, y })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

/// Deterministic stream for `design` drawn from `rng`.
pub fn generate_stream(design: &SimDesign, rng: NoiseSource) -> Result<ObservationStream> {
    design.validate()?;
    let sigma = design.sigma.matrix(design.p);
    let chol = Cholesky::new(sigma)
        .ok_or_else(|| Error::domain("covariate covariance is not positive definite"))?
        .l();
    Ok(ObservationStream {
        chol,
        theta0: DVector::from_column_slice(&design.theta0),
        family: design.model.family(),
        noise_sd: design.noise_sd,
        remaining: design.n,
        rng,
        scratch: vec![0.0; design.p],
    })
}

const STREAM_DATA: u64 = 0;
const STREAM_SGD: u64 = 1;
const STREAM_RELEASE: u64 = 2;

/// Keystream for one purpose within one replication.
pub fn replication_source(seed: u64, index: usize, purpose: u64) -> NoiseSource {
    NoiseSource::new(seed, ((index as u64) << 2) | purpose)
}

/// Which interval construction a row belongs to; privacy is a property of the design.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Plugin,
    RandomScaling,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Plugin, Method::RandomScaling];

    /// Conventional short label: PI/PPI and RS/PRS.
    pub fn label(self, private: bool) -> &'static str {
        match (self, private) {
            (Method::Plugin, false) => "PI",
            (Method::Plugin, true) => "PPI",
            (Method::RandomScaling, false) => "RS",
            (Method::RandomScaling, true) => "PRS",
        }
    }
}

/// Intervals for every coefficient at one confidence level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelIntervals {
    pub level: f64,
    pub plugin: Vec<ConfidenceInterval>,
    pub random_scaling: Vec<ConfidenceInterval>,
}

impl LevelIntervals {
    pub fn for_method(&self, method: Method) -> &[ConfidenceInterval] {
        match method {
            Method::Plugin => &self.plugin,
            Method::RandomScaling => &self.random_scaling,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointOutcome {
    pub n: usize,
    pub theta_bar: Vec<f64>,
    /// Diagonal of the plug-in sandwich Σ̂ₙ.
    pub sigma_diag: Vec<f64>,
    /// Diagonal of the random-scaling matrix V̂ₙ.
    pub vhat_diag: Vec<f64>,
    pub intervals: Vec<LevelIntervals>,
}

impl CheckpointOutcome {
    pub fn at_level(&self, level: f64) -> Option<&LevelIntervals> {
        self.intervals.iter().find(|l| (l.level - level).abs() < 1e-12)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub index: usize,
    pub checkpoints: Vec<CheckpointOutcome>,
}

/// One stream, one LDP-SGD pass, both interval constructions at every
/// checkpoint.
pub fn run_replication(
    design: &SimDesign,
    index: usize,
    table: &CriticalValueTable,
) -> Result<ReplicationOutcome> {
    replicate(design, index, table).map_err(|e| e.at_replication(index))
}

fn replicate(design: &SimDesign, index: usize, table: &CriticalValueTable) -> Result<ReplicationOutcome> {
    let stream = generate_stream(design, replication_source(design.seed, index, STREAM_DATA))?;
    let dim = design.dim();
    let model = design.model;
    let budget = design.budget();
    let levels = design.levels();
    let mut sgd = SgdState::new(
        model,
        design.schedule,
        budget.clone(),
        DVector::zeros(dim),
        replication_source(design.seed, index, STREAM_SGD),
    )?;
    let mut release_rng = replication_source(design.seed, index, STREAM_RELEASE);
    let mut rs = RandomScalingState::new(dim);
    let mut plugin = PluginCovarianceState::with_floors(dim, design.kappa1, design.kappa2)?;

    let checkpoints = design.checkpoint_list();
    let mut next_cp = checkpoints.iter().peekable();
    let mut outcomes = Vec::with_capacity(checkpoints.len());

    for (i, obs) in stream.enumerate() {
        let factor = model.hessian_factor(sgd.theta().as_slice(), &obs).map_err(|e| e.at_step(i))?;
        let grad = sgd.step(&obs).map_err(|e| e.at_step(i))?;
        plugin.update(grad, &factor)?;
        rs.update(sgd.theta_bar(), sgd.n())?;

        if next_cp.peek().is_some_and(|&&cp| cp == i + 1) {
            next_cp.next();
            let n = sgd.n();
            let theta_bar = sgd.theta_bar();
            let sigma = plugin.sandwich(&model, &budget, &mut release_rng)?;
            let vhat = rs.vhat(theta_bar)?;
            let mut intervals = Vec::with_capacity(levels.len());
            for &level in &levels {
                let plugin_cis = (0..dim)
                    .map(|j| plugin_interval(theta_bar[j], sigma[(j, j)], n, level, design.is_private()))
                    .collect::<Result<Vec<_>>>()?;
                let rs_cis = (0..dim)
                    .map(|j| rs_interval(theta_bar[j], vhat[(j, j)], n, level, table))
                    .collect::<Result<Vec<_>>>()?;
                intervals.push(LevelIntervals {
                    level,
                    plugin: plugin_cis,
                    random_scaling: rs_cis,
                });
            }
            outcomes.push(CheckpointOutcome {
                n: i + 1,
                theta_bar: theta_bar.iter().copied().collect(),
                sigma_diag: sigma.diagonal().iter().copied().collect(),
                vhat_diag: vhat.diagonal().iter().copied().collect(),
                intervals,
            });
        }
    }
    Ok(ReplicationOutcome {
        index,
        checkpoints: outcomes,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSummary {
    pub j: usize,
    pub coverage: f64,
    pub mean_length: f64,
}

/// CP/AL for one (checkpoint, level, method) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub n: usize,
    pub level: f64,
    pub method: Method,
    pub label: String,
    pub cp: f64,
    pub cp_se: f64,
    pub al: f64,
    pub al_se: f64,
    /// Every coefficient including the intercept (`j = 0`).
    pub coefficients: Vec<CoefficientSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub design: SimDesign,
    pub replications: usize,
    /// How `cp_se`/`al_se` were computed.
    pub se_method: String,
    pub cells: Vec<ReportCell>,
}

impl SimulationReport {
    pub fn cell(&self, n: usize, level: f64, method: Method) -> Option<&ReportCell> {
        self.cells
            .iter()
            .find(|c| c.n == n && c.method == method && (c.level - level).abs() < 1e-12)
    }
}

pub const SE_BLOCKS: usize = 4;

fn block_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// CP/AL over non-intercept coefficients, with standard errors taken as the
/// standard deviation of block means over [`SE_BLOCKS`] equal replication blocks.
pub fn aggregate(outcomes: &[ReplicationOutcome], design: &SimDesign) -> Result<SimulationReport> {
    if outcomes.is_empty() {
        return Err(Error::domain("no replications to aggregate"));
    }
    let dim = design.dim();
    let first_coef = if dim > 1 { 1 } else { 0 };
    let reps = outcomes.len();
    let blocks = SE_BLOCKS.min(reps);
    let mut cells = Vec::new();
    for (ci, &n) in design.checkpoint_list().iter().enumerate() {
        for level in design.levels() {
            for method in Method::ALL {
                let mut covered = vec![0usize; dim];
                let mut length = vec![0.0; dim];
                let mut block_cp = vec![0.0; blocks];
                let mut block_al = vec![0.0; blocks];
                let mut block_count = vec![0usize; blocks];
                for (r, outcome) in outcomes.iter().enumerate() {
                    let cp = outcome.checkpoints.get(ci).filter(|c| c.n == n).ok_or_else(|| {
                        Error::domain(format!("replication {} lacks checkpoint {n}", outcome.index))
                    })?;
                    let cis = cp
                        .at_level(level)
                        .ok_or_else(|| Error::domain(format!("missing level {level}")))?
                        .for_method(method);
                    let b = r * blocks / reps;
                    block_count[b] += 1;
                    for (j, ci) in cis.iter().enumerate() {
                        let hit = ci.contains(design.theta0[j]);
                        covered[j] += hit as usize;
                        length[j] += ci.length();
                        if j >= first_coef {
                            block_cp[b] += hit as u8 as f64;
                            block_al[b] += ci.length();
                        }
                    }
                }
                let k = (dim - first_coef) as f64;
                for b in 0..blocks {
                    let denom = block_count[b] as f64 * k;
                    block_cp[b] /= denom;
                    block_al[b] /= denom;
                }
                let coefficients: Vec<CoefficientSummary> = (0..dim)
                    .map(|j| CoefficientSummary {
                        j,
                        coverage: covered[j] as f64 / reps as f64,
                        mean_length: length[j] / reps as f64,
                    })
                    .collect();
                let cp = coefficients[first_coef..].iter().map(|c| c.coverage).sum::<f64>() / k;
                let al = coefficients[first_coef..].iter().map(|c| c.mean_length).sum::<f64>() / k;
                cells.push(ReportCell {
                    n,
                    level,
                    method,
                    label: method.label(design.is_private()).to_string(),
                    cp,
                    cp_se: block_sd(&block_cp),
                    al,
                    al_se: block_sd(&block_al),
                    coefficients,
                });
            }
        }
    }
    Ok(SimulationReport {
        design: design.clone(),
        replications: reps,
        se_method: format!("sd of {blocks} replication-block means"),
        cells,
    })
}

/// Runs every replication (in parallel) and aggregates. Output does not
/// depend on scheduling.
pub fn run_simulation(
    design: &SimDesign,
    table: &CriticalValueTable,
) -> Result<(Vec<ReplicationOutcome>, SimulationReport)> {
    design.validate()?;
    for level in design.critical_levels() {
        table.value_at(level)?;
    }
    let outcomes = (0..design.replications)
        .into_par_iter()
        .map(|r| run_replication(design, r, table))
        .collect::<Result<Vec<_>>>()?;
    let report = aggregate(&outcomes, design)?;
    Ok((outcomes, report))
}
