//! Gaussian-mechanism primitives and GDP budget bookkeeping.
//!
//! Every privatized quantity in the crate goes through [`gaussian_mechanism`]
//! (vectors) or [`matrix_gaussian_mechanism`] (symmetric matrices). Both are
//! pure given an explicit [`NoiseSource`], so replaying a seeded source
//! replays the release exactly.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for accepting a matrix as symmetric.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// A GDP parameter μ, or the sentinel that switches privatization off.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Mu {
    Finite(f64),
    Infinite,
}

impl Mu {
    /// Accepts any `mu > 0`; `f64::INFINITY` maps to [`Mu::Infinite`].
    pub fn new(mu: f64) -> Result<Self> {
        if mu == f64::INFINITY {
            Ok(Mu::Infinite)
        } else if mu.is_finite() && mu > 0.0 {
            Ok(Mu::Finite(mu))
        } else {
            Err(Error::domain(format!("privacy parameter must be > 0, got {mu}")))
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Mu::Infinite)
    }

    /// `mu` as a float, `+inf` for the sentinel.
    pub fn value(self) -> f64 {
        match self {
            Mu::Finite(mu) => mu,
            Mu::Infinite => f64::INFINITY,
        }
    }

    /// Standard deviation of the noise calibrated to `sens`: `sens / mu`.
    pub fn noise_scale(self, sens: Sensitivity) -> f64 {
        match self {
            Mu::Finite(mu) => sens.value() / mu,
            Mu::Infinite => 0.0,
        }
    }
}

/// Budget for a stream of individuals: a common μ, optionally overridden per
/// step (`per_step[i]` applies to the `i+1`-th observation; later steps fall
/// back to the common value).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    mu: Mu,
    per_step: Option<Vec<f64>>,
}

impl PrivacyBudget {
    pub fn gdp(mu: f64) -> Result<Self> {
        let mu = Mu::new(mu)?;
        if mu.is_infinite() {
            return Err(Error::domain("use PrivacyBudget::infinite() for the noise-off sentinel"));
        }
        Ok(Self { mu, per_step: None })
    }

    /// Disables all privatization (classical averaged SGD, non-private plug-in).
    pub fn infinite() -> Self {
        Self {
            mu: Mu::Infinite,
            per_step: None,
        }
    }

    pub fn from_mu(mu: Mu) -> Self {
        Self { mu, per_step: None }
    }

    pub fn with_per_step(mu: f64, per_step: Vec<f64>) -> Result<Self> {
        let mut budget = Self::gdp(mu)?;
        if let Some(bad) = per_step.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::domain(format!("per-step budget must be > 0, got {bad}")));
        }
        budget.per_step = Some(per_step);
        Ok(budget)
    }

    pub fn mu(&self) -> Mu {
        self.mu
    }

    pub fn is_infinite(&self) -> bool {
        self.mu.is_infinite()
    }

    pub fn per_step(&self) -> Option<&[f64]> {
        self.per_step.as_deref()
    }

    /// Budget applied at 1-based step `n`.
    pub fn at_step(&self, n: u64) -> Mu {
        match (&self.per_step, n.checked_sub(1)) {
            (Some(steps), Some(i)) if (i as usize) < steps.len() => Mu::Finite(steps[i as usize]),
            _ => self.mu,
        }
    }

    /// GDP parameter of the averaged estimate after `n` steps: the maximum of
    /// the per-individual budgets used so far.
    pub fn spent_after(&self, n: u64) -> Mu {
        let Mu::Finite(common) = self.mu else {
            return Mu::Infinite;
        };
        let steps = self.per_step.as_deref().unwrap_or(&[]);
        let covered = steps.len().min(n as usize);
        let mut used = steps[..covered].to_vec();
        if n as usize > steps.len() || used.is_empty() {
            used.push(common);
        }
        Mu::Finite(compose_parallel(&used).expect("validated budgets"))
    }
}

/// Global ℓ₂ sensitivity of a statistic.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Sensitivity(f64);

impl Sensitivity {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value >= 0.0 {
            Ok(Self(value))
        } else {
            Err(Error::domain(format!("sensitivity must be finite and >= 0, got {value}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Seeded, replayable source of standard normal draws.
///
/// Backed by ChaCha8 keyed by `seed` with `stream` selecting one of 2⁶⁴
/// independent keystreams. Normals are drawn with the ziggurat method.
#[derive(Clone, Debug)]
pub struct NoiseSource {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl NoiseSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for z in out {
            *z = self.rng.sample(StandardNormal);
        }
    }

    pub fn standard_normal_vector(&mut self, dim: usize) -> DVector<f64> {
        DVector::from_fn(dim, |_, _| self.standard_normal())
    }

    /// Symmetric matrix whose upper triangle (with diagonal) is i.i.d. N(0,1),
    /// drawn row by row and mirrored.
    pub fn symmetric_normal_matrix(&mut self, dim: usize) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in i..dim {
                let z = self.standard_normal();
                w[(i, j)] = z;
                w[(j, i)] = z;
            }
        }
        w
    }
}

impl RngCore for NoiseSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

pub(crate) fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::domain(format!("{what}: component {i} is not finite ({})", values[i]))),
        None => Ok(()),
    }
}

/// Adds `sens/mu · Z` to `value`, `Z` standard normal. Identity under
/// [`Mu::Infinite`] (no draws are consumed).
pub fn gaussian_mechanism(
    value: &DVector<f64>,
    sens: Sensitivity,
    mu: Mu,
    rng: &mut NoiseSource,
) -> Result<DVector<f64>> {
    check_finite(value.as_slice(), "gaussian mechanism input")?;
    let mut out = value.clone();
    perturb(out.as_mut_slice(), mu.noise_scale(sens), rng);
    Ok(out)
}

/// In-place noise addition at a given standard deviation; zero scale draws nothing.
#[inline]
pub(crate) fn perturb(values: &mut [f64], scale: f64, rng: &mut NoiseSource) {
    if scale == 0.0 {
        return;
    }
    for v in values {
        *v += scale * rng.standard_normal();
    }
}

/// Adds `scale · W` to a symmetric matrix, `W` a fresh symmetric standard
/// normal matrix. The symmetric part of the input is used so the output is
/// exactly symmetric.
pub fn matrix_gaussian_mechanism(
    matrix: &DMatrix<f64>,
    scale: f64,
    rng: &mut NoiseSource,
) -> Result<DMatrix<f64>> {
    let p = matrix.nrows();
    if matrix.ncols() != p {
        return Err(Error::domain(format!(
            "matrix mechanism needs a square matrix, got {}x{}",
            p,
            matrix.ncols()
        )));
    }
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::domain(format!("noise scale must be finite and >= 0, got {scale}")));
    }
    check_finite(matrix.as_slice(), "matrix mechanism input")?;
    let mut out = matrix.clone();
    for i in 0..p {
        for j in (i + 1)..p {
            let (a, b) = (matrix[(i, j)], matrix[(j, i)]);
            if (a - b).abs() > SYMMETRY_TOLERANCE {
                return Err(Error::domain(format!(
                    "matrix is not symmetric at ({i},{j}): {a} vs {b}"
                )));
            }
            let mid = 0.5 * (a + b);
            out[(i, j)] = mid;
            out[(j, i)] = mid;
        }
    }
    if scale == 0.0 {
        return Ok(out);
    }
    for i in 0..p {
        for j in i..p {
            let noise = scale * rng.standard_normal();
            out[(i, j)] += noise;
            if i != j {
                out[(j, i)] += noise;
            }
        }
    }
    Ok(out)
}

/// Parallel composition over disjoint individuals: the maximum budget.
pub fn compose_parallel(budgets: &[f64]) -> Result<f64> {
    if budgets.is_empty() {
        return Err(Error::Accounting("cannot compose an empty set of budgets".into()));
    }
    let mut max = 0.0_f64;
    for &mu in budgets {
        if mu.is_nan() || mu <= 0.0 {
            return Err(Error::Accounting(format!("budget must be > 0, got {mu}")));
        }
        max = max.max(mu);
    }
    Ok(max)
}

/// Budget of one joint release of the averaged estimate and both noisy
/// sandwich components: `√3 · mu`.
pub fn plugin_release_budget(mu: f64) -> Result<f64> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::domain(format!("privacy parameter must be > 0, got {mu}")));
    }
    Ok(3f64.sqrt() * mu)
}
