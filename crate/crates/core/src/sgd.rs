//! The LDP-SGD recursion with Polyak–Ruppert averaging.
//!
//! `θ̂ₙ = θ̂ₙ₋₁ − γₙ (Ψ(θ̂ₙ₋₁, zₙ) + (2B₀/μₙ) ξₙ)` with `γₙ = γ n^(−α)`.
//! Under the infinite budget the noise term vanishes and the recursion is
//! classical averaged SGD.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{LossModel, Observation};
use crate::privacy::{perturb, NoiseSource, PrivacyBudget};

/// Polynomially decaying step sizes `γ n^(−α)`, `1/2 < α < 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    gamma: f64,
    alpha: f64,
}

impl StepSchedule {
    pub fn new(gamma: f64, alpha: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::domain(format!("step scale must be > 0, got {gamma}")));
        }
        if !(alpha > 0.5 && alpha < 1.0) {
            return Err(Error::domain(format!("decay exponent must lie in (1/2, 1), got {alpha}")));
        }
        Ok(Self { gamma, alpha })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Step size at 1-based step `n`.
    #[inline]
    pub fn rate(&self, n: u64) -> f64 {
        self.gamma * (n as f64).powf(-self.alpha)
    }
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            alpha: 0.51,
        }
    }
}

/// Running state of one LDP-SGD pass.
#[derive(Clone, Debug)]
pub struct SgdState {
    theta: DVector<f64>,
    theta_bar: DVector<f64>,
    n: u64,
    schedule: StepSchedule,
    model: LossModel,
    budget: PrivacyBudget,
    rng: NoiseSource,
    grad: DVector<f64>,
    noisy: DVector<f64>,
}

impl SgdState {
    pub fn new(
        model: LossModel,
        schedule: StepSchedule,
        budget: PrivacyBudget,
        initial: DVector<f64>,
        rng: NoiseSource,
    ) -> Result<Self> {
        let p = initial.len();
        if p == 0 {
            return Err(Error::domain("parameter dimension must be positive"));
        }
        crate::privacy::check_finite(initial.as_slice(), "initial point")?;
        Ok(Self {
            theta_bar: initial.clone(),
            theta: initial,
            n: 0,
            schedule,
            model,
            budget,
            rng,
            grad: DVector::zeros(p),
            noisy: DVector::zeros(p),
        })
    }

    /// Last iterate θ̂ₙ.
    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    /// Averaged iterate θ̄ₙ (the initial point while `n == 0`).
    pub fn theta_bar(&self) -> &DVector<f64> {
        &self.theta_bar
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn model(&self) -> &LossModel {
        &self.model
    }

    pub fn schedule(&self) -> &StepSchedule {
        &self.schedule
    }

    pub fn budget(&self) -> &PrivacyBudget {
        &self.budget
    }

    /// Consumes one observation. On error the state is left untouched.
    ///
    /// Returns the noise-free gradient Ψ(θ̂ₙ₋₁, zₙ) that drove the step.
    pub fn step(&mut self, obs: &Observation) -> Result<&DVector<f64>> {
        if obs.dim() != self.dim() {
            return Err(Error::domain(format!(
                "observation has dimension {} but parameter has {}",
                obs.dim(),
                self.dim()
            )));
        }
        obs.validate()?;
        self.model.check_response(obs.y)?;

        let n = self.n + 1;
        let rate = self.schedule.rate(n);
        self.model
            .gradient_into(self.theta.as_slice(), obs.x.as_slice(), obs.y, self.grad.as_mut_slice());

        let scale = self.budget.at_step(n).noise_scale(self.model.sensitivity_bound());
        self.noisy.copy_from(&self.grad);
        perturb(self.noisy.as_mut_slice(), scale, &mut self.rng);

        let inv_n = 1.0 / n as f64;
        for j in 0..self.theta.len() {
            self.theta[j] -= rate * self.noisy[j];
            self.theta_bar[j] += (self.theta[j] - self.theta_bar[j]) * inv_n;
        }
        self.n = n;
        Ok(&self.grad)
    }
}

/// Folds [`SgdState::step`] over `stream` once, in order.
pub fn run_stream<I>(
    model: LossModel,
    schedule: StepSchedule,
    budget: PrivacyBudget,
    initial: DVector<f64>,
    stream: I,
    rng: NoiseSource,
) -> Result<SgdState>
where
    I: IntoIterator<Item = Observation>,
{
    let mut state = SgdState::new(model, schedule, budget, initial, rng)?;
    for (i, obs) in stream.into_iter().enumerate() {
        state.step(&obs).map_err(|e| e.at_step(i))?;
    }
    if state.n == 0 {
        return Err(Error::domain("stream is empty"));
    }
    Ok(state)
}
