//! Online confidence intervals for the averaged LDP-SGD iterate.
//!
//! Two routes are provided: the private plug-in sandwich estimator
//! ([`PluginCovarianceState`]) and random scaling ([`RandomScalingState`]),
//! whose pivot has the nonstandard law tabulated by [`critical_values`].

mod critical;
mod plugin;
mod random_scaling;

pub use critical::{critical_values, pivot_sample, CriticalValueTable};
pub use plugin::{PluginCovarianceState, DEFAULT_KAPPA};
pub use random_scaling::RandomScalingState;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    PluginPrivate,
    PluginNonPrivate,
    RandomScaling,
}

/// A symmetric two-sided interval around a point estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub method: IntervalMethod,
}

impl ConfidenceInterval {
    fn symmetric(center: f64, half_width: f64, level: f64, method: IntervalMethod) -> Self {
        Self {
            lower: center - half_width,
            upper: center + half_width,
            level,
            method,
        }
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

fn check_interval_inputs(center: f64, variance: f64, n: u64, level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("confidence level must lie in (0,1), got {level}")));
    }
    if !variance.is_finite() || variance < 0.0 {
        return Err(Error::domain(format!("variance must be finite and >= 0, got {variance}")));
    }
    if !center.is_finite() {
        return Err(Error::domain(format!("point estimate is not finite ({center})")));
    }
    if n == 0 {
        return Err(Error::UndefinedState("interval needs at least one step".into()));
    }
    Ok(())
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Plug-in interval `θ̄ⱼ ± z_{1−α₀/2} √Σ̂ⱼⱼ / √n`.
pub fn plugin_interval(
    theta_bar_j: f64,
    sigma_hat_jj: f64,
    n: u64,
    level: f64,
    private: bool,
) -> Result<ConfidenceInterval> {
    check_interval_inputs(theta_bar_j, sigma_hat_jj, n, level)?;
    let z = normal_quantile(1.0 - (1.0 - level) / 2.0);
    let half = z * sigma_hat_jj.sqrt() / (n as f64).sqrt();
    let method = if private {
        IntervalMethod::PluginPrivate
    } else {
        IntervalMethod::PluginNonPrivate
    };
    Ok(ConfidenceInterval::symmetric(theta_bar_j, half, level, method))
}

/// Random-scaling interval `θ̄ⱼ ± z^R √V̂ⱼⱼ / √n` with `z^R` read from `table`.
pub fn rs_interval(
    theta_bar_j: f64,
    vhat_jj: f64,
    n: u64,
    level: f64,
    table: &CriticalValueTable,
) -> Result<ConfidenceInterval> {
    check_interval_inputs(theta_bar_j, vhat_jj, n, level)?;
    let z = table.value_at(1.0 - (1.0 - level) / 2.0)?;
    let half = z * vhat_jj.sqrt() / (n as f64).sqrt();
    Ok(ConfidenceInterval::symmetric(theta_bar_j, half, level, IntervalMethod::RandomScaling))
}
