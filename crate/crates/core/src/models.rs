//! Regression families with Mallow-weighted, bounded gradients.
//!
//! Each family packages the loss ρ(θ, z), its gradient Ψ, a factorization
//! ∇²ρ = m mᵀ of its Hessian, and the constants B₀ ≥ sup‖Ψ‖₂ and
//! B₁ ≥ sup‖m‖₂² that calibrate the privacy noise.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::privacy::{check_finite, Sensitivity};

/// One streamed datum `z = (x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub x: DVector<f64>,
    pub y: f64,
}

impl Observation {
    pub fn new(x: DVector<f64>, y: f64) -> Result<Self> {
        let obs = Self { x, y };
        obs.validate()?;
        Ok(obs)
    }

    pub fn from_slice(x: &[f64], y: f64) -> Result<Self> {
        Self::new(DVector::from_column_slice(x), y)
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_finite(self.x.as_slice(), "covariates")?;
        if !self.y.is_finite() {
            return Err(Error::domain(format!("response is not finite ({})", self.y)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    HuberLinear,
    Logistic,
    Expectile,
}

/// A loss family together with its tuning constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    family: Family,
    c: f64,
    tau: f64,
}

/// Rank-one factor `m` of the per-observation Hessian, `∇²ρ = m mᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianFactor {
    pub m: DVector<f64>,
}

impl HessianFactor {
    pub fn outer(&self) -> DMatrix<f64> {
        &self.m * self.m.transpose()
    }

    pub fn norm_squared(&self) -> f64 {
        self.m.norm_squared()
    }
}

/// Mallow's covariate weight `min(1, 2/‖x‖₂²)`; 1 at the origin.
#[inline]
pub fn mallow_weight(x: &[f64]) -> f64 {
    let sq: f64 = x.iter().map(|v| v * v).sum();
    if sq <= 2.0 {
        1.0
    } else {
        2.0 / sq
    }
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// log(1 + eᵗ) without overflow.
#[inline]
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

impl LossModel {
    pub fn new(family: Family, c: f64, tau: f64) -> Result<Self> {
        match family {
            Family::HuberLinear => Self::huber_linear(c),
            Family::Logistic => Ok(Self::logistic()),
            Family::Expectile => Self::expectile(c, tau),
        }
    }

    /// Mallow-weighted Huber regression with truncation `c`.
    pub fn huber_linear(c: f64) -> Result<Self> {
        check_c(c)?;
        Ok(Self {
            family: Family::HuberLinear,
            c,
            tau: 0.5,
        })
    }

    /// Mallow-weighted logistic regression, labels coded {0, 1}.
    pub fn logistic() -> Self {
        Self {
            family: Family::Logistic,
            c: 1.0,
            tau: 0.5,
        }
    }

    /// Mallow-weighted robust expectile regression at location `tau`.
    pub fn expectile(c: f64, tau: f64) -> Result<Self> {
        check_c(c)?;
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::domain(format!("expectile location must lie in (0,1), got {tau}")));
        }
        Ok(Self {
            family: Family::Expectile,
            c,
            tau,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Uniform bound on ‖Ψ(θ, z)‖₂.
    pub fn b0(&self) -> f64 {
        let sqrt2 = std::f64::consts::SQRT_2;
        match self.family {
            Family::HuberLinear => sqrt2 * self.c,
            Family::Logistic => sqrt2,
            Family::Expectile => sqrt2 * self.c * self.tau.max(1.0 - self.tau),
        }
    }

    /// Uniform bound on ‖m(θ, z)‖₂².
    pub fn b1(&self) -> f64 {
        match self.family {
            Family::HuberLinear => 2.0,
            Family::Logistic => 0.5,
            Family::Expectile => 2.0 * self.tau.max(1.0 - self.tau),
        }
    }

    /// Global sensitivity of Ψ, `2·B₀`.
    pub fn sensitivity_bound(&self) -> Sensitivity {
        Sensitivity::new(2.0 * self.b0()).expect("B0 is finite and positive")
    }

    fn check_dims(&self, theta: &[f64], obs: &Observation) -> Result<()> {
        if theta.len() != obs.x.len() {
            return Err(Error::domain(format!(
                "parameter has dimension {} but covariates have {}",
                theta.len(),
                obs.x.len()
            )));
        }
        self.check_response(obs.y)
    }

    /// Logistic labels are coded {0, 1}; responses outside [0, 1] would
    /// break the gradient bound.
    pub fn check_response(&self, y: f64) -> Result<()> {
        if self.family == Family::Logistic && !(0.0..=1.0).contains(&y) {
            return Err(Error::domain(format!("logistic label must lie in [0, 1], got {y}")));
        }
        Ok(())
    }

    /// Asymmetric weight |τ − 1{r<0}|; 1 for the symmetric Huber family.
    #[inline]
    fn residual_weight(&self, r: f64) -> f64 {
        match self.family {
            Family::Expectile => {
                if r < 0.0 {
                    1.0 - self.tau
                } else {
                    self.tau
                }
            }
            _ => 1.0,
        }
    }

    /// The per-observation loss ρ(θ, z).
    pub fn loss(&self, theta: &[f64], obs: &Observation) -> Result<f64> {
        self.check_dims(theta, obs)?;
        let x = obs.x.as_slice();
        let omega = mallow_weight(x);
        let eta = dot(x, theta);
        let value = match self.family {
            Family::Logistic => softplus(eta) - obs.y * eta,
            _ => {
                let r = obs.y - eta;
                let h = if r.abs() <= self.c {
                    0.5 * r * r
                } else {
                    self.c * r.abs() - 0.5 * self.c * self.c
                };
                self.residual_weight(r) * h
            }
        };
        Ok(value * omega)
    }

    /// Writes Ψ(θ, z) into `out` without validating shapes.
    #[inline]
    pub(crate) fn gradient_into(&self, theta: &[f64], x: &[f64], y: f64, out: &mut [f64]) {
        let omega = mallow_weight(x);
        let eta = dot(x, theta);
        let coef = match self.family {
            Family::Logistic => -(y - sigmoid(eta)),
            _ => {
                let r = y - eta;
                let psi = if r.abs() <= self.c { r } else { self.c * r.signum() };
                -self.residual_weight(r) * psi
            }
        } * omega;
        for (o, xi) in out.iter_mut().zip(x) {
            *o = coef * xi;
        }
    }

    /// Stochastic gradient Ψ(θ, z) = ∇θ ρ(θ, z); always ‖Ψ‖₂ ≤ B₀.
    pub fn gradient(&self, theta: &[f64], obs: &Observation) -> Result<DVector<f64>> {
        self.check_dims(theta, obs)?;
        let mut out = DVector::zeros(theta.len());
        self.gradient_into(theta, obs.x.as_slice(), obs.y, out.as_mut_slice());
        Ok(out)
    }

    /// Factor `m` with `m mᵀ = ∇²ρ(θ, z)`. Zero on the flat Huber tails.
    pub fn hessian_factor(&self, theta: &[f64], obs: &Observation) -> Result<HessianFactor> {
        self.check_dims(theta, obs)?;
        let x = obs.x.as_slice();
        let omega = mallow_weight(x);
        let eta = dot(x, theta);
        let curvature = match self.family {
            Family::Logistic => {
                let s = sigmoid(eta);
                s * (1.0 - s)
            }
            _ => {
                let r = obs.y - eta;
                if r.abs() <= self.c {
                    self.residual_weight(r)
                } else {
                    0.0
                }
            }
        };
        let scale = (curvature * omega).sqrt();
        Ok(HessianFactor {
            m: obs.x.map(|v| v * scale),
        })
    }
}

fn check_c(c: f64) -> Result<()> {
    if c.is_finite() && c > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("Huber truncation must be > 0, got {c}")))
    }
}
