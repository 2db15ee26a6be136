use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::models::{HessianFactor, LossModel};
use crate::privacy::{matrix_gaussian_mechanism, Mu, NoiseSource, PrivacyBudget};

/// Default eigenvalue floor for both sandwich components.
pub const DEFAULT_KAPPA: f64 = 1e-3;

/// Online accumulators for the plug-in sandwich `Â⁻¹ Ŝ Â⁻¹`.
///
/// Each update adds `m mᵀ` and `Ψ Ψᵀ` evaluated at the pre-step iterate.
/// Privatization happens only when a covariance is requested.
#[derive(Clone, Debug, PartialEq)]
pub struct PluginCovarianceState {
    hessian_sum: DMatrix<f64>,
    gram_sum: DMatrix<f64>,
    n: u64,
    kappa1: f64,
    kappa2: f64,
}

impl PluginCovarianceState {
    pub fn new(dim: usize) -> Self {
        Self::with_floors(dim, DEFAULT_KAPPA, DEFAULT_KAPPA).expect("default floors are valid")
    }

    pub fn with_floors(dim: usize, kappa1: f64, kappa2: f64) -> Result<Self> {
        for k in [kappa1, kappa2] {
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::domain(format!("eigenvalue floor must be > 0, got {k}")));
            }
        }
        Ok(Self {
            hessian_sum: DMatrix::zeros(dim, dim),
            gram_sum: DMatrix::zeros(dim, dim),
            n: 0,
            kappa1,
            kappa2,
        })
    }

    pub fn dim(&self) -> usize {
        self.gram_sum.nrows()
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn hessian_sum(&self) -> &DMatrix<f64> {
        &self.hessian_sum
    }

    pub fn gram_sum(&self) -> &DMatrix<f64> {
        &self.gram_sum
    }

    pub fn kappas(&self) -> (f64, f64) {
        (self.kappa1, self.kappa2)
    }

    pub fn update(&mut self, grad: &DVector<f64>, factor: &HessianFactor) -> Result<()> {
        let p = self.dim();
        if grad.len() != p || factor.m.len() != p {
            return Err(Error::domain(format!(
                "plug-in update expects dimension {p}, got gradient {} and factor {}",
                grad.len(),
                factor.m.len()
            )));
        }
        let m = &factor.m;
        for j in 0..p {
            for i in j..p {
                let h = m[i] * m[j];
                let g = grad[i] * grad[j];
                self.hessian_sum[(i, j)] += h;
                self.gram_sum[(i, j)] += g;
                if i != j {
                    self.hessian_sum[(j, i)] += h;
                    self.gram_sum[(j, i)] += g;
                }
            }
        }
        self.n += 1;
        Ok(())
    }

    /// Noisy components `(Â, Ŝ)` before eigenvalue flooring.
    ///
    /// `Â = Σ m mᵀ / n + (2B₁/(nμ)) M₁` and
    /// `Ŝ = Σ Ψ Ψᵀ / n + (4B₀²/μ²) I + (2B₀²/(nμ)) M₂`. Passing `None` for the
    /// noise source zeroes M₁ and M₂ while keeping the privacy inflation.
    pub fn noisy_components(
        &self,
        model: &LossModel,
        mu: Mu,
        noise: Option<&mut NoiseSource>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        if self.n == 0 {
            return Err(Error::UndefinedState("plug-in covariance needs at least one update".into()));
        }
        let n = self.n as f64;
        let a = &self.hessian_sum / n;
        let mut s = &self.gram_sum / n;
        let Mu::Finite(mu) = mu else {
            return Ok((a, s));
        };
        let b0_sq = model.b0() * model.b0();
        for j in 0..self.dim() {
            s[(j, j)] += 4.0 * b0_sq / (mu * mu);
        }
        match noise {
            Some(rng) => {
                let a = matrix_gaussian_mechanism(&a, 2.0 * model.b1() / (n * mu), rng)?;
                let s = matrix_gaussian_mechanism(&s, 2.0 * b0_sq / (n * mu), rng)?;
                Ok((a, s))
            }
            None => Ok((a, s)),
        }
    }

    /// Sandwich covariance `Â*⁻¹ Ŝ* Â*⁻¹` after flooring the spectra of the
    /// noisy components at κ₁ and κ₂. Fresh noise is drawn on every call.
    pub fn sandwich(
        &self,
        model: &LossModel,
        budget: &PrivacyBudget,
        rng: &mut NoiseSource,
    ) -> Result<DMatrix<f64>> {
        let (a, s) = self.noisy_components(model, budget.mu(), Some(rng))?;
        Ok(sandwich_from_components(&a, &s, self.kappa1, self.kappa2))
    }
}

/// Rebuilds `Γ diag(max(κ, d)) Γᵀ`, optionally inverting the floored spectrum.
fn floor_spectrum(m: &DMatrix<f64>, kappa: f64, invert: bool) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let d = eig.eigenvalues.map(|x| {
        let f = x.max(kappa);
        if invert {
            1.0 / f
        } else {
            f
        }
    });
    let g = &eig.eigenvectors;
    g * DMatrix::from_diagonal(&d) * g.transpose()
}

/// Floors both spectra and forms the sandwich; the result is exactly symmetric.
pub(crate) fn sandwich_from_components(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    kappa1: f64,
    kappa2: f64,
) -> DMatrix<f64> {
    let a_inv = floor_spectrum(a, kappa1, true);
    let s_star = floor_spectrum(s, kappa2, false);
    let sigma = &a_inv * s_star * &a_inv;
    (&sigma + sigma.transpose()) * 0.5
}
