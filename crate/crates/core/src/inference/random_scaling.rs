use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Recursive accumulators for the random-scaling matrix V̂ₙ.
///
/// With partial sums `S_b = Σ_{i≤b} θ̂ᵢ = b θ̄_b`:
/// `Uₙ = Σ_b S_b S_bᵀ = Uₙ₋₁ + n² θ̄ₙ θ̄ₙᵀ` and `vₙ = Σ_b b S_b = vₙ₋₁ + n² θ̄ₙ`.
/// Each update is O(p²) regardless of how many iterates have been seen.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomScalingState {
    u: DMatrix<f64>,
    v: DVector<f64>,
    sum_b2: f64,
    n: u64,
}

impl RandomScalingState {
    pub fn new(dim: usize) -> Self {
        Self {
            u: DMatrix::zeros(dim, dim),
            v: DVector::zeros(dim),
            sum_b2: 0.0,
            n: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn v(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn sum_b2(&self) -> f64 {
        self.sum_b2
    }

    /// Folds in the averaged iterate θ̄ₙ for step `n = self.n() + 1`.
    pub fn update(&mut self, theta_bar: &DVector<f64>, n: u64) -> Result<()> {
        if n != self.n + 1 {
            return Err(Error::Sequencing {
                expected: self.n + 1,
                got: n,
            });
        }
        if theta_bar.len() != self.dim() {
            return Err(Error::domain(format!(
                "averaged iterate has dimension {} but state has {}",
                theta_bar.len(),
                self.dim()
            )));
        }
        let n2 = (n as f64) * (n as f64);
        let p = self.dim();
        for j in 0..p {
            let sj = n2 * theta_bar[j];
            self.v[j] += sj;
            for i in j..p {
                let add = sj * theta_bar[i];
                self.u[(i, j)] += add;
                if i != j {
                    self.u[(j, i)] += add;
                }
            }
        }
        self.sum_b2 += n2;
        self.n = n;
        Ok(())
    }

    /// `V̂ₙ = (Uₙ − θ̄ₙvₙᵀ − vₙθ̄ₙᵀ + θ̄ₙθ̄ₙᵀ Σb²) / n²`, exactly symmetric.
    pub fn vhat(&self, theta_bar: &DVector<f64>) -> Result<DMatrix<f64>> {
        if self.n == 0 {
            return Err(Error::UndefinedState("random scaling matrix needs at least one iterate".into()));
        }
        let p = self.dim();
        if theta_bar.len() != p {
            return Err(Error::domain(format!(
                "averaged iterate has dimension {} but state has {}",
                theta_bar.len(),
                p
            )));
        }
        let inv_n2 = 1.0 / ((self.n as f64) * (self.n as f64));
        let mut out = DMatrix::zeros(p, p);
        for j in 0..p {
            for i in j..p {
                let value = self.u[(i, j)] - theta_bar[i] * self.v[j] - self.v[i] * theta_bar[j]
                    + theta_bar[i] * theta_bar[j] * self.sum_b2;
                out[(i, j)] = value * inv_n2;
                out[(j, i)] = value * inv_n2;
            }
        }
        Ok(out)
    }
}
