//! Shared fixtures for the benchmarks.

use ldpsgd::{LossModel, NoiseSource, Observation};
use nalgebra::DVector;

/// Deterministic linear observations with `p` covariates plus an intercept.
pub fn observations(p: usize, count: usize, seed: u64) -> Vec<Observation> {
    let mut rng = NoiseSource::new(seed, 0);
    (0..count)
        .map(|_| {
            let mut x = DVector::zeros(p + 1);
            x[0] = 1.0;
            for j in 1..=p {
                x[j] = rng.standard_normal();
            }
            let y = x.sum() + 0.5 * rng.standard_normal();
            Observation::new(x, y).expect("finite draws")
        })
        .collect()
}

pub fn huber() -> LossModel {
    LossModel::huber_linear(1.345).expect("valid constant")
}
