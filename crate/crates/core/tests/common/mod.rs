//! Independent oracles shared by the integration suites and the acceptance run.
#![allow(dead_code)]

use ldpsgd::{
    critical_values, CriticalValueTable, Family, LossModel, NoiseSource, Observation,
};
use nalgebra::{DMatrix, DVector};

pub const FAMILIES: [Family; 3] = [Family::HuberLinear, Family::Logistic, Family::Expectile];

pub fn model_for(family: Family) -> LossModel {
    match family {
        Family::HuberLinear => LossModel::huber_linear(1.345).unwrap(),
        Family::Logistic => LossModel::logistic(),
        Family::Expectile => LossModel::expectile(1.345, 0.3).unwrap(),
    }
}

/// Critical values covering the 90/95/99% two-sided levels.
pub fn critical_table(paths: usize, seed: u64) -> CriticalValueTable {
    let levels = [0.5, 0.95, 0.975, 0.995];
    critical_values(&levels, paths, 1_000, &mut NoiseSource::new(seed, 0)).unwrap()
}

/// A random (θ, z) pair whose residual keeps at least `margin` away from every
/// point where the loss is not twice differentiable.
pub fn smooth_point(model: &LossModel, rng: &mut NoiseSource, margin: f64) -> (Vec<f64>, Observation) {
    loop {
        let dim = 2 + (rng.standard_normal().abs() * 2.0) as usize % 4;
        let mut x = vec![1.0];
        x.extend((1..dim).map(|_| 1.5 * rng.standard_normal()));
        let theta: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
        let eta: f64 = x.iter().zip(&theta).map(|(a, b)| a * b).sum();
        let y = match model.family() {
            Family::Logistic => (rng.standard_normal() > 0.0) as u8 as f64,
            _ => eta + 2.0 * rng.standard_normal(),
        };
        let r = y - eta;
        let ok = match model.family() {
            Family::Logistic => true,
            Family::HuberLinear => (r.abs() - model.c()).abs() > margin,
            Family::Expectile => (r.abs() - model.c()).abs() > margin && r.abs() > margin,
        };
        if ok {
            return (theta, Observation::from_slice(&x, y).unwrap());
        }
    }
}

pub fn fd_gradient(model: &LossModel, theta: &[f64], obs: &Observation, h: f64) -> Vec<f64> {
    (0..theta.len())
        .map(|j| {
            let mut up = theta.to_vec();
            let mut dn = theta.to_vec();
            up[j] += h;
            dn[j] -= h;
            (model.loss(&up, obs).unwrap() - model.loss(&dn, obs).unwrap()) / (2.0 * h)
        })
        .collect()
}

/// Second-order central differences of the loss.
pub fn fd_hessian(model: &LossModel, theta: &[f64], obs: &Observation, h: f64) -> DMatrix<f64> {
    let d = theta.len();
    let f = |dj: f64, j: usize, dk: f64, k: usize| {
        let mut t = theta.to_vec();
        t[j] += dj;
        t[k] += dk;
        model.loss(&t, obs).unwrap()
    };
    DMatrix::from_fn(d, d, |j, k| {
        (f(h, j, h, k) - f(h, j, -h, k) - f(-h, j, h, k) + f(-h, j, -h, k)) / (4.0 * h * h)
    })
}

/// Running means θ̄₁..θ̄ₙ of an iterate sequence.
pub fn running_means(iterates: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(iterates.len());
    let mut sum = DVector::zeros(iterates[0].len());
    for (i, t) in iterates.iter().enumerate() {
        sum += t;
        out.push(&sum / (i + 1) as f64);
    }
    out
}

/// `n⁻² Σₛ s² (θ̄ₛ − θ̄ₙ)(θ̄ₛ − θ̄ₙ)ᵀ` summed directly.
pub fn vhat_double_sum(means: &[DVector<f64>]) -> DMatrix<f64> {
    let n = means.len();
    let last = &means[n - 1];
    let d = last.len();
    let mut out = DMatrix::zeros(d, d);
    for (i, m) in means.iter().enumerate() {
        let s = (i + 1) as f64;
        let diff = m - last;
        for j in 0..d {
            for k in 0..d {
                out[(j, k)] += s * s * diff[j] * diff[k];
            }
        }
    }
    out / (n * n) as f64
}

/// Anderson–Darling A² adjusted for estimated mean and variance.
pub fn anderson_darling(sample: &[f64]) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let sd = (sample.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut z: Vec<f64> = sample.iter().map(|v| (v - mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    let std = Normal::standard();
    let m = z.len();
    let mut s = 0.0;
    for i in 0..m {
        let a = std.cdf(z[i]).clamp(1e-300, 1.0 - 1e-16);
        let b = std.cdf(z[m - 1 - i]).clamp(1e-300, 1.0 - 1e-16);
        s += (2.0 * i as f64 + 1.0) * (a.ln() + (1.0 - b).ln());
    }
    let a2 = -n - s / n;
    a2 * (1.0 + 0.75 / n + 2.25 / (n * n))
}

/// 1% critical value of the adjusted statistic.
pub const AD_CRITICAL_1PCT: f64 = 1.035;

pub fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Least-squares slope of `y` on `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let (mx, _) = mean_var(x);
    let (my, _) = mean_var(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
