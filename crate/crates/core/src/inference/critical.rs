//! Monte Carlo critical values of the random-scaling pivot
//! `W(1) / (∫₀¹ (W(r) − r W(1))² dr)^{1/2}`.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::privacy::NoiseSource;

const PATHS_PER_CHUNK: usize = 4096;
const LEVEL_TOLERANCE: f64 = 1e-12;

/// Quantile levels paired with critical values, sorted by level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalValueTable {
    entries: Vec<(f64, f64)>,
}

impl CriticalValueTable {
    pub fn new(mut entries: Vec<(f64, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::domain("critical value table is empty"));
        }
        for &(level, value) in &entries {
            if !(level > 0.0 && level < 1.0) || !value.is_finite() {
                return Err(Error::domain(format!("invalid table entry ({level}, {value})")));
            }
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in entries.windows(2) {
            if w[1].0 - w[0].0 < LEVEL_TOLERANCE {
                return Err(Error::domain(format!("duplicate level {}", w[0].0)));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::domain(format!(
                    "critical values must be monotone in level: {} at {} but {} at {}",
                    w[0].1, w[0].0, w[1].1, w[1].0
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn levels(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    /// Critical value at `level`, linearly interpolated between tabulated
    /// levels. Levels outside the tabulated range are an error.
    pub fn value_at(&self, level: f64) -> Result<f64> {
        let first = self.entries[0];
        let last = self.entries[self.entries.len() - 1];
        if level < first.0 - LEVEL_TOLERANCE || level > last.0 + LEVEL_TOLERANCE {
            return Err(Error::domain(format!(
                "level {level} outside tabulated range [{}, {}]",
                first.0, last.0
            )));
        }
        let idx = self.entries.partition_point(|e| e.0 < level - LEVEL_TOLERANCE);
        let hi = self.entries[idx.min(self.entries.len() - 1)];
        if (hi.0 - level).abs() <= LEVEL_TOLERANCE || idx == 0 {
            return Ok(hi.1);
        }
        let lo = self.entries[idx - 1];
        let t = (level - lo.0) / (hi.0 - lo.0);
        Ok(lo.1 + t * (hi.1 - lo.1))
    }

    /// Two-column plain text, one `level value` pair per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (level, value) in &self.entries {
            out.push_str(&format!("{level}\t{value}\n"));
        }
        out
    }

    /// Parses [`to_text`](Self::to_text) output; `#` lines are comments.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split_whitespace();
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| Error::domain(format!("line {}: expected two columns", lineno + 1)))?
                    .parse::<f64>()
                    .map_err(|e| Error::domain(format!("line {}: {e}", lineno + 1)))
            };
            let level = parse(cols.next())?;
            let value = parse(cols.next())?;
            if cols.next().is_some() {
                return Err(Error::domain(format!("line {}: expected two columns", lineno + 1)));
            }
            entries.push((level, value));
        }
        Self::new(entries)
    }
}

/// One draw of the pivot from a Brownian path with `grid` i.i.d. normal
/// increments; the integral is a left-endpoint Riemann sum.
fn pivot(rng: &mut NoiseSource, grid: usize) -> f64 {
    let g = grid as f64;
    let step_sd = 1.0 / g.sqrt();
    // Σ W_k², Σ r_k W_k and Σ r_k² over k = 0..grid-1 (W_0 = 0).
    let (mut sum_w2, mut sum_rw, mut sum_r2) = (0.0, 0.0, 0.0);
    let mut w = 0.0;
    for k in 0..grid {
        let r = k as f64 / g;
        sum_w2 += w * w;
        sum_rw += r * w;
        sum_r2 += r * r;
        w += step_sd * rng.standard_normal();
    }
    let integral = (sum_w2 - 2.0 * w * sum_rw + w * w * sum_r2) / g;
    w / integral.sqrt()
}

/// Draws `paths` pivot values. Chunks of paths use their own keystreams, so
/// the sample does not depend on the number of worker threads.
pub fn pivot_sample(paths: usize, grid: usize, rng: &mut NoiseSource) -> Vec<f64> {
    let seed = rng.next_u64();
    let chunks = paths.div_ceil(PATHS_PER_CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut local = NoiseSource::new(seed, c as u64);
            let count = PATHS_PER_CHUNK.min(paths - c * PATHS_PER_CHUNK);
            (0..count).map(move |_| pivot(&mut local, grid))
        })
        .collect()
}

/// Empirical quantile (linear interpolation between order statistics).
fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * level;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Simulates the random-scaling pivot and returns its empirical quantiles.
pub fn critical_values(
    levels: &[f64],
    paths: usize,
    grid: usize,
    rng: &mut NoiseSource,
) -> Result<CriticalValueTable> {
    if paths < 10_000 {
        return Err(Error::domain(format!("need at least 10000 paths, got {paths}")));
    }
    if grid < 1_000 {
        return Err(Error::domain(format!("need a grid of at least 1000 points, got {grid}")));
    }
    if levels.is_empty() {
        return Err(Error::domain("no quantile levels requested"));
    }
    let mut sample = pivot_sample(paths, grid, rng);
    sample.sort_by(f64::total_cmp);
    let entries = levels
        .iter()
        .map(|&level| {
            if !(level > 0.0 && level < 1.0) {
                return Err(Error::domain(format!("quantile level must lie in (0,1), got {level}")));
            }
            Ok((level, quantile_sorted(&sample, level)))
        })
        .collect::<Result<Vec<_>>>()?;
    CriticalValueTable::new(entries)
}
