//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs under `cargo test` and takes a few minutes. Failures are reported
//! but only change the exit status when `ACCEPTANCE_STRICT=1` is set.

mod common;

use std::time::Instant;

use common::{fd_gradient, fd_hessian, model_for, running_means, slope, smooth_point, vhat_double_sum, FAMILIES};
use ldpsgd::sim::{critical_levels_for, replication_source, ReplicationOutcome};
use ldpsgd::{
    critical_values, gaussian_mechanism, generate_stream, matrix_gaussian_mechanism,
    run_simulation, CriticalValueTable, Method, Mu, NoiseSource, Observation,
    RandomScalingState, SgdState, Sensitivity, SimDesign, SimulationReport,
};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

struct Outcome {
    id: u32,
    title: &'static str,
    pass: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new(id: u32, title: &'static str) -> Self {
        Self { id, title, pass: true, details: Vec::new() }
    }

    /// Records one sub-check.
    fn check(&mut self, ok: bool, detail: String) {
        self.pass &= ok;
        self.details.push(format!("{} {detail}", if ok { "ok  " } else { "MISS" }));
    }

    fn print(&self) {
        let id = if self.id == 0 { "extra".to_string() } else { self.id.to_string() };
        println!("{} [{id}] {}", if self.pass { "PASS" } else { "FAIL" }, self.title);
        for d in &self.details {
            println!("       {d}");
        }
    }
}

const COLUMNS: [usize; 5] = [40_000, 80_000, 120_000, 160_000, 200_000];

fn within_rel(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target
}

fn table1_grid(table: &CriticalValueTable) -> Vec<(Mu, Vec<ReplicationOutcome>, SimulationReport)> {
    [Mu::Infinite, Mu::Finite(2.0), Mu::Finite(1.0)]
        .into_iter()
        .map(|mu| {
            let mut d = SimDesign::linear(3, 200_000, mu);
            d.checkpoints = COLUMNS.to_vec();
            let (outcomes, report) = run_simulation(&d, table).expect("table 1 design runs");
            (mu, outcomes, report)
        })
        .collect()
}

fn criterion_1(grid: &[(Mu, Vec<ReplicationOutcome>, SimulationReport)]) -> Outcome {
    let mut o = Outcome::new(1, "Table 1 reproduction at n = 200000");
    let n = 200_000;
    let cell = |i: usize, m: Method| grid[i].2.cell(n, 0.95, m).unwrap();
    let (pi, prs1, ppi1, ppi2) = (
        cell(0, Method::Plugin),
        cell(2, Method::RandomScaling),
        cell(2, Method::Plugin),
        cell(1, Method::Plugin),
    );
    let pct = |c: f64| 100.0 * c;
    o.check((92.5..=98.5).contains(&pct(prs1.cp)), format!("mu=1 PRS CP {:.2} in [92.5, 98.5]", pct(prs1.cp)));
    o.check((89.0..=97.0).contains(&pct(ppi1.cp)), format!("mu=1 PPI CP {:.2} in [89, 97]", pct(ppi1.cp)));
    o.check(within_rel(prs1.al, 0.0650, 0.25), format!("mu=1 PRS AL {:.4} within 25% of 0.0650", prs1.al));
    o.check(within_rel(ppi1.al, 0.0460, 0.25), format!("mu=1 PPI AL {:.4} within 25% of 0.0460", ppi1.al));
    o.check(within_rel(ppi2.al, 0.0216, 0.25), format!("mu=2 PPI AL {:.4} within 25% of 0.0216", ppi2.al));
    o.check((91.0..=97.0).contains(&pct(pi.cp)), format!("non-private PI CP {:.2} in [91, 97]", pct(pi.cp)));
    o.check(within_rel(pi.al, 0.0048, 0.25), format!("non-private PI AL {:.5} within 25% of 0.0048", pi.al));
    o
}

fn criterion_2(grid: &[(Mu, Vec<ReplicationOutcome>, SimulationReport)]) -> Outcome {
    let mut o = Outcome::new(2, "privacy-cost ordering and AL decreasing in n");
    for method in Method::ALL {
        for &n in &COLUMNS {
            let al: Vec<f64> = grid.iter().map(|g| g.2.cell(n, 0.95, method).unwrap().al).collect();
            o.check(
                al[0] < al[1] && al[1] < al[2],
                format!("{method:?} n={n}: non-private {:.5} < mu=2 {:.5} < mu=1 {:.5}", al[0], al[1], al[2]),
            );
        }
        for (mu, _, report) in grid {
            let al: Vec<f64> = COLUMNS.iter().map(|&n| report.cell(n, 0.95, method).unwrap().al).collect();
            let decreasing = al.windows(2).all(|w| w[1] < w[0]);
            o.check(decreasing, format!("{method:?} {mu:?}: AL by n {al:.5?}"));
        }
    }
    o
}

/// Per-replication comparison stated alongside Table 1 (not a numbered criterion).
fn prs_wider_share(grid: &[(Mu, Vec<ReplicationOutcome>, SimulationReport)]) -> Outcome {
    let mut o = Outcome::new(0, "PRS wider than PPI in >= 80% of replications (mu=1, n=200000)");
    let (mut wider, mut total) = (0, 0);
    for rep in &grid[2].1 {
        let li = rep.checkpoints.last().unwrap().at_level(0.95).unwrap();
        for j in 1..li.plugin.len() {
            total += 1;
            wider += (li.random_scaling[j].length() > li.plugin[j].length()) as usize;
        }
    }
    let share = wider as f64 / total as f64;
    o.check(share >= 0.8, format!("share {share:.3} ({wider}/{total})"));
    o
}

fn criterion_3() -> (Outcome, CriticalValueTable) {
    let mut o = Outcome::new(3, "random-scaling critical values (1e6 paths, grid 1e3)");
    let mut levels = critical_levels_for(&[0.90, 0.95, 0.99]);
    levels.push(0.5);
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let start = Instant::now();
    let table = critical_values(&levels, 1_000_000, 1_000, &mut NoiseSource::new(2024, 0)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let q975 = table.value_at(0.975).unwrap();
    let q50 = table.value_at(0.5).unwrap();
    o.check((q975 - 6.747).abs() <= 0.1, format!("q(0.975) = {q975:.4}, target 6.747 +- 0.1"));
    o.check(q50.abs() <= 0.02, format!("q(0.5) = {q50:.4}, target 0 +- 0.02"));
    o.check(secs <= 300.0, format!("runtime {secs:.1}s on {} threads", rayon::current_num_threads()));
    (o, table)
}

fn criterion_4() -> Outcome {
    let mut o = Outcome::new(4, "random-scaling recursion equals the double-sum definition");
    let mut rng = NoiseSource::new(44, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = 1 + (rng.next_index(5));
        let n = 1 + rng.next_index(500);
        let iterates: Vec<DVector<f64>> = (0..n)
            .map(|_| DVector::from_fn(p, |_, _| 3.0 * rng.standard_normal()))
            .collect();
        let means = running_means(&iterates);
        let mut rs = RandomScalingState::new(p);
        for (i, m) in means.iter().enumerate() {
            rs.update(m, i as u64 + 1).unwrap();
        }
        let err = (rs.vhat(&means[n - 1]).unwrap() - vhat_double_sum(&means)).amax();
        worst = worst.max(err);
    }
    o.check(worst <= 1e-10, format!("max abs error over 100 sequences {worst:.2e}"));
    o
}

trait Index {
    fn next_index(&mut self, bound: usize) -> usize;
}

impl Index for NoiseSource {
    fn next_index(&mut self, bound: usize) -> usize {
        (rand::RngCore::next_u64(self) % bound as u64) as usize
    }
}

fn criterion_5() -> Outcome {
    let mut o = Outcome::new(5, "mechanism calibration (1e5 draws)");
    let draws = 100_000;
    let sens = Sensitivity::new(2.0 * 1.345 * std::f64::consts::SQRT_2).unwrap();
    let mu = Mu::new(0.7).unwrap();
    let target = (sens.value() / 0.7).powi(2);
    let input = DVector::from_vec(vec![0.5, -1.0, 2.0]);
    let mut rng = NoiseSource::new(55, 0);
    let mut sums = [0.0f64; 3];
    let mut sq = [0.0f64; 3];
    for _ in 0..draws {
        let out = gaussian_mechanism(&input, sens, mu, &mut rng).unwrap();
        for j in 0..3 {
            let e = out[j] - input[j];
            sums[j] += e;
            sq[j] += e * e;
        }
    }
    for j in 0..3 {
        let mean = sums[j] / draws as f64;
        let var = (sq[j] - draws as f64 * mean * mean) / (draws - 1) as f64;
        o.check(within_rel(var, target, 0.03), format!("vector coord {j}: var {var:.4} vs {target:.4}"));
    }

    let scale = 0.3;
    let dim = 4;
    let base = DMatrix::from_fn(dim, dim, |i, j| 1.0 / (1.0 + i as f64 + j as f64));
    let mut msum = DMatrix::<f64>::zeros(dim, dim);
    let mut msq = DMatrix::<f64>::zeros(dim, dim);
    for _ in 0..draws {
        let e = matrix_gaussian_mechanism(&base, scale, &mut rng).unwrap() - &base;
        msum += &e;
        msq += e.component_mul(&e);
    }
    let mut worst: f64 = 0.0;
    for i in 0..dim {
        for j in i..dim {
            let mean = msum[(i, j)] / draws as f64;
            let var = (msq[(i, j)] - draws as f64 * mean * mean) / (draws - 1) as f64;
            worst = worst.max((var / (scale * scale) - 1.0).abs());
        }
    }
    o.check(worst <= 0.03, format!("matrix entries: worst relative variance error {worst:.4}"));
    o
}

fn criterion_6() -> Outcome {
    let mut o = Outcome::new(6, "gradient and Hessian finite-difference agreement");
    let mut rng = NoiseSource::new(66, 0);
    for family in FAMILIES {
        let model = model_for(family);
        let (mut grad_err, mut hess_err): (f64, f64) = (0.0, 0.0);
        for _ in 0..20 {
            let (theta, obs) = smooth_point(&model, &mut rng, 1e-2);
            let g = model.gradient(&theta, &obs).unwrap();
            let fd = fd_gradient(&model, &theta, &obs, 1e-6);
            let scale = g.amax().max(1.0);
            for j in 0..theta.len() {
                grad_err = grad_err.max((g[j] - fd[j]).abs() / scale);
            }
            let outer = model.hessian_factor(&theta, &obs).unwrap().outer();
            hess_err = hess_err.max((outer - fd_hessian(&model, &theta, &obs, 1e-4)).amax());
        }
        o.check(grad_err <= 1e-6, format!("{family:?}: gradient relative error {grad_err:.2e}"));
        o.check(hess_err <= 1e-4, format!("{family:?}: Hessian abs error {hess_err:.2e}"));
    }
    o
}

fn criterion_7() -> Outcome {
    let mut o = Outcome::new(7, "gradient norm bounded by B0 under adversarial draws");
    let mut rng = NoiseSource::new(77, 0);
    for family in FAMILIES {
        let model = model_for(family);
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let dim = 1 + rng.next_index(8);
            let scale = 10f64.powi(rng.next_index(13) as i32 - 4);
            let x: Vec<f64> = (0..dim).map(|_| scale * rng.standard_normal() / rng.standard_normal()).collect();
            let theta: Vec<f64> = (0..dim).map(|_| 1e3 * rng.standard_normal()).collect();
            let y = match family {
                ldpsgd::Family::Logistic => rng.next_index(2) as f64,
                _ => 1e8 * rng.standard_normal() / rng.standard_normal(),
            };
            let obs = Observation::from_slice(&x, y).unwrap();
            worst = worst.max(model.gradient(&theta, &obs).unwrap().norm() / model.b0());
        }
        o.check(worst <= 1.0 + 1e-12, format!("{family:?}: max ‖Ψ‖/B0 = {worst:.6}"));
    }
    o
}

fn criterion_8() -> Outcome {
    let mut o = Outcome::new(8, "last-iterate error rate slope");
    let design = SimDesign::linear(3, 100_000, Mu::Infinite);
    let grid: Vec<usize> = (0..=10).map(|k| (1e3 * 10f64.powf(k as f64 / 5.0)).round() as usize).collect();
    let reps = 200;
    let truth = DVector::from_element(4, 1.0);
    let per_rep: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let stream = generate_stream(&design, replication_source(88, r, 0)).unwrap();
            let mut sgd = SgdState::new(design.model, design.schedule, design.budget(), DVector::zeros(4), replication_source(88, r, 1)).unwrap();
            let mut out = Vec::with_capacity(grid.len());
            for (i, obs) in stream.enumerate() {
                sgd.step(&obs).unwrap();
                if grid.contains(&(i + 1)) {
                    out.push((sgd.theta() - &truth).norm_squared());
                }
            }
            out
        })
        .collect();
    let log_n: Vec<f64> = grid.iter().map(|&n| (n as f64).ln()).collect();
    let log_err: Vec<f64> = (0..grid.len())
        .map(|k| (per_rep.iter().map(|v| v[k]).sum::<f64>() / reps as f64).ln())
        .collect();
    let s = slope(&log_n, &log_err);
    o.check((s + 0.51).abs() <= 0.15, format!("slope {s:.3}, target -0.51 +- 0.15"));
    o
}

fn criterion_9(table: &CriticalValueTable) -> Outcome {
    let mut o = Outcome::new(9, "plug-in covariance matches replication variance (mu=1, n=1e5)");
    let mut d = SimDesign::linear(3, 100_000, Mu::Finite(1.0));
    d.seed = 99;
    let (outcomes, _) = run_simulation(&d, table).unwrap();
    let n = d.n as f64;
    for j in 0..d.dim() {
        let scaled: Vec<f64> = outcomes
            .iter()
            .map(|r| n.sqrt() * (r.checkpoints[0].theta_bar[j] - d.theta0[j]))
            .collect();
        let (_, var) = common::mean_var(&scaled);
        let sigma = outcomes.iter().map(|r| r.checkpoints[0].sigma_diag[j]).sum::<f64>() / outcomes.len() as f64;
        o.check(within_rel(sigma, var, 0.15), format!("coef {j}: mean Σ̂jj {sigma:.2} vs MC variance {var:.2}"));
    }
    o
}

fn criterion_10(table: &CriticalValueTable) -> Outcome {
    let mut o = Outcome::new(10, "nominal-level sweep at p = 5, n = 200000");
    let levels = [0.99, 0.95, 0.90];
    for mu in [2.0, 1.0] {
        let mut d = SimDesign::linear(5, 200_000, Mu::Finite(mu));
        d.seed = 1010;
        d.sweep_levels = levels.to_vec();
        let (_, report) = run_simulation(&d, table).unwrap();
        for level in levels {
            let ppi = report.cell(d.n, level, Method::Plugin).unwrap().cp;
            let prs = report.cell(d.n, level, Method::RandomScaling).unwrap().cp;
            if mu == 2.0 {
                o.check((ppi - level).abs() <= 0.03, format!("mu=2 level {level}: PPI CP {ppi:.4}"));
                o.check((prs - level).abs() <= 0.03, format!("mu=2 level {level}: PRS CP {prs:.4}"));
            } else {
                o.check(prs >= level, format!("mu=1 level {level}: PRS CP {prs:.4} >= nominal (PPI {ppi:.4})"));
            }
        }
    }
    o
}

fn main() {
    let start = Instant::now();
    let (c3, table) = criterion_3();
    let grid = table1_grid(&table);
    let outcomes = vec![
        criterion_1(&grid),
        criterion_2(&grid),
        c3,
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(&table),
        criterion_10(&table),
    ];
    println!();
    for o in &outcomes {
        o.print();
    }
    prs_wider_share(&grid).print();
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    println!(
        "acceptance: {}/{} criteria passed in {:.0}s{}",
        outcomes.len() - failed.len(),
        outcomes.len(),
        start.elapsed().as_secs_f64(),
        if failed.is_empty() { String::new() } else { format!("; failed {failed:?}") }
    );
    if !failed.is_empty() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
