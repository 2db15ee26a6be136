use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use ldpsgd::{
    critical_values, NoiseSource, PluginCovarianceState, PrivacyBudget, RandomScalingState,
    SgdState, StepSchedule,
};
use ldpsgd_bench::{huber, observations};
use nalgebra::DVector;

fn sgd_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("sgd_step");
    for p in [3usize, 10, 50] {
        let data = observations(p, 10_000, 1);
        group.throughput(Throughput::Elements(data.len() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(p), &data, |b, data| {
            b.iter(|| {
                let mut sgd = SgdState::new(
                    huber(),
                    StepSchedule::default(),
                    PrivacyBudget::gdp(1.0).unwrap(),
                    DVector::zeros(p + 1),
                    NoiseSource::new(2, 1),
                )
                .unwrap();
                for obs in data {
                    sgd.step(obs).unwrap();
                }
                black_box(sgd.theta_bar()[0])
            })
        });
    }
    group.finish();
}

fn rs_update(c: &mut Criterion) {
    let mut group = c.benchmark_group("rs_update");
    for p in [3usize, 10, 50] {
        let iterates: Vec<DVector<f64>> = observations(p, 1_000, 3).into_iter().map(|o| o.x).collect();
        group.throughput(Throughput::Elements(iterates.len() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(p), &iterates, |b, iterates| {
            b.iter(|| {
                let mut rs = RandomScalingState::new(p + 1);
                for (i, t) in iterates.iter().enumerate() {
                    rs.update(t, i as u64 + 1).unwrap();
                }
                black_box(rs.sum_b2())
            })
        });
    }
    group.finish();
}

fn sandwich(c: &mut Criterion) {
    let mut group = c.benchmark_group("plugin_sandwich");
    let model = huber();
    let budget = PrivacyBudget::gdp(1.0).unwrap();
    for p in [3usize, 10, 50] {
        let mut state = PluginCovarianceState::new(p + 1);
        let theta = vec![0.0; p + 1];
        for obs in observations(p, 500, 4) {
            let grad = model.gradient(&theta, &obs).unwrap();
            let factor = model.hessian_factor(&theta, &obs).unwrap();
            state.update(&grad, &factor).unwrap();
        }
        let mut rng = NoiseSource::new(5, 2);
        group.bench_function(BenchmarkId::from_parameter(p), |b| {
            b.iter(|| black_box(state.sandwich(&model, &budget, &mut rng).unwrap()))
        });
    }
    group.finish();
}

fn critical(c: &mut Criterion) {
    let mut group = c.benchmark_group("critical_values");
    group.sample_size(10);
    group.bench_function("10k_paths_grid_1000", |b| {
        b.iter(|| {
            let mut rng = NoiseSource::new(6, 3);
            black_box(critical_values(&[0.5, 0.975], 10_000, 1_000, &mut rng).unwrap())
        })
    });
    group.finish();
}

criterion_group!(benches, sgd_step, rs_update, sandwich, critical);
criterion_main!(benches);
