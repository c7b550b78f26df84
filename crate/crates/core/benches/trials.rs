//! Compares the parallel Monte Carlo path against the sequential reference
//! path (identical batching and rng streams; only the dispatch differs).
//!
//! Build with `--no-default-features` to bench the feature-gated sequential
//! core itself.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use fbmac::protocol::EnergyBudget;
use fbmac::sim::{ProtocolSim, DEFAULT_DETECTION_CAP};
use fbmac::source::{QuantizerSpec, SourceConfig, SourceFamily};
use std::hint::black_box;

fn make_sim(sensors: usize, bits: u32, rho: f64, db: f64) -> ProtocolSim {
    let e_d1 = 10f64.powf(db / 10.0);
    let source = SourceConfig::new(sensors, rho, SourceFamily::Uniform).unwrap();
    let quant = QuantizerSpec::build(bits, rho).unwrap();
    let budget = EnergyBudget::from_relations(e_d1, 0.25, 1.0, 1.0, 1).unwrap();
    ProtocolSim::new(source, quant, budget, DEFAULT_DETECTION_CAP).unwrap()
}

fn bench_monte_carlo(c: &mut Criterion) {
    let trials = 20_000u64;
    let mut group = c.benchmark_group("monte_carlo");
    group.sample_size(10);
    for &(m, bits, rho, db) in &[(2usize, 5u32, 0.99f64, 12.0f64), (4, 5, 0.99, 12.0)] {
        let sim = make_sim(m, bits, rho, db);
        group.bench_function(format!("parallel/m{m}_b{bits}"), |b| {
            b.iter(|| black_box(sim.monte_carlo(trials, 7).unwrap()))
        });
        group.bench_function(format!("sequential/m{m}_b{bits}"), |b| {
            b.iter(|| black_box(sim.monte_carlo_seq(trials, 7).unwrap()))
        });
    }
    group.finish();
}

fn bench_joint_detect(c: &mut Criterion) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let stats: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..32).map(|_| rng.random::<f64>()).collect())
        .collect();
    c.bench_function("joint_detect/m4_b5_w21", |b| {
        b.iter_batched(
            || stats.clone(),
            |s| fbmac::sim::joint_detect(black_box(&s), 21, DEFAULT_DETECTION_CAP).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, bench_monte_carlo, bench_joint_detect);
criterion_main!(benches);
