use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use explore_bench::{nine_rooms, pseudo_count_agent, random_mdp};
use explore_core::{
    pseudo_count, run_mbie_eb, solve_value_iteration, AgentConfig, BonusSource, CountForm, DensityModel, DensityProbe,
    Model, UniformAggregationDensity,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn value_iteration(c: &mut Criterion) {
    let env = nine_rooms();
    let bonus = vec![0.0; env.mdp.num_states() * env.mdp.num_actions()];
    c.bench_function("value_iteration/nine_rooms", |b| {
        b.iter(|| solve_value_iteration(black_box(&env.mdp), &bonus, 1e-8, 100_000).unwrap())
    });
    let dense = random_mdp(50, 4, 1);
    let bonus = vec![0.0; 200];
    c.bench_function("value_iteration/dense_50x4", |b| {
        b.iter(|| solve_value_iteration(black_box(&dense), &bonus, 1e-8, 100_000).unwrap())
    });
}

fn pseudo_counts(c: &mut Criterion) {
    let env = nine_rooms();
    let mut model = UniformAggregationDensity::new(env.aggregation.clone(), 4);
    for s in 0..env.mdp.num_states() {
        model.update(s, s % 4);
    }
    c.bench_function("pseudo_count/room_density_probe", |b| {
        b.iter(|| pseudo_count(&model.probe(black_box(37), 2).unwrap()).unwrap())
    });
    let probe = DensityProbe::from_counts(CountForm {
        hits: 40,
        class_size: 25,
        total: 900,
    });
    let real = DensityProbe::new(probe.rho, probe.rho_prime, probe.rho_second);
    c.bench_function("pseudo_count/real_route", |b| {
        b.iter(|| pseudo_count(black_box(&real)).unwrap())
    });
}

fn agents(c: &mut Criterion) {
    let env = nine_rooms();
    let mut group = c.benchmark_group("mbie_eb_1000_steps");
    group.sample_size(10);
    let count = AgentConfig::new(1e-4, BonusSource::EmpiricalCount, 1_000).with_epsilon(0.1);
    group.bench_function("empirical_count", |b| {
        b.iter(|| run_mbie_eb(&env.mdp, &count, &mut ChaCha8Rng::seed_from_u64(0)).unwrap())
    });
    let pseudo = pseudo_count_agent(&env, 1_000);
    group.bench_function("pseudo_count_hat", |b| {
        b.iter(|| run_mbie_eb(&env.mdp, &pseudo, &mut ChaCha8Rng::seed_from_u64(0)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, value_iteration, pseudo_counts, agents);
criterion_main!(benches);
