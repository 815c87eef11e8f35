//! Fixtures shared by the benchmarks.

use explore_core::{make_nine_rooms, AgentConfig, BonusSource, DensityKind, EnvBundle, TabularMdp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Default nine-room domain.
pub fn nine_rooms() -> EnvBundle {
    make_nine_rooms(5, 0.95).expect("valid geometry")
}

/// Dense random MDP with `num_states` states and `num_actions` actions.
pub fn random_mdp(num_states: usize, num_actions: usize, seed: u64) -> TabularMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..num_states * num_actions)
        .map(|_| {
            let w: Vec<f64> = (0..num_states).map(|_| rng.gen_range(0.01..1.0)).collect();
            let total: f64 = w.iter().sum();
            w.iter().enumerate().map(|(j, x)| (j, x / total)).collect()
        })
        .collect();
    let rewards = (0..num_states * num_actions).map(|_| rng.gen()).collect();
    TabularMdp::new(
        num_states,
        num_actions,
        rows,
        rewards,
        0.95,
        vec![1.0 / num_states as f64; num_states],
    )
    .expect("valid random MDP")
}

/// Pseudo-count agent on `env` with the room density.
pub fn pseudo_count_agent(env: &EnvBundle, horizon: usize) -> AgentConfig {
    AgentConfig::new(1e-4, BonusSource::PseudoCountHat, horizon)
        .with_epsilon(0.1)
        .with_aggregation(env.aggregation.clone())
        .with_density(DensityKind::UniformAggregation)
}
