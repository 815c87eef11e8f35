//! Random instances for the bounds suite.

use explore_core::{step, Aggregation, Result, TabularMdp};
use rand::seq::SliceRandom;
use rand::Rng;

/// Random distribution over `n` outcomes; each outcome is dropped with
/// probability `sparsity` unless that would empty the support.
pub fn random_distribution<R: Rng + ?Sized>(n: usize, sparsity: f64, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            if rng.gen::<f64>() < sparsity {
                0.0
            } else {
                rng.gen::<f64>()
            }
        })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[rng.gen_range(0..n)] = 1.0;
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

fn sparse(dist: &[f64]) -> Vec<(usize, f64)> {
    dist.iter().copied().enumerate().filter(|&(_, p)| p > 0.0).collect()
}

pub fn random_mdp<R: Rng + ?Sized>(
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    rng: &mut R,
) -> Result<TabularMdp> {
    let pairs = num_states * num_actions;
    let rows = (0..pairs)
        .map(|_| sparse(&random_distribution(num_states, 0.3, rng)))
        .collect();
    let rewards = (0..pairs).map(|_| rng.gen::<f64>()).collect();
    TabularMdp::new(
        num_states,
        num_actions,
        rows,
        rewards,
        gamma,
        vec![1.0 / num_states as f64; num_states],
    )
}

/// State-action pairs visited by a uniformly random policy.
pub fn random_trajectory<R: Rng + ?Sized>(mdp: &TabularMdp, len: usize, rng: &mut R) -> Result<Vec<(usize, usize)>> {
    let mut state = explore_core::sample_initial(mdp, rng);
    let mut pairs = Vec::with_capacity(len);
    for _ in 0..len {
        let action = rng.gen_range(0..explore_core::Model::num_actions(mdp));
        pairs.push((state, action));
        state = step(mdp, state, action, rng)?.0;
    }
    Ok(pairs)
}

/// Pairs drawn uniformly at random.
pub fn random_history<R: Rng + ?Sized>(
    num_states: usize,
    num_actions: usize,
    len: usize,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    (0..len)
        .map(|_| (rng.gen_range(0..num_states), rng.gen_range(0..num_actions)))
        .collect()
}

/// Surjective random map of `num_states` states onto `num_abstract` classes.
pub fn random_aggregation<R: Rng + ?Sized>(num_states: usize, num_abstract: usize, rng: &mut R) -> Result<Aggregation> {
    let mut phi: Vec<usize> = (0..num_states)
        .map(|s| {
            if s < num_abstract {
                s
            } else {
                rng.gen_range(0..num_abstract)
            }
        })
        .collect();
    phi.shuffle(rng);
    Aggregation::new(phi, num_abstract)
}

/// Random MDP whose canonical aggregation is a model-similarity abstraction
/// with parameter at most `eta`: co-aggregated rewards differ by at most
/// `eta` and aggregated transition masses by at most `eta / 2`.
pub fn similar_mdp<R: Rng + ?Sized>(
    class_sizes: &[usize],
    num_actions: usize,
    eta: f64,
    gamma: f64,
    rng: &mut R,
) -> Result<(TabularMdp, Aggregation)> {
    let k = class_sizes.len();
    let phi: Vec<usize> = class_sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
        .collect();
    let agg = Aggregation::new(phi.clone(), k)?;
    let ns = phi.len();
    let base_reward: Vec<f64> = (0..k * num_actions)
        .map(|_| rng.gen_range(eta / 2.0..=1.0 - eta / 2.0))
        .collect();
    let base_mass: Vec<Vec<f64>> = (0..k * num_actions).map(|_| random_distribution(k, 0.3, rng)).collect();
    let lambda = eta / 2.0;
    let mut rows = Vec::with_capacity(ns * num_actions);
    let mut rewards = Vec::with_capacity(ns * num_actions);
    for &c in &phi {
        for a in 0..num_actions {
            let i = c * num_actions + a;
            rewards.push(base_reward[i] + rng.gen_range(-1.0..=1.0) * eta / 2.0);
            let noise = random_distribution(k, 0.3, rng);
            let mut row = Vec::new();
            for (target, (&b, &d)) in base_mass[i].iter().zip(&noise).enumerate() {
                let mass = (1.0 - lambda) * b + lambda * d;
                if mass == 0.0 {
                    continue;
                }
                let members = agg.class(target);
                let split = random_distribution(members.len(), 0.0, rng);
                row.extend(members.iter().zip(split).map(|(&g, w)| (g, mass * w)));
            }
            rows.push(row);
        }
    }
    let mdp = TabularMdp::new(ns, num_actions, rows, rewards, gamma, vec![1.0 / ns as f64; ns])?;
    Ok((mdp, agg))
}
