#![allow(dead_code, clippy::needless_range_loop)]

use explore_core::TabularMdp;
use rand::Rng;

/// Dense random MDP with rewards in `[0, reward_max]` and every transition
/// probability positive.
pub fn random_mdp<R: Rng>(ns: usize, na: usize, gamma: f64, reward_max: f64, rng: &mut R) -> TabularMdp {
    let transitions: Vec<Vec<Vec<f64>>> = (0..ns)
        .map(|_| {
            (0..na)
                .map(|_| {
                    let w: Vec<f64> = (0..ns).map(|_| rng.gen_range(0.01..1.0)).collect();
                    let total: f64 = w.iter().sum();
                    w.iter().map(|x| x / total).collect()
                })
                .collect()
        })
        .collect();
    let rewards: Vec<Vec<f64>> = (0..ns)
        .map(|_| (0..na).map(|_| rng.gen_range(0.0..=reward_max)).collect())
        .collect();
    TabularMdp::from_dense(&transitions, &rewards, gamma, vec![1.0 / ns as f64; ns]).unwrap()
}

/// Solves `m x = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / m[row][row];
    }
    x
}

/// `(I - gamma P_pi)` and `r_pi` of a deterministic policy.
pub fn policy_system(mdp: &TabularMdp, actions: &[usize]) -> (Vec<Vec<f64>>, Vec<f64>) {
    use explore_core::Model;
    let ns = mdp.num_states();
    let gamma = mdp.discount();
    let m = (0..ns)
        .map(|s| {
            (0..ns)
                .map(|j| f64::from(u8::from(s == j)) - gamma * mdp.probability(s, actions[s], j))
                .collect()
        })
        .collect();
    let r = (0..ns).map(|s| mdp.reward(s, actions[s])).collect();
    (m, r)
}
