//! Tabular MDPs, bonus-augmented value iteration, policy evaluation and
//! environment stepping.
//!
//! Transition rows are stored sparsely as sorted `(next_state, probability)`
//! lists so that empirical models with a handful of observed successors stay
//! cheap to plan on.

use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance used when checking that probability vectors sum to one.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// Default sup-norm Bellman residual tolerance for the solvers.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Default iteration budget for value iteration.
pub const DEFAULT_MAX_ITERS: usize = 100_000;

/// Read access to a finite MDP, as needed by the planners.
///
/// Implemented by [`TabularMdp`] and by the agents' empirical models.
pub trait Model {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn discount(&self) -> f64;
    fn reward(&self, state: usize, action: usize) -> f64;
    /// Successor distribution of `(state, action)` as `(next_state, probability)`.
    fn successors(&self, state: usize, action: usize) -> &[(usize, f64)];
}

/// A finite MDP with rewards in `[0, 1]` and discount in `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    rows: Vec<Vec<(usize, f64)>>,
    rewards: Vec<f64>,
    discount: f64,
    initial: Vec<f64>,
}

impl TabularMdp {
    /// Builds an MDP from sparse rows indexed by `state * num_actions + action`.
    ///
    /// Rows are sorted by successor, duplicate successors merged and zero
    /// entries dropped.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        rows: Vec<Vec<(usize, f64)>>,
        rewards: Vec<f64>,
        discount: f64,
        initial: Vec<f64>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidModel("state and action sets must be nonempty".into()));
        }
        let pairs = num_states * num_actions;
        if rows.len() != pairs || rewards.len() != pairs {
            return Err(Error::SizeMismatch(format!(
                "expected {pairs} rows and rewards, got {} and {}",
                rows.len(),
                rewards.len()
            )));
        }
        if initial.len() != num_states {
            return Err(Error::SizeMismatch(format!(
                "initial distribution has {} entries for {num_states} states",
                initial.len()
            )));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidDiscount(discount));
        }

        let mut clean_rows = Vec::with_capacity(pairs);
        for (i, row) in rows.into_iter().enumerate() {
            let (state, action) = (i / num_actions, i % num_actions);
            clean_rows.push(normalize_row(row, num_states, state, action)?);
        }
        for (i, &r) in rewards.iter().enumerate() {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::RewardOutOfRange {
                    state: i / num_actions,
                    action: i % num_actions,
                    reward: r,
                });
            }
        }
        check_distribution(&initial, "initial distribution")?;

        Ok(Self {
            num_states,
            num_actions,
            rows: clean_rows,
            rewards,
            discount,
            initial,
        })
    }

    /// Builds an MDP from a dense `[state][action][next_state]` tensor and a
    /// `[state][action]` reward table.
    pub fn from_dense(
        transitions: &[Vec<Vec<f64>>],
        rewards: &[Vec<f64>],
        discount: f64,
        initial: Vec<f64>,
    ) -> Result<Self> {
        let num_states = transitions.len();
        let num_actions = transitions.first().map_or(0, Vec::len);
        let mut rows = Vec::with_capacity(num_states * num_actions);
        let mut flat_rewards = Vec::with_capacity(num_states * num_actions);
        for (s, per_action) in transitions.iter().enumerate() {
            if per_action.len() != num_actions || rewards.get(s).map(Vec::len) != Some(num_actions) {
                return Err(Error::SizeMismatch(format!(
                    "state {s} does not have {num_actions} actions"
                )));
            }
            for (a, dense) in per_action.iter().enumerate() {
                if dense.len() != num_states {
                    return Err(Error::SizeMismatch(format!(
                        "row ({s}, {a}) has {} entries for {num_states} states",
                        dense.len()
                    )));
                }
                rows.push(
                    dense
                        .iter()
                        .enumerate()
                        .filter(|(_, &p)| p != 0.0)
                        .map(|(j, &p)| (j, p))
                        .collect(),
                );
                flat_rewards.push(rewards[s][a]);
            }
        }
        Self::new(num_states, num_actions, rows, flat_rewards, discount, initial)
    }

    #[inline]
    pub fn pair(&self, state: usize, action: usize) -> usize {
        state * self.num_actions + action
    }

    pub fn initial_distribution(&self) -> &[f64] {
        &self.initial
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// Maximum attainable discounted return, `1 / (1 - gamma)`.
    pub fn q_max(&self) -> f64 {
        1.0 / (1.0 - self.discount)
    }

    /// Dense transition probability `T(state, action, next)`.
    pub fn probability(&self, state: usize, action: usize, next: usize) -> f64 {
        self.rows[self.pair(state, action)]
            .iter()
            .find(|(j, _)| *j == next)
            .map_or(0.0, |&(_, p)| p)
    }

    /// Copy of this MDP with a different discount factor.
    pub fn with_discount(&self, discount: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidDiscount(discount));
        }
        Ok(Self {
            discount,
            ..self.clone()
        })
    }

    fn check_indices(&self, state: usize, action: usize) -> Result<()> {
        if state >= self.num_states {
            return Err(Error::IndexOutOfRange {
                what: "state",
                index: state,
                size: self.num_states,
            });
        }
        if action >= self.num_actions {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: action,
                size: self.num_actions,
            });
        }
        Ok(())
    }
}

impl Model for TabularMdp {
    fn num_states(&self) -> usize {
        self.num_states
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn discount(&self) -> f64 {
        self.discount
    }

    fn reward(&self, state: usize, action: usize) -> f64 {
        self.rewards[self.pair(state, action)]
    }

    fn successors(&self, state: usize, action: usize) -> &[(usize, f64)] {
        &self.rows[self.pair(state, action)]
    }
}

fn normalize_row(
    mut row: Vec<(usize, f64)>,
    num_states: usize,
    state: usize,
    action: usize,
) -> Result<Vec<(usize, f64)>> {
    for &(j, p) in &row {
        if j >= num_states {
            return Err(Error::IndexOutOfRange {
                what: "successor",
                index: j,
                size: num_states,
            });
        }
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidModel(format!(
                "transition probability {p} at ({state}, {action}) -> {j}"
            )));
        }
    }
    row.sort_by_key(|&(j, _)| j);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for (j, p) in row {
        match merged.last_mut() {
            Some(last) if last.0 == j => last.1 += p,
            _ => merged.push((j, p)),
        }
    }
    merged.retain(|&(_, p)| p > 0.0);
    let sum: f64 = merged.iter().map(|&(_, p)| p).sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::RowNotStochastic { state, action, sum });
    }
    Ok(merged)
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::InvalidModel(format!("{what} has a negative entry")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidModel(format!("{what} sums to {sum}")));
    }
    Ok(())
}

/// Action values produced by a solver.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
    /// Sup-norm Bellman residual of `values`.
    pub residual: f64,
    /// Bellman sweeps applied.
    pub iterations: usize,
    /// False when the iteration budget ran out before reaching the tolerance.
    pub converged: bool,
}

impl QTable {
    pub fn from_values(num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_states * num_actions {
            return Err(Error::SizeMismatch(format!(
                "{} values for {num_states}x{num_actions} table",
                values.len()
            )));
        }
        Ok(Self {
            num_states,
            num_actions,
            values,
            residual: f64::NAN,
            iterations: 0,
            converged: false,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.num_actions + action]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        let start = state * self.num_actions;
        &self.values[start..start + self.num_actions]
    }

    /// `V(s) = max_a Q(s, a)`.
    pub fn state_value(&self, state: usize) -> f64 {
        self.row(state).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn state_values(&self) -> Vec<f64> {
        (0..self.num_states).map(|s| self.state_value(s)).collect()
    }
}

/// A deterministic or stochastic stationary policy.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Deterministic { num_actions: usize, actions: Vec<usize> },
    Stochastic { probabilities: Vec<Vec<f64>> },
}

impl Policy {
    pub fn deterministic(actions: Vec<usize>, num_actions: usize) -> Result<Self> {
        if let Some(&bad) = actions.iter().find(|&&a| a >= num_actions) {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: bad,
                size: num_actions,
            });
        }
        Ok(Policy::Deterministic { num_actions, actions })
    }

    pub fn stochastic(probabilities: Vec<Vec<f64>>) -> Result<Self> {
        let width = probabilities.first().map_or(0, Vec::len);
        for (s, row) in probabilities.iter().enumerate() {
            if row.len() != width {
                return Err(Error::SizeMismatch(format!(
                    "policy row {s} has {} actions, expected {width}",
                    row.len()
                )));
            }
            check_distribution(row, "policy row")?;
        }
        Ok(Policy::Stochastic { probabilities })
    }

    pub fn num_states(&self) -> usize {
        match self {
            Policy::Deterministic { actions, .. } => actions.len(),
            Policy::Stochastic { probabilities } => probabilities.len(),
        }
    }

    pub fn num_actions(&self) -> usize {
        match self {
            Policy::Deterministic { num_actions, .. } => *num_actions,
            Policy::Stochastic { probabilities } => probabilities.first().map_or(0, Vec::len),
        }
    }

    /// Action of a deterministic policy; `None` for stochastic ones.
    pub fn action(&self, state: usize) -> Option<usize> {
        match self {
            Policy::Deterministic { actions, .. } => actions.get(state).copied(),
            Policy::Stochastic { .. } => None,
        }
    }

    /// Probability of taking `action` in `state`.
    pub fn probability(&self, state: usize, action: usize) -> f64 {
        match self {
            Policy::Deterministic { actions, .. } => {
                if actions[state] == action {
                    1.0
                } else {
                    0.0
                }
            }
            Policy::Stochastic { probabilities } => probabilities[state][action],
        }
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Greedy policy with ties broken towards the lowest action index.
pub fn greedy_policy(q: &QTable) -> Policy {
    let actions = (0..q.num_states()).map(|s| argmax(q.row(s))).collect();
    Policy::Deterministic {
        num_actions: q.num_actions(),
        actions,
    }
}

/// Value iteration on `Q(s,a) = R(s,a) + bonus(s,a) + gamma * E[max_a' Q(s',a')]`.
#[derive(Debug, Clone, Copy)]
pub struct ValueIteration {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for ValueIteration {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

impl ValueIteration {
    pub fn new(tol: f64, max_iters: usize) -> Self {
        Self { tol, max_iters }
    }

    pub fn solve<M: Model>(&self, model: &M, bonus: &[f64]) -> Result<QTable> {
        self.solve_from(model, bonus, None, None)
    }

    /// Solves starting from `warm` (when given). Pairs with `Some(v)` in
    /// `pinned` are held at `v` instead of being backed up.
    ///
    /// Running out of iterations is not an error: the returned table has
    /// `converged == false` and carries its measured residual.
    pub fn solve_from<M: Model>(
        &self,
        model: &M,
        bonus: &[f64],
        warm: Option<&QTable>,
        pinned: Option<&[Option<f64>]>,
    ) -> Result<QTable> {
        let ns = model.num_states();
        let na = model.num_actions();
        let pairs = ns * na;
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::Domain(format!("tolerance {} must be positive", self.tol)));
        }
        if bonus.len() != pairs {
            return Err(Error::SizeMismatch(format!(
                "bonus has {} entries for {pairs} pairs",
                bonus.len()
            )));
        }
        if let Some((pair, &value)) = bonus.iter().enumerate().find(|(_, b)| !b.is_finite() || **b < 0.0) {
            return Err(Error::InvalidBonus { pair, value });
        }
        if let Some(p) = pinned {
            if p.len() != pairs {
                return Err(Error::SizeMismatch(format!(
                    "pin mask has {} entries for {pairs} pairs",
                    p.len()
                )));
            }
        }
        let mut q = match warm {
            Some(w) if w.num_states == ns && w.num_actions == na => w.values.clone(),
            Some(_) => return Err(Error::SizeMismatch("warm start table does not match the model".into())),
            None => vec![0.0; pairs],
        };
        let gamma = model.discount();
        let mut v = vec![0.0; ns];
        let mut next = vec![0.0; pairs];
        let mut iterations = 0;
        loop {
            for (s, vs) in v.iter_mut().enumerate() {
                *vs = q[s * na..(s + 1) * na]
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
            }
            let mut residual: f64 = 0.0;
            for s in 0..ns {
                for a in 0..na {
                    let i = s * na + a;
                    let target = match pinned.and_then(|p| p[i]) {
                        Some(fixed) => fixed,
                        None => {
                            let expected: f64 = model.successors(s, a).iter().map(|&(j, p)| p * v[j]).sum();
                            model.reward(s, a) + bonus[i] + gamma * expected
                        }
                    };
                    residual = residual.max((target - q[i]).abs());
                    next[i] = target;
                }
            }
            if residual <= self.tol || iterations >= self.max_iters {
                return Ok(QTable {
                    num_states: ns,
                    num_actions: na,
                    values: q,
                    residual,
                    iterations,
                    converged: residual <= self.tol,
                });
            }
            std::mem::swap(&mut q, &mut next);
            iterations += 1;
        }
    }
}

/// Solves the bonus-augmented optimal Bellman equation from a cold start.
pub fn solve_value_iteration<M: Model>(mdp: &M, bonus: &[f64], tol: f64, max_iters: usize) -> Result<QTable> {
    ValueIteration::new(tol, max_iters).solve(mdp, bonus)
}

const EVALUATION_ITER_CAP: usize = 10_000_000;

/// `V^pi` by iterating the policy's Bellman operator until the sup-norm
/// residual drops below `tol`.
pub fn evaluate_policy<M: Model>(mdp: &M, policy: &Policy, tol: f64) -> Result<Vec<f64>> {
    let ns = mdp.num_states();
    let na = mdp.num_actions();
    if policy.num_states() != ns || policy.num_actions() != na {
        return Err(Error::SizeMismatch(format!(
            "policy is {}x{}, model is {ns}x{na}",
            policy.num_states(),
            policy.num_actions()
        )));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    let gamma = mdp.discount();
    let mut v = vec![0.0; ns];
    let mut next = vec![0.0; ns];
    for _ in 0..EVALUATION_ITER_CAP {
        let mut residual: f64 = 0.0;
        for s in 0..ns {
            let mut total = 0.0;
            for a in 0..na {
                let w = policy.probability(s, a);
                if w == 0.0 {
                    continue;
                }
                let expected: f64 = mdp.successors(s, a).iter().map(|&(j, p)| p * v[j]).sum();
                total += w * (mdp.reward(s, a) + gamma * expected);
            }
            residual = residual.max((total - v[s]).abs());
            next[s] = total;
        }
        if residual <= tol {
            return Ok(v);
        }
        std::mem::swap(&mut v, &mut next);
    }
    Ok(v)
}

fn sample_index<R: Rng + ?Sized>(entries: impl Iterator<Item = (usize, f64)>, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (j, p) in entries {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = j;
        if u < acc {
            return j;
        }
    }
    last
}

/// Samples one transition. The reward is `R(state, action)`.
pub fn step<R: Rng + ?Sized>(mdp: &TabularMdp, state: usize, action: usize, rng: &mut R) -> Result<(usize, f64)> {
    mdp.check_indices(state, action)?;
    let next = sample_index(mdp.successors(state, action).iter().copied(), rng);
    Ok((next, mdp.reward(state, action)))
}

/// Draws a start state from the initial distribution.
pub fn sample_initial<R: Rng + ?Sized>(mdp: &TabularMdp, rng: &mut R) -> usize {
    sample_index(mdp.initial.iter().copied().enumerate(), rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_state(reward: f64, gamma: f64) -> TabularMdp {
        TabularMdp::new(1, 1, vec![vec![(0, 1.0)]], vec![reward], gamma, vec![1.0]).unwrap()
    }

    #[test]
    fn geometric_series_fixed_point() {
        let mdp = single_state(1.0, 0.5);
        let q = solve_value_iteration(&mdp, &[0.0], 1e-12, DEFAULT_MAX_ITERS).unwrap();
        assert!((q.get(0, 0) - 2.0).abs() < 1e-10);
        assert!(q.converged && q.residual <= 1e-12);
        let v = evaluate_policy(&mdp, &greedy_policy(&q), 1e-12).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_rows_and_rewards() {
        let bad_row = TabularMdp::new(1, 1, vec![vec![(0, 0.9)]], vec![0.0], 0.5, vec![1.0]);
        assert!(matches!(bad_row, Err(Error::RowNotStochastic { .. })));
        let bad_reward = TabularMdp::new(1, 1, vec![vec![(0, 1.0)]], vec![1.5], 0.5, vec![1.0]);
        assert!(matches!(bad_reward, Err(Error::RewardOutOfRange { .. })));
        let bad_gamma = TabularMdp::new(1, 1, vec![vec![(0, 1.0)]], vec![0.5], 1.0, vec![1.0]);
        assert!(matches!(bad_gamma, Err(Error::InvalidDiscount(_))));
        let negative = TabularMdp::new(
            2,
            1,
            vec![vec![(0, 1.5), (1, -0.5)], vec![(1, 1.0)]],
            vec![0.0, 0.0],
            0.5,
            vec![1.0, 0.0],
        );
        assert!(negative.is_err());
    }

    #[test]
    fn non_finite_bonus_is_rejected() {
        let mdp = single_state(0.5, 0.5);
        let err = solve_value_iteration(&mdp, &[f64::NAN], 1e-8, 10).unwrap_err();
        assert!(matches!(err, Error::InvalidBonus { .. }));
        let err = solve_value_iteration(&mdp, &[-1.0], 1e-8, 10).unwrap_err();
        assert!(matches!(err, Error::InvalidBonus { .. }));
    }

    #[test]
    fn budget_exhaustion_is_reported_not_raised() {
        let mdp = single_state(1.0, 0.99);
        let q = solve_value_iteration(&mdp, &[0.0], 1e-10, 5).unwrap();
        assert!(!q.converged);
        assert_eq!(q.iterations, 5);
        assert!(q.residual > 1e-10);
    }

    #[test]
    fn greedy_ties_break_low() {
        let q = QTable::from_values(2, 2, vec![1.0, 2.0, 2.0, 2.0]).unwrap();
        let pi = greedy_policy(&q);
        assert_eq!(pi.action(0), Some(1));
        assert_eq!(pi.action(1), Some(0));
    }

    #[test]
    fn deterministic_row_always_moves() {
        let mdp = TabularMdp::from_dense(
            &[
                vec![vec![0.0, 1.0, 0.0]],
                vec![vec![0.0, 1.0, 0.0]],
                vec![vec![0.0, 0.0, 1.0]],
            ],
            &[vec![0.0], vec![0.0], vec![0.0]],
            0.9,
            vec![1.0, 0.0, 0.0],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(step(&mdp, 0, 0, &mut rng).unwrap().0, 1);
        }
        assert!(step(&mdp, 3, 0, &mut rng).is_err());
        assert!(step(&mdp, 0, 1, &mut rng).is_err());
    }

    #[test]
    fn same_seed_same_trajectory() {
        let mdp = TabularMdp::from_dense(
            &[
                vec![vec![0.5, 0.5], vec![0.1, 0.9]],
                vec![vec![0.3, 0.7], vec![1.0, 0.0]],
            ],
            &[vec![0.0, 1.0], vec![0.5, 0.2]],
            0.9,
            vec![0.5, 0.5],
        )
        .unwrap();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = sample_initial(&mdp, &mut rng);
            let mut out = vec![s];
            for t in 0..200 {
                s = step(&mdp, s, t % 2, &mut rng).unwrap().0;
                out.push(s);
            }
            out
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }

    #[test]
    fn pinned_pairs_hold_their_value() {
        let mdp = TabularMdp::from_dense(&[vec![vec![1.0], vec![1.0]]], &[vec![0.0, 0.5]], 0.5, vec![1.0]).unwrap();
        let pins = [Some(7.0), None];
        let q = ValueIteration::default()
            .solve_from(&mdp, &[0.0, 0.0], None, Some(&pins))
            .unwrap();
        assert_eq!(q.get(0, 0), 7.0);
        // 0.5 + 0.5 * 7
        assert!((q.get(0, 1) - 4.0).abs() < 1e-8);
    }
}
