//! State aggregation: abstract MDP construction under a weighting, the
//! model-similarity parameter of an aggregation, and the Q-gap and
//! sub-optimality bounds for model-similarity abstractions.

use crate::error::{Error, Result};
use crate::mdp::{Model, Policy, TabularMdp, STOCHASTIC_TOL};

/// A surjective map from ground states onto abstract states plus a convex
/// weighting over each aggregation class.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregation {
    phi: Vec<usize>,
    num_abstract: usize,
    omega: Vec<f64>,
    classes: Vec<Vec<usize>>,
}

impl Aggregation {
    /// Aggregation with uniform weights inside each class.
    pub fn new(phi: Vec<usize>, num_abstract: usize) -> Result<Self> {
        let classes = classes_of(&phi, num_abstract)?;
        let mut omega = vec![0.0; phi.len()];
        for class in &classes {
            let w = 1.0 / class.len() as f64;
            for &g in class {
                omega[g] = w;
            }
        }
        Ok(Self {
            phi,
            num_abstract,
            omega,
            classes,
        })
    }

    pub fn with_weights(phi: Vec<usize>, num_abstract: usize, omega: Vec<f64>) -> Result<Self> {
        let classes = classes_of(&phi, num_abstract)?;
        if omega.len() != phi.len() {
            return Err(Error::SizeMismatch(format!(
                "{} weights for {} ground states",
                omega.len(),
                phi.len()
            )));
        }
        for (k, class) in classes.iter().enumerate() {
            if class.iter().any(|&g| !(0.0..=1.0).contains(&omega[g])) {
                return Err(Error::InvalidAggregation(format!("weights of class {k} leave [0, 1]")));
            }
            let sum: f64 = class.iter().map(|&g| omega[g]).sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidAggregation(format!("weights of class {k} sum to {sum}")));
            }
        }
        Ok(Self {
            phi,
            num_abstract,
            omega,
            classes,
        })
    }

    pub fn identity(num_states: usize) -> Self {
        Self::new((0..num_states).collect(), num_states).expect("identity map is surjective")
    }

    pub fn num_ground(&self) -> usize {
        self.phi.len()
    }

    pub fn num_abstract(&self) -> usize {
        self.num_abstract
    }

    pub fn phi(&self, state: usize) -> usize {
        self.phi[state]
    }

    pub fn map(&self) -> &[usize] {
        &self.phi
    }

    pub fn weight(&self, state: usize) -> f64 {
        self.omega[state]
    }

    /// Ground states aggregated into `abstract_state`, in increasing order.
    pub fn class(&self, abstract_state: usize) -> &[usize] {
        &self.classes[abstract_state]
    }

    /// `|G(s)|` for a ground state `s`.
    pub fn class_size(&self, state: usize) -> usize {
        self.classes[self.phi[state]].len()
    }

    fn check_ground(&self, num_states: usize) -> Result<()> {
        if num_states != self.phi.len() {
            return Err(Error::SizeMismatch(format!(
                "aggregation covers {} states, model has {num_states}",
                self.phi.len()
            )));
        }
        Ok(())
    }
}

fn classes_of(phi: &[usize], num_abstract: usize) -> Result<Vec<Vec<usize>>> {
    if phi.is_empty() || num_abstract == 0 {
        return Err(Error::InvalidAggregation("empty aggregation".into()));
    }
    let mut classes = vec![Vec::new(); num_abstract];
    for (g, &k) in phi.iter().enumerate() {
        if k >= num_abstract {
            return Err(Error::IndexOutOfRange {
                what: "abstract state",
                index: k,
                size: num_abstract,
            });
        }
        classes[k].push(g);
    }
    if let Some(k) = classes.iter().position(Vec::is_empty) {
        return Err(Error::InvalidAggregation(format!(
            "abstract state {k} has no ground state"
        )));
    }
    Ok(classes)
}

/// Abstract MDP with `R_A(k,a) = sum_g w(g) R(g,a)` and
/// `T_A(k,a,k') = sum_g sum_{g' in G(k')} w(g) T(g,a,g')`.
///
/// The abstract initial distribution is the pushforward of the ground one
/// through `phi` and does not depend on the weights.
pub fn build_abstract_mdp(mdp: &TabularMdp, agg: &Aggregation) -> Result<TabularMdp> {
    agg.check_ground(mdp.num_states())?;
    let k_count = agg.num_abstract();
    let na = mdp.num_actions();
    let mut rows = Vec::with_capacity(k_count * na);
    let mut rewards = Vec::with_capacity(k_count * na);
    for k in 0..k_count {
        for a in 0..na {
            let mut mass = vec![0.0; k_count];
            let mut reward = 0.0;
            for &g in agg.class(k) {
                let w = agg.weight(g);
                reward += w * mdp.reward(g, a);
                for &(next, p) in mdp.successors(g, a) {
                    mass[agg.phi(next)] += w * p;
                }
            }
            rows.push(mass.into_iter().enumerate().filter(|&(_, p)| p > 0.0).collect());
            rewards.push(reward.clamp(0.0, 1.0));
        }
    }
    let mut initial = vec![0.0; k_count];
    for (g, &p) in mdp.initial_distribution().iter().enumerate() {
        initial[agg.phi(g)] += p;
    }
    TabularMdp::new(k_count, na, rows, rewards, mdp.discount(), initial)
}

/// Smallest `eta` for which `agg` is a model-similarity abstraction of `mdp`:
/// the largest reward gap or aggregated-transition gap over co-aggregated
/// pairs of ground states. Zero means the abstraction is exact.
pub fn model_similarity_eta(mdp: &TabularMdp, agg: &Aggregation) -> Result<f64> {
    agg.check_ground(mdp.num_states())?;
    let na = mdp.num_actions();
    let k_count = agg.num_abstract();
    // Aggregated successor mass per (ground state, action, abstract successor).
    let mut masses = vec![0.0; mdp.num_states() * na * k_count];
    for s in 0..mdp.num_states() {
        for a in 0..na {
            let base = (s * na + a) * k_count;
            for &(next, p) in mdp.successors(s, a) {
                masses[base + agg.phi(next)] += p;
            }
        }
    }
    let mut eta: f64 = 0.0;
    for k in 0..k_count {
        let class = agg.class(k);
        for (i, &s1) in class.iter().enumerate() {
            for &s2 in &class[i + 1..] {
                for a in 0..na {
                    eta = eta.max((mdp.reward(s1, a) - mdp.reward(s2, a)).abs());
                    let b1 = (s1 * na + a) * k_count;
                    let b2 = (s2 * na + a) * k_count;
                    for kk in 0..k_count {
                        eta = eta.max((masses[b1 + kk] - masses[b2 + kk]).abs());
                    }
                }
            }
        }
    }
    Ok(eta)
}

fn check_bound_domain(eta: f64, num_abstract: usize, gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidDiscount(gamma));
    }
    if !eta.is_finite() || eta < 0.0 {
        return Err(Error::Domain(format!("eta = {eta} must be finite and nonnegative")));
    }
    if num_abstract == 0 {
        return Err(Error::Domain("abstract state space is empty".into()));
    }
    Ok(())
}

/// Upper bound on `|Q_G(s,a) - Q_A(phi(s),a)|` for an eta-similar abstraction:
/// `(eta + gamma (|S_A| - 1) eta) / (1 - gamma)^2`.
pub fn q_gap_bound(eta: f64, num_abstract: usize, gamma: f64) -> Result<f64> {
    check_bound_domain(eta, num_abstract, gamma)?;
    let k = num_abstract as f64;
    Ok((eta + gamma * (k - 1.0) * eta) / (1.0 - gamma).powi(2))
}

/// Upper bound on the ground value lost by acting with the lifted abstract
/// optimal policy; twice [`q_gap_bound`].
pub fn suboptimality_bound(eta: f64, num_abstract: usize, gamma: f64) -> Result<f64> {
    Ok(2.0 * q_gap_bound(eta, num_abstract, gamma)?)
}

/// Ground policy acting as `abstract_policy` does on `phi(s)`.
pub fn lift_policy(abstract_policy: &Policy, agg: &Aggregation) -> Result<Policy> {
    if abstract_policy.num_states() != agg.num_abstract() {
        return Err(Error::SizeMismatch(format!(
            "abstract policy covers {} states, aggregation has {}",
            abstract_policy.num_states(),
            agg.num_abstract()
        )));
    }
    let lifted = match abstract_policy {
        Policy::Deterministic { num_actions, actions } => Policy::Deterministic {
            num_actions: *num_actions,
            actions: agg.map().iter().map(|&k| actions[k]).collect(),
        },
        Policy::Stochastic { probabilities } => Policy::Stochastic {
            probabilities: agg.map().iter().map(|&k| probabilities[k].clone()).collect(),
        },
    };
    Ok(lifted)
}
