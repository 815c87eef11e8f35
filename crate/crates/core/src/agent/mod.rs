//! MBIE-EB: value iteration on the empirical model with an exploration bonus
//! `beta / sqrt(count)`, where the count is empirical, aggregated, or a
//! pseudo-count of a density model.

mod beta;

pub use beta::{corrected_beta, over_exploration_factor, theorem1_beta, under_exploration_confidence};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::abstraction::Aggregation;
use crate::density::{DensityModel, DensityProbe, EmpiricalDensity, UniformAggregationDensity, VisitStats};
use crate::error::{Error, Result};
use crate::mdp::{
    argmax, sample_initial, step, Model, QTable, TabularMdp, ValueIteration, DEFAULT_MAX_ITERS, DEFAULT_TOL,
};
use crate::pseudocount::{corrected_pseudo_count, pseudo_count};

/// Which count divides the exploration constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BonusSource {
    /// `N(s, a)`, planning on the ground empirical model.
    EmpiricalCount,
    /// `N_A(phi(s), a)`, planning on the abstract empirical model.
    AbstractCount,
    /// `N_hat(s, a)` of the density model, planning on the ground model.
    PseudoCountHat,
    /// Corrected pseudo-count `N_tilde(s, a)`, planning on the ground model.
    PseudoCountTilde,
}

impl BonusSource {
    pub fn uses_density(self) -> bool {
        matches!(self, Self::PseudoCountHat | Self::PseudoCountTilde)
    }
}

/// Density model behind the pseudo-count flavors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityKind {
    Empirical,
    /// Uniform within each class of the configured aggregation.
    UniformAggregation,
}

/// Which greedy policies an [`ExperimentTrace`] keeps in full.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotPolicy {
    Never,
    /// Whenever the greedy policy differs from the last stored one.
    OnChange,
    /// At steps `0, k, 2k, ...`.
    Every(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub beta: f64,
    pub epsilon_greedy: f64,
    pub bonus_source: BonusSource,
    pub density: DensityKind,
    pub aggregation: Option<Aggregation>,
    pub planning_tol: f64,
    pub planning_max_iters: usize,
    pub replan_every: usize,
    pub horizon: usize,
    pub snapshots: SnapshotPolicy,
    /// Algorithmic constant `m` entering [`theorem1_beta`]; unused by the loop.
    pub m: u64,
}

impl AgentConfig {
    pub fn new(beta: f64, bonus_source: BonusSource, horizon: usize) -> Self {
        Self {
            beta,
            epsilon_greedy: 0.0,
            bonus_source,
            density: DensityKind::Empirical,
            aggregation: None,
            planning_tol: DEFAULT_TOL,
            planning_max_iters: DEFAULT_MAX_ITERS,
            replan_every: 1,
            horizon,
            snapshots: SnapshotPolicy::Never,
            m: 1,
        }
    }

    pub fn with_epsilon(mut self, epsilon_greedy: f64) -> Self {
        self.epsilon_greedy = epsilon_greedy;
        self
    }

    pub fn with_aggregation(mut self, agg: Aggregation) -> Self {
        self.aggregation = Some(agg);
        self
    }

    pub fn with_density(mut self, density: DensityKind) -> Self {
        self.density = density;
        self
    }

    pub fn with_snapshots(mut self, snapshots: SnapshotPolicy) -> Self {
        self.snapshots = snapshots;
        self
    }

    /// Rejects configurations that cannot run on an MDP with `num_states` states.
    pub fn validate(&self, num_states: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta {} must be finite and nonnegative", self.beta));
        }
        if !(0.0..=1.0).contains(&self.epsilon_greedy) {
            return bad(format!("epsilon {} must lie in [0, 1]", self.epsilon_greedy));
        }
        if self.planning_tol.is_nan() || self.planning_tol <= 0.0 {
            return bad(format!("planning tolerance {} must be positive", self.planning_tol));
        }
        if self.replan_every == 0 || self.horizon == 0 || self.planning_max_iters == 0 {
            return bad("replan interval, horizon and iteration budget must be positive".into());
        }
        if matches!(self.snapshots, SnapshotPolicy::Every(0)) {
            return bad("snapshot interval must be positive".into());
        }
        let needs_agg = self.bonus_source == BonusSource::AbstractCount
            || (self.bonus_source.uses_density() && self.density == DensityKind::UniformAggregation);
        match &self.aggregation {
            None if needs_agg => bad(format!("{:?} needs an aggregation", self.bonus_source)),
            Some(agg) if agg.num_ground() != num_states => bad(format!(
                "aggregation covers {} states, MDP has {num_states}",
                agg.num_ground()
            )),
            _ => Ok(()),
        }
    }
}

/// Maximum-likelihood model built from visit statistics. Unvisited pairs have
/// reward 0 and a self-loop; the planner pins their values.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalModel {
    num_states: usize,
    num_actions: usize,
    discount: f64,
    rows: Vec<Vec<(usize, f64)>>,
    rewards: Vec<f64>,
}

impl EmpiricalModel {
    pub fn from_stats(stats: &VisitStats, discount: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidDiscount(discount));
        }
        let (ns, na) = (stats.num_states(), stats.num_actions());
        let mut model = Self {
            num_states: ns,
            num_actions: na,
            discount,
            rows: vec![Vec::new(); ns * na],
            rewards: vec![0.0; ns * na],
        };
        for s in 0..ns {
            for a in 0..na {
                model.refresh(stats, s, a);
            }
        }
        Ok(model)
    }

    /// Recomputes the row and reward of `(state, action)` from `stats`.
    pub fn refresh(&mut self, stats: &VisitStats, state: usize, action: usize) {
        let i = state * self.num_actions + action;
        let n = stats.count(state, action);
        let row = &mut self.rows[i];
        row.clear();
        if n == 0 {
            row.push((state, 1.0));
            self.rewards[i] = 0.0;
            return;
        }
        let inv = 1.0 / n as f64;
        row.extend(
            stats
                .successor_counts(state, action)
                .iter()
                .map(|&(j, c)| (j, c as f64 * inv)),
        );
        self.rewards[i] = stats.reward_sum(state, action) * inv;
    }
}

impl Model for EmpiricalModel {
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
        self.rewards[state * self.num_actions + action]
    }

    fn successors(&self, state: usize, action: usize) -> &[(usize, f64)] {
        &self.rows[state * self.num_actions + action]
    }
}

/// One environment step taken by the agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    /// Bonus of `(state, action)` in the plan the action was chosen from.
    pub bonus: f64,
    /// Count that produced `bonus`; 0 marks a pinned, unvisited pair.
    pub count: f64,
    pub cumulative_reward: f64,
    /// Whether the action was the uniform random one of epsilon-greedy.
    pub random: bool,
    /// FNV-1a hash of the greedy policy over ground states.
    pub policy_hash: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySnapshot {
    pub step: usize,
    pub actions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentTrace {
    pub steps: Vec<StepRecord>,
    pub snapshots: Vec<PolicySnapshot>,
    /// Plans that hit the iteration budget before the tolerance.
    pub unconverged_plans: usize,
}

impl ExperimentTrace {
    pub fn total_reward(&self) -> f64 {
        self.steps.last().map_or(0.0, |r| r.cumulative_reward)
    }

    /// Greedy policy in force at `step`, when snapshots were taken on change.
    pub fn policy_at(&self, step: usize) -> Option<&[usize]> {
        let i = self.snapshots.partition_point(|s| s.step <= step);
        i.checked_sub(1).map(|i| self.snapshots[i].actions.as_slice())
    }
}

fn policy_hash(actions: &[usize]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &a in actions {
        for byte in (a as u64).to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

#[derive(Clone)]
enum Density {
    Empirical(EmpiricalDensity),
    Uniform(UniformAggregationDensity),
}

impl Density {
    fn update(&mut self, state: usize, action: usize) {
        match self {
            Self::Empirical(m) => m.update(state, action),
            Self::Uniform(m) => m.update(state, action),
        }
    }

    fn probe(&self, state: usize, action: usize) -> Result<DensityProbe> {
        match self {
            Self::Empirical(m) => m.probe(state, action),
            Self::Uniform(m) => m.probe(state, action),
        }
    }
}

struct Agent<'a> {
    config: &'a AgentConfig,
    solver: ValueIteration,
    stats: VisitStats,
    model: EmpiricalModel,
    /// Aggregation and abstract statistics for the abstract-count flavor.
    abstract_side: Option<(&'a Aggregation, VisitStats)>,
    density: Option<Density>,
    counts: Vec<f64>,
    bonus: Vec<f64>,
    pinned: Vec<Option<f64>>,
    q: Option<QTable>,
    greedy: Vec<usize>,
    pin_value: f64,
}

impl<'a> Agent<'a> {
    fn new(mdp: &TabularMdp, config: &'a AgentConfig) -> Result<Self> {
        let (ns, na) = (mdp.num_states(), mdp.num_actions());
        let gamma = mdp.discount();
        let abstract_side = match config.bonus_source {
            BonusSource::AbstractCount => {
                let agg = config.aggregation.as_ref().expect("validated");
                Some((agg, VisitStats::new(agg.num_abstract(), na)))
            }
            _ => None,
        };
        let stats = VisitStats::new(ns, na);
        let model = match &abstract_side {
            Some((_, abs)) => EmpiricalModel::from_stats(abs, gamma)?,
            None => EmpiricalModel::from_stats(&stats, gamma)?,
        };
        let density = config.bonus_source.uses_density().then(|| match config.density {
            DensityKind::Empirical => Density::Empirical(EmpiricalDensity::new(ns, na)),
            DensityKind::UniformAggregation => Density::Uniform(UniformAggregationDensity::new(
                config.aggregation.clone().expect("validated"),
                na,
            )),
        });
        let pairs = model.num_states() * na;
        Ok(Self {
            config,
            solver: ValueIteration::new(config.planning_tol, config.planning_max_iters),
            stats,
            model,
            abstract_side,
            density,
            counts: vec![0.0; pairs],
            bonus: vec![0.0; pairs],
            pinned: vec![None; pairs],
            q: None,
            greedy: vec![0; ns],
            pin_value: 1.0 / (1.0 - gamma) + config.beta,
        })
    }

    fn refresh_counts(&mut self) -> Result<()> {
        let na = self.model.num_actions();
        match self.config.bonus_source {
            BonusSource::EmpiricalCount => {
                for (c, &n) in self.counts.iter_mut().zip(self.stats.counts()) {
                    *c = n as f64;
                }
            }
            BonusSource::AbstractCount => {
                let (_, abs) = self.abstract_side.as_ref().expect("abstract flavor");
                for (c, &n) in self.counts.iter_mut().zip(abs.counts()) {
                    *c = n as f64;
                }
            }
            source => {
                let density = self.density.as_ref().expect("density flavor");
                for (i, c) in self.counts.iter_mut().enumerate() {
                    let probe = match density.probe(i / na, i % na) {
                        Ok(p) => p,
                        Err(Error::EmptyDensity) => {
                            *c = 0.0;
                            continue;
                        }
                        Err(e) => return Err(e),
                    };
                    *c = match source {
                        BonusSource::PseudoCountTilde => corrected_pseudo_count(&probe)?.value,
                        _ => pseudo_count(&probe)?.value,
                    };
                }
            }
        }
        let beta = self.config.beta;
        for ((&c, b), pin) in self.counts.iter().zip(&mut self.bonus).zip(&mut self.pinned) {
            *b = beta / c.max(1.0).sqrt();
            *pin = (c == 0.0).then_some(self.pin_value);
        }
        Ok(())
    }

    fn plan(&mut self, trace: &mut ExperimentTrace) -> Result<()> {
        self.refresh_counts()?;
        let q = self
            .solver
            .solve_from(&self.model, &self.bonus, self.q.as_ref(), Some(&self.pinned))?;
        if !q.converged {
            trace.unconverged_plans += 1;
        }
        let phi = self.abstract_side.as_ref().map(|(agg, _)| *agg);
        for (s, g) in self.greedy.iter_mut().enumerate() {
            let row = phi.map_or(s, |agg| agg.phi(s));
            *g = argmax(q.row(row));
        }
        self.q = Some(q);
        Ok(())
    }

    /// Model index of a ground state: itself, or its abstract state.
    fn model_state(&self, state: usize) -> usize {
        self.abstract_side.as_ref().map_or(state, |(agg, _)| agg.phi(state))
    }

    fn observe(&mut self, state: usize, action: usize, reward: f64, next: usize) -> Result<()> {
        self.stats.record(state, action, reward, next)?;
        match &mut self.abstract_side {
            Some((agg, abs)) => {
                let k = agg.phi(state);
                abs.record(k, action, reward, agg.phi(next))?;
                self.model.refresh(abs, k, action);
            }
            None => self.model.refresh(&self.stats, state, action),
        }
        if let Some(d) = &mut self.density {
            d.update(state, action);
        }
        Ok(())
    }
}

/// Runs MBIE-EB for `config.horizon` steps on `mdp`, starting from a draw of
/// its initial distribution.
///
/// Every `replan_every` steps the agent solves
/// `Q(x, a) = R_hat(x, a) + beta / sqrt(max(count, 1)) + gamma E_hat[max Q]`
/// on its empirical model, warm-started from the previous solution. Pairs with
/// count 0 are pinned at `1 / (1 - gamma) + beta`. The agent then acts
/// greedily, replaced by a uniform action with probability `epsilon_greedy`.
/// The trace is a function of `(mdp, config, rng state)`.
pub fn run_mbie_eb<R: Rng + ?Sized>(mdp: &TabularMdp, config: &AgentConfig, rng: &mut R) -> Result<ExperimentTrace> {
    config.validate(mdp.num_states())?;
    let na = mdp.num_actions();
    let mut agent = Agent::new(mdp, config)?;
    let mut trace = ExperimentTrace {
        steps: Vec::with_capacity(config.horizon),
        ..Default::default()
    };
    let mut state = sample_initial(mdp, rng);
    let mut cumulative = 0.0;
    let mut hash = 0;
    for t in 0..config.horizon {
        if t % config.replan_every == 0 {
            agent.plan(&mut trace)?;
            hash = policy_hash(&agent.greedy);
        }
        let take_snapshot = match config.snapshots {
            SnapshotPolicy::Never => false,
            SnapshotPolicy::Every(k) => t % k == 0,
            SnapshotPolicy::OnChange => trace.snapshots.last().is_none_or(|s| s.actions != agent.greedy),
        };
        if take_snapshot {
            trace.snapshots.push(PolicySnapshot {
                step: t,
                actions: agent.greedy.clone(),
            });
        }
        let random = config.epsilon_greedy > 0.0 && rng.gen::<f64>() < config.epsilon_greedy;
        let action = if random {
            rng.gen_range(0..na)
        } else {
            agent.greedy[state]
        };
        let pair = agent.model_state(state) * na + action;
        let (bonus, count) = (agent.bonus[pair], agent.counts[pair]);
        let (next, reward) = step(mdp, state, action, rng)?;
        agent.observe(state, action, reward, next)?;
        cumulative += reward;
        trace.steps.push(StepRecord {
            state,
            action,
            reward,
            bonus,
            count,
            cumulative_reward: cumulative,
            random,
            policy_hash: hash,
        });
        state = next;
    }
    Ok(trace)
}
