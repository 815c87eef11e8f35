//! Benchmark domains with their canonical aggregations.
//!
//! Episodic resets are encoded in the transition function: terminal states
//! move back through the initial distribution, so every domain is a
//! continuing MDP for the planner.

use crate::abstraction::Aggregation;
use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

/// Action indices of the over-estimation MDP.
pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// Action indices of the nine-room grid. Row 0 is the bottom row.
pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const WEST: usize = 2;
pub const EAST: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvBundle {
    pub mdp: TabularMdp,
    pub aggregation: Aggregation,
    pub labels: Vec<String>,
    /// Multiply model rewards by this to recover the domain's reward units.
    pub reward_scale: f64,
    /// States with positive initial probability.
    pub start_states: Vec<usize>,
}

impl EnvBundle {
    fn new(mdp: TabularMdp, aggregation: Aggregation, labels: Vec<String>, reward_scale: f64) -> Self {
        let start_states = mdp
            .initial_distribution()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(s, _)| s)
            .collect();
        Self {
            mdp,
            aggregation,
            labels,
            reward_scale,
            start_states,
        }
    }
}

/// Start states `s_0..s_t`, then `T0 = t + 1` and `T1 = t + 2`.
///
/// From a start state, left reaches `T0` and right reaches `T1` with
/// probability `p`, otherwise the episode restarts. `T0` pays `eps_reward`,
/// `T1` pays `big_reward`, both on the step that leaves them, and both
/// restart. Rewards are divided by `big_reward`.
pub fn make_overestimation(t: usize, big_reward: f64, eps_reward: f64, p: f64, discount: f64) -> Result<EnvBundle> {
    if !(big_reward > 0.0 && big_reward.is_finite()) {
        return Err(Error::Domain(format!("large reward {big_reward} must be positive")));
    }
    if !(0.0..=big_reward).contains(&eps_reward) {
        return Err(Error::Domain(format!(
            "small reward {eps_reward} must lie in [0, {big_reward}]"
        )));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!("success probability {p} must lie in (0, 1]")));
    }
    let starts = t + 1;
    let (t0, t1) = (starts, starts + 1);
    let ns = starts + 2;
    let restart = |scale: f64| -> Vec<(usize, f64)> { (0..starts).map(|s| (s, scale / starts as f64)).collect() };
    let mut rows = Vec::with_capacity(ns * 2);
    let mut rewards = Vec::with_capacity(ns * 2);
    for _ in 0..starts {
        rows.push(vec![(t0, 1.0)]);
        let mut right = restart(1.0 - p);
        right.push((t1, p));
        rows.push(right);
        rewards.extend([0.0, 0.0]);
    }
    for r in [eps_reward / big_reward, 1.0] {
        rows.push(restart(1.0));
        rows.push(restart(1.0));
        rewards.extend([r, r]);
    }
    let mut initial = vec![1.0 / starts as f64; starts];
    initial.extend([0.0, 0.0]);
    let mdp = TabularMdp::new(ns, 2, rows, rewards, discount, initial)?;
    let mut phi = vec![0; starts];
    phi.extend([1, 2]);
    let agg = Aggregation::new(phi, 3)?;
    let mut labels: Vec<String> = (0..starts).map(|s| format!("s{s}")).collect();
    labels.extend(["T0".to_string(), "T1".to_string()]);
    Ok(EnvBundle::new(mdp, agg, labels, big_reward))
}

/// Geometry of the nine-room grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NineRooms {
    pub room_size: usize,
}

impl NineRooms {
    pub fn width(&self) -> usize {
        3 * self.room_size
    }

    pub fn state(&self, x: usize, y: usize) -> usize {
        y * self.width() + x
    }

    pub fn cell(&self, state: usize) -> (usize, usize) {
        (state % self.width(), state / self.width())
    }

    pub fn room(&self, state: usize) -> usize {
        let (x, y) = self.cell(state);
        (y / self.room_size) * 3 + x / self.room_size
    }

    pub fn start(&self) -> usize {
        0
    }

    /// The 2x2 block in the top-right corner.
    pub fn goals(&self) -> [usize; 4] {
        let w = self.width();
        [
            self.state(w - 2, w - 2),
            self.state(w - 1, w - 2),
            self.state(w - 2, w - 1),
            self.state(w - 1, w - 1),
        ]
    }

    /// Cell reached by moving from `state`; walls leave the agent in place.
    pub fn move_to(&self, state: usize, action: usize) -> usize {
        let (x, y) = self.cell(state);
        let (w, r) = (self.width(), self.room_size);
        let door = r / 2;
        let target = match action {
            UP if y + 1 < w && ((y + 1) % r != 0 || x % r == door) => Some((x, y + 1)),
            DOWN if y > 0 && (y % r != 0 || x % r == door) => Some((x, y - 1)),
            WEST if x > 0 && (x % r != 0 || y % r == door) => Some((x - 1, y)),
            EAST if x + 1 < w && ((x + 1) % r != 0 || y % r == door) => Some((x + 1, y)),
            _ => None,
        };
        target.map_or(state, |(x, y)| self.state(x, y))
    }
}

/// Nine `room_size x room_size` rooms in a 3x3 layout with a doorway at the
/// middle of every shared wall. The agent starts in the bottom-left cell; any
/// action in one of the four top-right goal cells pays 1 and restarts.
pub fn make_nine_rooms(room_size: usize, discount: f64) -> Result<EnvBundle> {
    if room_size < 2 {
        return Err(Error::Domain(format!("room size {room_size} must be at least 2")));
    }
    let grid = NineRooms { room_size };
    let w = grid.width();
    let ns = w * w;
    let goals = grid.goals();
    let mut rows = Vec::with_capacity(ns * 4);
    let mut rewards = Vec::with_capacity(ns * 4);
    for s in 0..ns {
        let goal = goals.contains(&s);
        for a in 0..4 {
            if goal {
                rows.push(vec![(grid.start(), 1.0)]);
                rewards.push(1.0);
            } else {
                rows.push(vec![(grid.move_to(s, a), 1.0)]);
                rewards.push(0.0);
            }
        }
    }
    let mut initial = vec![0.0; ns];
    initial[grid.start()] = 1.0;
    let mdp = TabularMdp::new(ns, 4, rows, rewards, discount, initial)?;
    let agg = Aggregation::new((0..ns).map(|s| grid.room(s)).collect(), 9)?;
    let labels = (0..ns)
        .map(|s| {
            let (x, y) = grid.cell(s);
            format!("r{}({x},{y})", grid.room(s))
        })
        .collect();
    Ok(EnvBundle::new(mdp, agg, labels, 1.0))
}

/// Three-state, two-action MDP on which an approximate abstraction picks the
/// wrong action.
///
/// Action 0: `s0` loops with reward 0; `s1` pays `eta` and moves to `s2` with
/// probability `eta`. Action 1: `s0` loops paying `eta`; `s1` loops with
/// reward 0. `s2` is absorbing with reward 1. `s0` and `s1` are aggregated.
pub fn make_counterexample(eta: f64, gamma: f64) -> Result<EnvBundle> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::Domain(format!("eta {eta} must lie in [0, 1)")));
    }
    let rows = vec![
        vec![(0, 1.0)],
        vec![(0, 1.0)],
        vec![(1, 1.0 - eta), (2, eta)],
        vec![(1, 1.0)],
        vec![(2, 1.0)],
        vec![(2, 1.0)],
    ];
    let rewards = vec![0.0, eta, eta, 0.0, 1.0, 1.0];
    let mdp = TabularMdp::new(3, 2, rows, rewards, gamma, vec![1.0, 0.0, 0.0])?;
    let agg = Aggregation::new(vec![0, 0, 1], 2)?;
    let labels = ["s0", "s1", "s2"].map(String::from).to_vec();
    Ok(EnvBundle::new(mdp, agg, labels, 1.0))
}
