//! Randomized checks of every closed form and bound in the core crate.
//!
//! Each check draws its own instances from a generator seeded by the suite
//! seed and the check's position, so checks are independent of each other and
//! of execution order.

use explore_core::abstraction::{
    build_abstract_mdp, lift_policy, model_similarity_eta, q_gap_bound, suboptimality_bound,
};
use explore_core::agent::{corrected_beta, over_exploration_factor, under_exploration_confidence};
use explore_core::density::{
    uniform_aggregation_density, DensityModel, DensityProbe, EmpiricalDensity, MixtureDensity,
    UniformAggregationDensity, VisitStats,
};
use explore_core::pseudocount::{
    abstract_pseudo_count, concentration_cap, corrected_pseudo_count, count_sandwich_bounds, estimate_ratio_constants,
    exact_abstraction_identity, pseudo_count, theorem2_check, verify_induced_abstraction,
};
use explore_core::{evaluate_policy, greedy_policy, make_counterexample, solve_value_iteration, Aggregation, Policy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::random::{random_aggregation, random_history, random_mdp, random_trajectory, similar_mdp};

/// Result of one randomized check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Largest violation seen, in the check's own units.
    pub worst: f64,
    /// Cases skipped because the quantity is undefined there.
    pub skipped: usize,
}

impl CheckOutcome {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            cases: 0,
            failures: 0,
            worst: 0.0,
            skipped: 0,
        }
    }

    /// Records one comparison whose violation is `excess` (nonpositive = pass).
    fn record(&mut self, excess: f64) {
        self.cases += 1;
        if excess > 0.0 || excess.is_nan() {
            self.failures += 1;
            self.worst = self.worst.max(if excess.is_nan() { f64::INFINITY } else { excess });
        }
    }

    fn require(&mut self, ok: bool) {
        self.record(if ok { 0.0 } else { 1.0 });
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

fn rng_for(seed: u64, check: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ check.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Empirical-density pseudo-counts equal visit counts at every prefix of
/// random 8-state, 3-action trajectories of length 500.
pub fn check_consistency(trials: usize, seed: u64) -> CheckOutcome {
    let mut out = CheckOutcome::new("pseudo-count consistency");
    let mut rng = rng_for(seed, 1);
    for _ in 0..trials {
        let mdp = random_mdp(8, 3, 0.9, &mut rng).expect("valid random MDP");
        let pairs = random_trajectory(&mdp, 500, &mut rng).expect("valid trajectory");
        let mut model = EmpiricalDensity::new(8, 3);
        let mut counts = [0u64; 24];
        for &(s, a) in &pairs {
            model.update(s, a);
            counts[s * 3 + a] += 1;
            for (i, &n) in counts.iter().enumerate() {
                let n_hat = pseudo_count(&model.probe(i / 3, i % 3).expect("nonempty")).expect("learning-positive");
                out.record((n_hat.value - n as f64).abs() - 1e-9);
            }
        }
    }
    out
}

struct UniformCase {
    agg: Aggregation,
    stats: VisitStats,
    model: UniformAggregationDensity,
}

fn uniform_case<R: Rng>(rng: &mut R) -> UniformCase {
    let ns = rng.gen_range(2..=12);
    let k = rng.gen_range(1..=ns);
    let na = rng.gen_range(1..=3);
    let agg = random_aggregation(ns, k, rng).expect("surjective");
    let len = rng.gen_range(1..=300);
    let stats = VisitStats::from_pairs(ns, na, &random_history(ns, na, len, rng)).expect("in range");
    let model = uniform_aggregation_density(&stats, &agg).expect("sizes agree");
    UniformCase { agg, stats, model }
}

/// Uniform-aggregation densities: the pseudo-count equals the exact
/// abstraction identity and strictly exceeds the aggregate count.
pub fn check_abstraction_identity(cases: usize, seed: u64) -> CheckOutcome {
    let mut out = CheckOutcome::new("exact abstraction identity");
    let mut rng = rng_for(seed, 2);
    for _ in 0..cases {
        let case = uniform_case(&mut rng);
        let n = case.stats.total();
        for s in 0..case.stats.num_states() {
            for a in 0..case.stats.num_actions() {
                let g = case.agg.class_size(s);
                let n_abs = case.stats.aggregate_count(&case.agg, case.agg.phi(s), a);
                let n_hat = pseudo_count(&case.model.probe(s, a).expect("nonempty")).expect("learning-positive");
                match exact_abstraction_identity(g, n_abs as f64, n as f64) {
                    Ok(v) => {
                        out.record((n_hat.value - v).abs() - 1e-9);
                        if g > 1 && n_abs >= 1 {
                            out.require(n_hat.value > n_abs as f64);
                        }
                    }
                    // All mass on one aggregation: both sides diverge unless |G| = 1.
                    Err(_) => out.require(n_hat.saturated || g == 1),
                }
            }
        }
    }
    out
}

/// Corrected pseudo-counts recover aggregate counts on uniform-aggregation
/// densities and never exceed the plain pseudo-count, including on mixtures.
pub fn check_corrected_count(cases: usize, seed: u64) -> CheckOutcome {
    let mut out = CheckOutcome::new("corrected pseudo-count");
    let mut rng = rng_for(seed, 3);
    for _ in 0..cases {
        let case = uniform_case(&mut rng);
        for s in 0..case.stats.num_states() {
            for a in 0..case.stats.num_actions() {
                let probe = case.model.probe(s, a).expect("nonempty");
                let n_tilde = corrected_pseudo_count(&probe).expect("learning-positive");
                let n_abs = case.stats.aggregate_count(&case.agg, case.agg.phi(s), a) as f64;
                out.record((n_tilde.value - n_abs).abs() - 1e-9);
                let n_hat = pseudo_count(&probe).expect("learning-positive");
                out.record(n_tilde.value - n_hat.value - 1e-9);
            }
        }
        let (ns, na) = (case.stats.num_states(), case.stats.num_actions());
        let mut mixture = MixtureDensity::new(ns, na, rng.gen_range(0.05..=1.0)).expect("weight in range");
        for (s, a) in random_history(ns, na, rng.gen_range(1..=300), &mut rng) {
            mixture.update(s, a);
        }
        for s in 0..ns {
            for a in 0..na {
                let probe = mixture.probe(s, a).expect("nonempty");
                let (Ok(hat), Ok(tilde)) = (pseudo_count(&probe), corrected_pseudo_count(&probe)) else {
                    out.skipped += 1;
                    continue;
                };
                if hat.saturated || tilde.saturated {
                    out.skipped += 1;
                    continue;
                }
                out.record(tilde.value - hat.value - 1e-9 * hat.value.max(1.0));
            }
        }
    }
    out
}

/// Values of the three-state counterexample at `(eta, gamma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterexampleValues {
    pub v_pi1: f64,
    pub v_pi1_analytic: f64,
    pub v_pi2: f64,
    pub v_pi2_analytic: f64,
    /// Ground value lost at `s0` by the lifted abstract-optimal policy.
    pub loss: f64,
    pub loss_analytic: f64,
    pub abstract_action: usize,
    pub ground_action: usize,
}

pub fn counterexample_values(eta: f64, gamma: f64) -> explore_core::Result<CounterexampleValues> {
    let tol = 1e-12;
    let env = make_counterexample(eta, gamma)?;
    let abs = build_abstract_mdp(&env.mdp, &env.aggregation)?;
    let v_pi1 = evaluate_policy(&abs, &Policy::deterministic(vec![0, 0], 2)?, tol)?[0];
    let v_pi2 = evaluate_policy(&abs, &Policy::deterministic(vec![1, 1], 2)?, tol)?[0];
    let q_abs = solve_value_iteration(&abs, &[0.0; 4], tol, 10_000_000)?;
    let q_ground = solve_value_iteration(&env.mdp, &[0.0; 6], tol, 10_000_000)?;
    let abstract_policy = greedy_policy(&q_abs);
    let lifted = lift_policy(&abstract_policy, &env.aggregation)?;
    let v_lifted = evaluate_policy(&env.mdp, &lifted, tol)?;
    Ok(CounterexampleValues {
        v_pi1,
        v_pi1_analytic: eta / (2.0 * (1.0 - gamma) * (1.0 - gamma + gamma * eta / 2.0)),
        v_pi2,
        v_pi2_analytic: eta / (2.0 * (1.0 - gamma)),
        loss: q_ground.state_value(0) - v_lifted[0],
        loss_analytic: eta / (1.0 - gamma),
        abstract_action: abstract_policy.action(0).expect("deterministic"),
        ground_action: greedy_policy(&q_ground).action(0).expect("deterministic"),
    })
}

/// Counterexample values against their closed forms, for several `eta`.
pub fn check_counterexample(etas: &[f64], gamma: f64) -> CheckOutcome {
    let mut out = CheckOutcome::new("counterexample values");
    for &eta in etas {
        let v = counterexample_values(eta, gamma).expect("valid counterexample");
        out.record((v.v_pi1 - v.v_pi1_analytic).abs() - 1e-6);
        out.record((v.v_pi2 - v.v_pi2_analytic).abs() - 1e-6);
        out.record((v.loss - v.loss_analytic).abs() - 1e-6);
        out.require(v.abstract_action == 0 && v.ground_action == 1);
    }
    out
}

/// On random model-similarity abstractions, the measured Q gap and the value
/// lost by the lifted abstract policy stay within their closed-form bounds.
pub fn check_abstraction_bounds(cases: usize, seed: u64) -> CheckOutcome {
    let mut out = CheckOutcome::new("abstraction Q-gap and loss bounds");
    let mut rng = rng_for(seed, 5);
    let tol = 1e-10;
    for _ in 0..cases {
        let k = rng.gen_range(2..=4);
        let sizes: Vec<usize> = (0..k).map(|_| rng.gen_range(1..=3)).collect();
        let na = rng.gen_range(2..=3);
        let eta = rng.gen_range(0.01..=0.3);
        let gamma = rng.gen_range(0.5..=0.95);
        let (mdp, agg) = similar_mdp(&sizes, na, eta, gamma, &mut rng).expect("valid construction");
        let measured = model_similarity_eta(&mdp, &agg).expect("sizes agree");
        if measured > eta + 1e-12 {
            out.record(measured - eta);
            continue;
        }
        let abs = build_abstract_mdp(&mdp, &agg).expect("sizes agree");
        let qg = solve_value_iteration(&mdp, &vec![0.0; mdp_states(&mdp) * na], tol, 10_000_000).expect("solvable");
        let qa = solve_value_iteration(&abs, &vec![0.0; k * na], tol, 10_000_000).expect("solvable");
        let mut gap: f64 = 0.0;
        for s in 0..mdp_states(&mdp) {
            for a in 0..na {
                gap = gap.max((qg.get(s, a) - qa.get(agg.phi(s), a)).abs());
            }
        }
        let slack = 1e-6;
        out.record(gap - q_gap_bound(measured, k, gamma).expect("in domain") - slack);
        let lifted = lift_policy(&greedy_policy(&qa), &agg).expect("sizes agree");
        let v = evaluate_policy(&mdp, &lifted, tol).expect("evaluable");
        let loss = (0..mdp_states(&mdp))
            .map(|s| qg.state_value(s) - v[s])
            .fold(0.0, f64::max);
        out.record(loss - suboptimality_bound(measured, k, gamma).expect("in domain") - slack);
    }
    out
}

fn mdp_states(mdp: &explore_core::TabularMdp) -> usize {
    explore_core::Model::num_states(mdp)
}

/// Ratio-constant sandwich `a^2 c N_A <= N_hat_A <= b^2 d N_A` at every prefix
/// of random histories, for uniform-aggregation, mixture and empirical
/// densities. Uniform-aggregation densities with their own map must give unit
/// constants and equality.
pub fn check_ratio_sandwich(cases: usize, seed: u64) -> CheckOutcome {
    let mut out = CheckOutcome::new("ratio-constant sandwich");
    let mut rng = rng_for(seed, 6);
    for case in 0..cases {
        let ns = rng.gen_range(2..=8);
        let na = rng.gen_range(1..=3);
        let agg = random_aggregation(ns, rng.gen_range(1..=ns), &mut rng).expect("surjective");
        let history = random_history(ns, na, rng.gen_range(2..=60), &mut rng);
        match case % 3 {
            0 => sandwich_case(
                &history,
                UniformAggregationDensity::new(agg.clone(), na),
                &agg,
                true,
                &mut out,
            ),
            1 => {
                let model = MixtureDensity::new(ns, na, rng.gen_range(0.05..=1.0)).expect("weight in range");
                sandwich_case(&history, model, &agg, false, &mut out)
            }
            _ => sandwich_case(&history, EmpiricalDensity::new(ns, na), &agg, false, &mut out),
        }
    }
    out
}

fn sandwich_case<M: DensityModel>(
    history: &[(usize, usize)],
    model: M,
    agg: &Aggregation,
    exact: bool,
    out: &mut CheckOutcome,
) {
    let rc = estimate_ratio_constants(history, model.clone(), agg).expect("valid history");
    let Some((c, d)) = rc.increment else {
        out.skipped += 1;
        return;
    };
    if exact {
        for v in [rc.a, rc.b, c, d] {
            out.record((v - 1.0).abs() - 1e-9);
        }
    }
    let na = model.num_actions();
    let mut model = model;
    let mut counts = vec![0u64; agg.num_abstract() * na];
    for (t, &(s, a)) in history.iter().enumerate() {
        model.update(s, a);
        counts[agg.phi(s) * na + a] += 1;
        let n = (t + 1) as u64;
        for k in 0..agg.num_abstract() {
            for act in 0..na {
                let hits = counts[k * na + act];
                // The empirical count of a pair holding all the mass has no
                // finite pseudo-count counterpart.
                if hits == 0 || hits == n {
                    continue;
                }
                let n_hat = abstract_pseudo_count(&model, agg, k, act).expect("learning-positive");
                if n_hat.saturated {
                    out.skipped += 1;
                    continue;
                }
                out.require(theorem2_check(rc.a, rc.b, c, d, n_hat.value, hits));
                if exact {
                    out.record((n_hat.value - hits as f64).abs() - 1e-9);
                }
            }
        }
    }
}

/// Pseudo-counts of densities within `(1 +- eps)^3` bands around a
/// uniform-aggregation density lie between the sandwich bounds, and the bounds
/// widen with `eps`.
pub fn check_sandwich(cases: usize, seed: u64) -> CheckOutcome {
    let mut out = CheckOutcome::new("f/g sandwich");
    let mut rng = rng_for(seed, 7);
    for _ in 0..cases {
        let g = rng.gen_range(1..=6);
        let n_total = rng.gen_range(10..=2000) as f64;
        let n_abs = rng.gen_range(0..(n_total as u64)) as f64;
        let eps = rng.gen_range(0.0..=0.02);
        let bounds = count_sandwich_bounds(eps, g, n_abs, n_total).expect("in domain");
        let rho_a = n_abs / n_total;
        let rho_a_next = (n_abs + 1.0) / (n_total + 1.0);
        let mut band = || rng.gen_range((1.0 - eps).powi(3)..=(1.0 + eps).powi(3));
        let (u, u_next) = (band(), band());
        let probe = DensityProbe::new(rho_a * u / g as f64, rho_a_next * u_next / g as f64, 1.0);
        if probe.rho_prime <= probe.rho {
            out.skipped += 1;
            continue;
        }
        let n_hat = pseudo_count(&probe).expect("learning-positive").value;
        let tol = 1e-9 * n_hat.max(1.0);
        out.record(bounds.low - n_hat - tol);
        out.record(n_hat - bounds.high - tol);
        let wider = count_sandwich_bounds((eps * 2.0).min(0.99), g, n_abs, n_total).expect("in domain");
        out.require(wider.low <= bounds.low + tol && wider.high >= bounds.high - tol);
        let exact = count_sandwich_bounds(0.0, g, n_abs, n_total).expect("in domain");
        let identity = exact_abstraction_identity(g, n_abs, n_total).expect("in domain");
        out.record((exact.low - identity).abs().max((exact.high - identity).abs()) - 1e-9 * identity.max(1.0));
    }
    out
}

/// `N_hat <= N_A (1 + 2 / (k - 1))` whenever `N_A <= n_A / k` and `k <= n_A`.
pub fn check_concentration_cap(cases: usize, seed: u64) -> CheckOutcome {
    let mut out = CheckOutcome::new("concentration cap");
    let mut rng = rng_for(seed, 8);
    for _ in 0..cases {
        let g = rng.gen_range(1..=20);
        let n_total = rng.gen_range(2.0..=5000.0);
        let k = rng.gen_range(1.0 + 1e-3..=n_total);
        let n_abs = rng.gen_range(0.0..=n_total / k);
        let n_hat = exact_abstraction_identity(g, n_abs, n_total).expect("below total");
        let cap = concentration_cap(k).expect("k > 1");
        out.record(n_hat - n_abs * cap - 1e-9 * n_hat.max(1.0));
    }
    out
}

/// A uniform-aggregation density induces its own aggregation exactly; the
/// empirical density does not induce a coarser one once counts differ.
pub fn check_induced_abstraction(cases: usize, seed: u64) -> CheckOutcome {
    let mut out = CheckOutcome::new("induced abstraction verifier");
    let mut rng = rng_for(seed, 9);
    for _ in 0..cases {
        let ns = rng.gen_range(2..=8);
        let na = rng.gen_range(1..=3);
        let agg = random_aggregation(ns, rng.gen_range(1..ns), &mut rng).expect("surjective");
        let history = random_history(ns, na, rng.gen_range(1..=40), &mut rng);
        let own = verify_induced_abstraction(&history, UniformAggregationDensity::new(agg.clone(), na), &agg, 0.0)
            .expect("valid history");
        out.require(own.passed && own.worst_violation == 0.0);
    }
    let pair = Aggregation::new(vec![0, 0], 1).expect("valid map");
    let mut uneven = vec![(0, 0); 3];
    uneven.extend(std::iter::repeat_n((1, 0), 7));
    let report = verify_induced_abstraction(&uneven, EmpiricalDensity::new(2, 1), &pair, 0.01).expect("valid");
    out.require(!report.passed && report.worst_violation > 0.0);
    out
}

/// Exact identities of the exploration-constant calculus.
pub fn check_beta_calculus(cases: usize, seed: u64) -> CheckOutcome {
    let mut out = CheckOutcome::new("beta calculus");
    let mut rng = rng_for(seed, 10);
    out.require(over_exploration_factor(1.0, 1.0, 1.0, 1.0) == Ok(1.0));
    for _ in 0..cases {
        let delta = rng.gen_range(1e-6..1.0);
        let (s, a, m) = (rng.gen_range(1..500), rng.gen_range(1..10), rng.gen_range(1..100));
        out.require(under_exploration_confidence(1.0, delta, s, a, m) == Ok(1.0 - delta));
        let (beta, b, d) = (
            rng.gen_range(1e-6..10.0),
            rng.gen_range(0.1..10.0),
            rng.gen_range(0.1..10.0),
        );
        let ratio = corrected_beta(beta, b, d).expect("positive constants") / beta;
        out.record((ratio - b * d.sqrt()).abs() - 1e-12 * b * d.sqrt());
        let (lo_a, lo_c) = (rng.gen_range(0.1..=b), rng.gen_range(0.1..=d));
        out.require(over_exploration_factor(lo_a, b, lo_c, d).expect("positive") >= 1.0 - 1e-12);
    }
    out
}

/// Every check with `trials` random cases each.
pub fn run_bounds_suite(trials: usize, seed: u64) -> Vec<CheckOutcome> {
    vec![
        check_consistency(trials.div_ceil(10).max(1), seed),
        check_abstraction_identity(trials, seed),
        check_corrected_count(trials, seed),
        check_counterexample(&[0.05, 0.1, 0.2], 0.9),
        check_abstraction_bounds(trials, seed),
        check_ratio_sandwich(trials, seed),
        check_sandwich(trials, seed),
        check_concentration_cap(trials, seed),
        check_induced_abstraction(trials, seed),
        check_beta_calculus(trials, seed),
    ]
}
