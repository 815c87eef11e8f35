//! Multi-seed experiment orchestration.
//!
//! Every run is keyed by `(curve, beta, seed)` and seeded from the seed alone,
//! so results do not depend on scheduling or on the order of the seed list.

use std::collections::BTreeMap;
use std::path::Path;

use explore_core::{run_mbie_eb, solve_value_iteration, EnvBundle, ExperimentTrace, Model, TabularMdp};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bounds::{counterexample_values, run_bounds_suite};
use crate::config::{CurveConfig, Experiment, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::svg::emit_svg;
use crate::table::{csv_path, emit_csv, Metric, ResultTable, Series};

/// Optimality tolerance on action values when judging a greedy policy.
const OPTIMAL_TOL: f64 = 1e-9;

pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let metrics = match &config.experiment {
        Experiment::Overestimation {
            t,
            big_reward,
            eps_reward,
            p,
            discount,
        } => {
            let env = explore_core::make_overestimation(*t, *big_reward, *eps_reward, *p, *discount)?;
            vec![overestimation(config, &env)?]
        }
        Experiment::Ninerooms {
            room_size,
            discount,
            record_every,
            early_window,
        } => {
            let env = explore_core::make_nine_rooms(*room_size, *discount)?;
            ninerooms(config, &env, *record_every, *early_window)?
        }
        Experiment::Counterexample { etas, gamma } => vec![counterexample(etas, *gamma)?],
        Experiment::BoundsSuite { trials } => vec![bounds_suite(config, *trials)],
    };
    Ok(ResultTable {
        experiment: config.experiment.name().to_string(),
        metrics,
    })
}

/// Writes one CSV and one SVG per metric into `dir`, creating it if needed.
pub fn write_outputs(table: &ResultTable, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    for metric in &table.metrics {
        emit_csv(metric, &csv_path(dir, metric))?;
        emit_svg(metric, &dir.join(format!("{}.svg", metric.name)))?;
    }
    Ok(())
}

struct Job<'a> {
    curve: &'a CurveConfig,
    beta_index: usize,
    seed: u64,
}

/// Runs every `(curve, beta, seed)` job and reduces each trace with `reduce`.
fn run_jobs<T: Send>(
    config: &ExperimentConfig,
    env: &EnvBundle,
    reduce: impl Fn(&ExperimentTrace) -> T + Sync,
) -> Result<BTreeMap<(usize, usize, u64), T>> {
    let jobs: Vec<(usize, Job)> = config
        .curves
        .iter()
        .enumerate()
        .flat_map(|(c, curve)| {
            (0..curve.betas.len()).flat_map(move |b| {
                config.seeds.iter().map(move |&seed| {
                    (
                        c,
                        Job {
                            curve,
                            beta_index: b,
                            seed,
                        },
                    )
                })
            })
        })
        .collect();
    jobs.par_iter()
        .map(|(c, job)| {
            let agent = config.agent_config(job.curve, job.curve.betas[job.beta_index], env.aggregation.clone());
            let mut rng = ChaCha8Rng::seed_from_u64(job.seed);
            let trace = run_mbie_eb(&env.mdp, &agent, &mut rng)?;
            Ok(((*c, job.beta_index, job.seed), reduce(&trace)))
        })
        .collect()
}

/// Optimal action sets of the start states under the true model.
fn optimal_start_actions(mdp: &TabularMdp, starts: &[usize]) -> Result<Vec<(usize, Vec<usize>)>> {
    let q = solve_value_iteration(mdp, &vec![0.0; mdp.num_states() * mdp.num_actions()], 1e-12, 10_000_000)?;
    Ok(starts
        .iter()
        .map(|&s| {
            let best = q.state_value(s);
            let actions = (0..mdp.num_actions())
                .filter(|&a| q.get(s, a) >= best - OPTIMAL_TOL)
                .collect();
            (s, actions)
        })
        .collect())
}

/// First step from which the greedy policy stays optimal at every start state
/// until the end of the run; the horizon when it never settles.
pub fn time_to_optimal(trace: &ExperimentTrace, optimal: &[(usize, Vec<usize>)], horizon: usize) -> usize {
    let is_optimal = |actions: &[usize]| optimal.iter().all(|(s, best)| best.contains(&actions[*s]));
    let settled = trace
        .snapshots
        .iter()
        .rposition(|snap| !is_optimal(&snap.actions))
        .map_or(0, |i| i + 1);
    trace.snapshots.get(settled).map_or(horizon, |snap| snap.step)
}

fn overestimation(config: &ExperimentConfig, env: &EnvBundle) -> Result<Metric> {
    let optimal = optimal_start_actions(&env.mdp, &env.start_states)?;
    let results = run_jobs(config, env, |trace| time_to_optimal(trace, &optimal, config.horizon))?;
    let series = config
        .curves
        .iter()
        .enumerate()
        .map(|(c, curve)| {
            let mut series = Series::new(curve.label.clone(), curve.betas.clone());
            for &seed in &config.seeds {
                let values = (0..curve.betas.len()).map(|b| results[&(c, b, seed)] as f64).collect();
                series.per_seed.insert(seed, values);
            }
            series
        })
        .collect();
    Ok(Metric {
        name: "time_to_optimal".into(),
        x_label: "beta".into(),
        y_label: "steps until the greedy policy is optimal".into(),
        log_x: true,
        series,
    })
}

fn series_label(curve: &CurveConfig, beta: f64) -> String {
    if curve.betas.len() > 1 {
        format!("{} beta={beta}", curve.label)
    } else {
        curve.label.clone()
    }
}

fn ninerooms(
    config: &ExperimentConfig,
    env: &EnvBundle,
    record_every: usize,
    early_window: usize,
) -> Result<Vec<Metric>> {
    let checkpoints: Vec<usize> = (record_every..=config.horizon).step_by(record_every).collect();
    let scale = env.reward_scale;
    let results = run_jobs(config, env, |trace| {
        let at = |step: usize| trace.steps[step - 1].cumulative_reward * scale;
        (checkpoints.iter().map(|&t| at(t)).collect::<Vec<_>>(), at(early_window))
    })?;
    let x: Vec<f64> = checkpoints.iter().map(|&t| t as f64).collect();
    let (mut cumulative, mut early) = (Vec::new(), Vec::new());
    for (c, curve) in config.curves.iter().enumerate() {
        for (b, &beta) in curve.betas.iter().enumerate() {
            let label = series_label(curve, beta);
            let mut full = Series::new(label.clone(), x.clone());
            let mut head = Series::new(label, vec![early_window as f64]);
            for &seed in &config.seeds {
                let (values, first) = &results[&(c, b, seed)];
                full.per_seed.insert(seed, values.clone());
                head.per_seed.insert(seed, vec![*first]);
            }
            cumulative.push(full);
            early.push(head);
        }
    }
    Ok(vec![
        Metric {
            name: "cumulative_reward".into(),
            x_label: "timestep".into(),
            y_label: "cumulative reward".into(),
            log_x: false,
            series: cumulative,
        },
        Metric {
            name: "early_reward".into(),
            x_label: "timestep".into(),
            y_label: "cumulative reward".into(),
            log_x: false,
            series: early,
        },
    ])
}

fn counterexample(etas: &[f64], gamma: f64) -> Result<Metric> {
    let rows = etas
        .iter()
        .map(|&eta| counterexample_values(eta, gamma))
        .collect::<explore_core::Result<Vec<_>>>()?;
    let column = |name: &str, f: &dyn Fn(&crate::bounds::CounterexampleValues) -> f64| {
        let mut s = Series::new(name, etas.to_vec());
        s.per_seed.insert(0, rows.iter().map(f).collect());
        s
    };
    Ok(Metric {
        name: "counterexample".into(),
        x_label: "eta".into(),
        y_label: "value".into(),
        log_x: false,
        series: vec![
            column("v_pi1 numeric", &|r| r.v_pi1),
            column("v_pi1 analytic", &|r| r.v_pi1_analytic),
            column("v_pi2 numeric", &|r| r.v_pi2),
            column("v_pi2 analytic", &|r| r.v_pi2_analytic),
            column("loss numeric", &|r| r.loss),
            column("loss analytic", &|r| r.loss_analytic),
        ],
    })
}

fn bounds_suite(config: &ExperimentConfig, trials: usize) -> Metric {
    let mut series = Vec::new();
    for &seed in &config.seeds {
        for (i, outcome) in run_bounds_suite(trials, seed).into_iter().enumerate() {
            if series.len() <= i {
                series.push(Series::new(outcome.name, vec![trials as f64]));
            }
            series[i].per_seed.insert(seed, vec![outcome.failures as f64]);
        }
    }
    Metric {
        name: "bound_failures".into(),
        x_label: "trials".into(),
        y_label: "failed comparisons".into(),
        log_x: false,
        series,
    }
}

/// Total failed comparisons recorded in a bounds-suite table.
pub fn bound_failures(table: &ResultTable) -> f64 {
    table.metric("bound_failures").map_or(0.0, |m| {
        m.series.iter().flat_map(|s| s.per_seed.values().flatten()).sum()
    })
}
