//! JSON experiment configuration.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use explore_core::agent::SnapshotPolicy;
use explore_core::{AgentConfig, Aggregation, BonusSource, DensityKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Default exploration constants, in model reward units.
pub const DEFAULT_BETAS: [f64; 4] = [1e-4, 1e-3, 1e-2, 1e-1];

pub const DEFAULT_EPSILONS: [f64; 4] = [0.0, 0.05, 0.1, 0.2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Overestimation {
        t: usize,
        big_reward: f64,
        eps_reward: f64,
        p: f64,
        discount: f64,
    },
    Ninerooms {
        room_size: usize,
        discount: f64,
        /// Cumulative reward is reported every `record_every` steps.
        record_every: usize,
        /// Length of the early window whose reward is reported separately.
        early_window: usize,
    },
    Counterexample {
        etas: Vec<f64>,
        gamma: f64,
    },
    BoundsSuite {
        trials: usize,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Overestimation { .. } => "overestimation",
            Self::Ninerooms { .. } => "ninerooms",
            Self::Counterexample { .. } => "counterexample",
            Self::BoundsSuite { .. } => "bounds-suite",
        }
    }

    fn runs_agents(&self) -> bool {
        matches!(self, Self::Overestimation { .. } | Self::Ninerooms { .. })
    }
}

/// One plotted curve: an agent flavor swept over `betas`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    pub label: String,
    pub bonus_source: BonusSource,
    #[serde(default = "default_density")]
    pub density: DensityKind,
    #[serde(default)]
    pub epsilon_greedy: f64,
    pub betas: Vec<f64>,
}

fn default_density() -> DensityKind {
    DensityKind::UniformAggregation
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanningConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub replan_every: usize,
}

impl Default for PlanningConfig {
    fn default() -> Self {
        Self {
            tol: explore_core::mdp::DEFAULT_TOL,
            max_iters: explore_core::mdp::DEFAULT_MAX_ITERS,
            replan_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: Experiment,
    #[serde(default)]
    pub curves: Vec<CurveConfig>,
    pub seeds: Vec<u64>,
    pub horizon: usize,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub planning: PlanningConfig,
}

impl ExperimentConfig {
    pub fn default_for(kind: &str) -> Result<Self> {
        let curve = |label: &str, bonus_source, epsilon_greedy, betas: &[f64]| CurveConfig {
            label: label.to_string(),
            bonus_source,
            density: DensityKind::UniformAggregation,
            epsilon_greedy,
            betas: betas.to_vec(),
        };
        let (experiment, curves, seeds, horizon) = match kind {
            "overestimation" => (
                Experiment::Overestimation {
                    t: 9,
                    big_reward: 100.0,
                    eps_reward: 0.001,
                    p: 1e-4,
                    discount: 0.9,
                },
                vec![
                    curve("abstract-count", BonusSource::AbstractCount, 0.0, &DEFAULT_BETAS),
                    curve("pseudo-count-hat", BonusSource::PseudoCountHat, 0.0, &DEFAULT_BETAS),
                ],
                (0..20).collect(),
                200_000,
            ),
            "ninerooms" => {
                let mut curves = Vec::new();
                for (name, source) in [
                    ("mbie-eb", BonusSource::EmpiricalCount),
                    ("mbie-eb-pc", BonusSource::PseudoCountHat),
                ] {
                    for eps in DEFAULT_EPSILONS {
                        curves.push(curve(&format!("{name} eps={eps}"), source, eps, &[1e-4]));
                    }
                }
                (
                    Experiment::Ninerooms {
                        room_size: 5,
                        discount: 0.95,
                        record_every: 100,
                        early_window: 10_000,
                    },
                    curves,
                    (0..5).collect(),
                    50_000,
                )
            }
            "counterexample" => (
                Experiment::Counterexample {
                    etas: vec![0.05, 0.1, 0.2],
                    gamma: 0.9,
                },
                Vec::new(),
                vec![0],
                1,
            ),
            "bounds-suite" => (Experiment::BoundsSuite { trials: 200 }, Vec::new(), vec![0], 1),
            other => return Err(CliError::Config(format!("unknown experiment `{other}`"))),
        };
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            experiment,
            curves,
            seeds,
            horizon,
            output_dir: PathBuf::from(format!("results/{kind}")),
            planning: PlanningConfig::default(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let config: Self = serde_json::from_str(&text).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        match &self.experiment {
            Experiment::Ninerooms {
                record_every,
                early_window,
                ..
            } => {
                if *record_every == 0 || *early_window == 0 || *early_window > self.horizon {
                    return bad("record_every must be positive and early_window within the horizon".into());
                }
            }
            Experiment::Counterexample { etas, .. } if etas.is_empty() => {
                return bad("counterexample needs at least one eta".into());
            }
            Experiment::BoundsSuite { trials } if *trials == 0 => {
                return bad("bounds suite needs at least one trial".into());
            }
            _ => {}
        }
        if !self.experiment.runs_agents() {
            return Ok(());
        }
        if self.curves.is_empty() {
            return bad("at least one curve is required".into());
        }
        let mut labels = BTreeSet::new();
        for curve in &self.curves {
            if !labels.insert(curve.label.as_str()) {
                return bad(format!("duplicate curve label `{}`", curve.label));
            }
            if curve.betas.is_empty() {
                return bad(format!("curve `{}` has no beta values", curve.label));
            }
            for &beta in &curve.betas {
                // Sizes are checked against the environment at run time.
                self.agent_config(curve, beta, Aggregation::identity(1))
                    .validate(1)
                    .map_err(|e| CliError::Config(format!("curve `{}`: {e}", curve.label)))?;
            }
        }
        Ok(())
    }

    /// Agent configuration of one `(curve, beta)` run.
    pub fn agent_config(&self, curve: &CurveConfig, beta: f64, agg: Aggregation) -> AgentConfig {
        let snapshots = match self.experiment {
            Experiment::Overestimation { .. } => SnapshotPolicy::OnChange,
            _ => SnapshotPolicy::Never,
        };
        let mut config = AgentConfig::new(beta, curve.bonus_source, self.horizon)
            .with_epsilon(curve.epsilon_greedy)
            .with_density(curve.density)
            .with_aggregation(agg)
            .with_snapshots(snapshots);
        config.planning_tol = self.planning.tol;
        config.planning_max_iters = self.planning.max_iters;
        config.replan_every = self.planning.replan_every;
        config
    }
}
