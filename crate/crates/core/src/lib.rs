//! Tabular model-based exploration with count, abstraction-count and
//! pseudo-count bonuses.
//!
//! The crate is organised bottom-up: [`mdp`] holds models and solvers,
//! [`abstraction`] state aggregation, [`density`] and [`pseudocount`] the
//! density models and the counts derived from them, [`agent`] the MBIE-EB
//! loop and [`envs`] the benchmark domains.

pub mod abstraction;
pub mod agent;
pub mod density;
pub mod envs;
pub mod error;
pub mod mdp;
pub mod pseudocount;

pub use abstraction::{
    build_abstract_mdp, lift_policy, model_similarity_eta, q_gap_bound, suboptimality_bound, Aggregation,
};
pub use agent::{
    corrected_beta, over_exploration_factor, run_mbie_eb, theorem1_beta, under_exploration_confidence, AgentConfig,
    BonusSource, DensityKind, EmpiricalModel, ExperimentTrace, PolicySnapshot, SnapshotPolicy, StepRecord,
};
pub use density::{
    empirical_density, lift_abstract_density, lifted_probe, uniform_aggregation_density, CountForm, DensityModel,
    DensityProbe, EmpiricalDensity, MixtureDensity, UniformAggregationDensity, VisitStats,
};
pub use envs::{make_counterexample, make_nine_rooms, make_overestimation, EnvBundle};
pub use error::{Error, Result};
pub use mdp::{
    argmax, evaluate_policy, greedy_policy, sample_initial, solve_value_iteration, step, Model, Policy, QTable,
    TabularMdp, ValueIteration,
};
pub use pseudocount::{
    abstract_pseudo_count, concentration_cap, corrected_pseudo_count, count_sandwich_bounds, estimate_ratio_constants,
    exact_abstraction_identity, pseudo_count, pseudo_count_report, pseudo_count_total, theorem2_check,
    verify_induced_abstraction, InducedAbstractionReport, PseudoCount, PseudoCountReport, RatioConstants,
    SandwichBounds,
};
