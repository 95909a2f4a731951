//! Qualitative and approximate quantitative analysis of multiple-environment
//! Markov decision processes: almost-sure and limit-sure parity regions with
//! witness strategies, a bounded-memory gap solver, exact strategy evaluation
//! and seeded simulation.

pub mod almost_sure;
pub mod error;
pub mod eval;
pub mod examples;
pub mod graph;
pub mod limit_sure;
pub mod model;
pub mod numeric;
pub mod quantitative;
pub mod strategy;

pub use almost_sure::{as_objective, as_parity, as_safety, revealing_transitions, synthesize_as_strategy, to_revealed_form, AsSolver};
pub use error::{ModelError, QuantError, RestrictError, StrategyError};
pub use eval::{evaluate_exact, simulate, EvalResult, SimStats};

pub use limit_sure::{common_ecs_revealed, distinguishing_partition, ls_objective, ls_parity, synthesize_ls_strategy, LsEngine};
pub use graph::{almost_sure_mdp, ec_is_winning, mec_decomposition, EndComponent, MemorylessStrategy};

pub use quantitative::{
    build_gap_constraints, classify_mcec, evaluate_constraints_for_fixed_p, mcecs_general, memory_bound, purge, solve_gap,
    ConstraintSystem, GapAnswer, GapBudget, McecKind, PurgeResult, SynthesisConstants,
};
pub use model::{
    dedup_environments, encode_objective, restrict, union_mdp, ActionId, Dist, EnvId, EnvSet, Memdp, Objective,
    Region, StateId,
};
pub use numeric::Rat;
pub use strategy::StrategyAutomaton;
