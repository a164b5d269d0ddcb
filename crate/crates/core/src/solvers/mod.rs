//! Robot planning formulations over finite Markov games.

pub mod bayesian;
pub mod nash;
pub mod optimistic;
pub mod selection;
pub mod trusting;

pub use bayesian::{solve_bayesian, BayesianSolution, BayesianStart, HumanStrategy};
pub use nash::{robot_best_response, solve_nash, solve_nash_policy, NashPolicy, StrategyProfile};
pub use optimistic::{solve_optimistic, OptimisticSolution};
pub use selection::{EquilibriumSelection, StageRanking};
pub use trusting::{
    predict_trusting_human, solve_trusting_mdp, solve_trusting_with, trusting_transition, AugmentedState,
    Transition, TrustingDecision, TrustingModel, TrustingPolicy, TrustingSolution,
};
