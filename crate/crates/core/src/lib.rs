//! Planning for robots whose objective the human does not know.
//!
//! The crate covers finite two-player Markov games ([`game`]) with beliefs
//! over the robot objective ([`belief`]), four robot planning formulations
//! ([`solvers`]), the plate-carrying example ([`plate`]), the linear-quadratic
//! table-pushing game ([`lq`]) and a cart-pole environment ([`cartpole`]).
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which the command-line tools use.

// Negated comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod belief;
pub mod cartpole;
pub mod error;
pub mod game;
pub mod lq;
pub mod plate;
pub mod scalar;
pub mod solvers;
pub mod trace;

pub use belief::{linspace, Belief, ParamDistribution};
pub use error::{Error, Result};
pub use game::{all_plans, cumulative_reward, rollout, Agent, MarkovGame};
pub use plate::{build_plate_game, reproduce_table1, PlateGame, PlateGameSpec, Table1Options, Table1Row};
pub use scalar::Scalar;
pub use solvers::{
    predict_trusting_human, solve_bayesian, solve_nash, solve_optimistic, solve_trusting_mdp, trusting_transition,
    AugmentedState, EquilibriumSelection, StrategyProfile, TrustingPolicy,
};
pub use trace::{SimTrace, TraceStep};

pub type Belief64 = Belief<f64>;
pub type Belief32 = Belief<f32>;
pub type ParamDistribution64 = ParamDistribution<f64>;
pub type PlateGame64 = PlateGame<f64>;
pub type PlateGameSpec64 = PlateGameSpec<f64>;
pub type StrategyProfile64 = StrategyProfile<f64>;
pub type SimTrace64 = SimTrace<f64>;
pub type LqParams64 = lq::LqParams<f64>;
pub type CartPoleState64 = cartpole::CartPoleState<f64>;
