//! Plate-carrying game: both agents want plates on the table but each pays
//! a quadratic effort cost for the plates it carries itself.

use serde::{Deserialize, Serialize};

use crate::belief::{linspace, ParamDistribution};
use crate::error::{Error, Result};
use crate::game::MarkovGame;
use crate::scalar::Scalar;
use crate::solvers::{solve_bayesian, solve_nash, solve_optimistic, solve_trusting_mdp, EquilibriumSelection, StrategyProfile};

/// Parameters of the plate game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateGameSpec<T> {
    /// Robot cost per squared plate carried.
    pub theta_r: T,
    /// Human cost per squared plate carried.
    pub theta_h: T,
    /// Penalty on carrying simultaneously, charged to both agents.
    pub alpha: T,
    /// Carrying steps before the plates are counted.
    pub horizon: usize,
}

impl<T: Scalar> PlateGameSpec<T> {
    /// Robot and human costs `0.2` / `0.25`, prohibitive simultaneous-carry
    /// penalty and two steps.
    pub fn standard() -> Self {
        Self { theta_r: T::lit(0.2), theta_h: T::lit(0.25), alpha: T::lit(1e6), horizon: 2 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_r > T::zero() && self.theta_h > T::zero() && self.alpha > T::zero()) || self.horizon == 0 {
            return Err(Error::Config(format!("invalid plate game: {self:?}")));
        }
        Ok(())
    }
}

/// Plate game instance. States are plate counts `0..=4H`; both agents
/// choose to carry 0, 1 or 2 plates per step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateGame<T> {
    alpha: T,
    horizon: usize,
}

pub const PLATE_ACTIONS: usize = 3;

/// Builds the game described by `spec`. The spec's objectives are not baked
/// in: every solver passes the objectives it reasons about explicitly.
pub fn build_plate_game<T: Scalar>(spec: &PlateGameSpec<T>) -> Result<PlateGame<T>> {
    spec.validate()?;
    Ok(PlateGame { alpha: spec.alpha, horizon: spec.horizon })
}

impl<T: Scalar> PlateGame<T> {
    pub fn alpha(&self) -> T {
        self.alpha
    }

    fn stage(&self, own: usize, other: usize, theta: T) -> T {
        let (own, other) = (T::from_count(own), T::from_count(other));
        -theta * own * own - self.alpha * own * other
    }
}

impl<T: Scalar> MarkovGame<T> for PlateGame<T> {
    fn num_states(&self) -> usize {
        2 * (PLATE_ACTIONS - 1) * self.horizon + 1
    }
    fn num_robot_actions(&self) -> usize {
        PLATE_ACTIONS
    }
    fn num_human_actions(&self) -> usize {
        PLATE_ACTIONS
    }
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn initial_state(&self) -> usize {
        0
    }
    fn step(&self, plates: usize, robot: usize, human: usize) -> usize {
        plates + robot + human
    }
    fn robot_reward(&self, _plates: usize, robot: usize, human: usize, theta_r: T) -> T {
        self.stage(robot, human, theta_r)
    }
    fn human_reward(&self, _plates: usize, robot: usize, human: usize, theta_h: T) -> T {
        self.stage(human, robot, theta_h)
    }
    fn terminal_reward(&self, plates: usize) -> T {
        T::from_count(plates)
    }
}

/// Settings for the six-formulation comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Options<T> {
    pub spec: PlateGameSpec<T>,
    /// Grid size for both priors and for the optimistic search.
    pub grid: usize,
    pub lo: T,
    pub hi: T,
    /// Boltzmann prior temperature.
    pub boltzmann_a: T,
    pub selection: EquilibriumSelection,
}

impl<T: Scalar> Default for Table1Options<T> {
    fn default() -> Self {
        Self {
            spec: PlateGameSpec::standard(),
            grid: 301,
            lo: T::zero(),
            hi: T::lit(1.5),
            boltzmann_a: T::lit(0.1),
            selection: EquilibriumSelection::robot_leads(),
        }
    }
}

/// One formulation's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row<T> {
    pub formulation: String,
    pub distribution: String,
    pub robot_actions: Vec<usize>,
    pub human_actions: Vec<usize>,
    /// Human's final estimate of the robot objective.
    pub estimate: T,
    /// How the estimate is displayed (`"> 1"` for the optimistic pick).
    pub estimate_label: String,
    pub value_robot: T,
    pub value_human: T,
}

impl<T: Scalar> Table1Row<T> {
    fn new(formulation: &str, distribution: &str, profile: StrategyProfile<T>, estimate: T, label: Option<String>) -> Self {
        Self {
            formulation: formulation.into(),
            distribution: distribution.into(),
            estimate_label: label.unwrap_or_else(|| format!("{:.2}", estimate.as_f64())),
            robot_actions: profile.robot_plan,
            human_actions: profile.human_plan,
            estimate,
            value_robot: profile.value_robot,
            value_human: profile.value_human,
        }
    }
}

/// Runs Nash, Optimistic, Bayesian and Trusting planning on the plate game,
/// the last two under a uniform and a Boltzmann prior.
pub fn reproduce_table1<T: Scalar>(opts: &Table1Options<T>) -> Result<Vec<Table1Row<T>>> {
    let game = build_plate_game(&opts.spec)?;
    let (theta_r, theta_h, sel) = (opts.spec.theta_r, opts.spec.theta_h, &opts.selection);
    let priors = [
        ("uniform", ParamDistribution::Uniform { lo: opts.lo, hi: opts.hi }.discretize(opts.grid)?),
        ("boltzmann", ParamDistribution::Boltzmann { a: opts.boltzmann_a, lo: opts.lo, hi: opts.hi }.discretize(opts.grid)?),
    ];
    let mut rows = Vec::with_capacity(6);

    let nash = solve_nash(&game, theta_r, theta_h, sel)?;
    rows.push(Table1Row::new("nash", "known", nash, theta_r, None));

    let grid: Vec<T> = linspace((opts.lo, opts.hi), opts.grid).into_iter().filter(|&t| t > T::zero()).collect();
    let opt = solve_optimistic(&game, theta_r, theta_h, &grid, sel)?;
    let label = if opt.theta_tilde > T::one() { "> 1".to_string() } else { format!("{:.2}", opt.theta_tilde.as_f64()) };
    rows.push(Table1Row::new("optimistic", "any", opt.profile, opt.theta_tilde, Some(label)));

    for (name, prior) in &priors {
        let eq = solve_bayesian(&game, theta_h, prior, sel)?;
        let profile = eq.profile_for(&game, theta_r, theta_h, sel)?;
        let estimate = eq.posterior(&profile.robot_plan)?.mean();
        rows.push(Table1Row::new("bayesian", name, profile, estimate, None));
    }
    for (name, prior) in &priors {
        let sol = solve_trusting_mdp(&game, theta_r, theta_h, prior, sel)?;
        let estimate = sol.beliefs.last().expect("belief path is nonempty").mean();
        rows.push(Table1Row::new("trusting", name, sol.profile, estimate, None));
    }
    Ok(rows)
}
