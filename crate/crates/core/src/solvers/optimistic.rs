//! Optimistic planning: the robot assumes it can make the human believe any
//! objective and picks the one whose induced human behavior pays best.

use serde::{Deserialize, Serialize};

use super::nash::{robot_best_response, solve_nash, StrategyProfile};
use super::selection::EquilibriumSelection;
use crate::error::{Error, Result};
use crate::game::MarkovGame;
use crate::scalar::{strictly_greater, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimisticSolution<T> {
    /// Objective the robot pretends to have.
    pub theta_tilde: T,
    pub profile: StrategyProfile<T>,
}

/// For every candidate `theta_tilde` the human plays its equilibrium plan for
/// `(theta_tilde, theta_h)` and the robot best-responds under its true
/// `theta_r`. Returns the candidate with the highest robot reward; ties go to
/// the smaller candidate.
pub fn solve_optimistic<T: Scalar, G: MarkovGame<T> + ?Sized>(
    game: &G,
    theta_r: T,
    theta_h: T,
    theta_grid: &[T],
    sel: &EquilibriumSelection,
) -> Result<OptimisticSolution<T>> {
    if theta_grid.is_empty() {
        return Err(Error::Contract("optimistic search needs a nonempty grid".into()));
    }
    let mut grid = theta_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));

    let mut best: Option<OptimisticSolution<T>> = None;
    for theta_tilde in grid {
        let human = solve_nash(game, theta_tilde, theta_h, sel)?.human_plan;
        let robot = robot_best_response(game, &human, theta_r, sel)?;
        let profile = StrategyProfile::evaluate(game, robot, human, theta_r, theta_h)?;
        let better = match &best {
            None => true,
            Some(b) => strictly_greater(profile.value_robot, b.profile.value_robot),
        };
        if better {
            best = Some(OptimisticSolution { theta_tilde, profile });
        }
    }
    Ok(best.expect("grid is nonempty"))
}
