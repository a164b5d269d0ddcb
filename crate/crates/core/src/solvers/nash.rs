//! Full-information equilibrium by backward induction.

use serde::{Deserialize, Serialize};

use super::selection::{EquilibriumSelection, StageCandidate};
use crate::error::{Error, Result};
use crate::game::{cumulative_reward, Agent, MarkovGame};
use crate::scalar::{strictly_greater, Scalar};

/// Open-loop plans for both players and the rewards they earn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile<T> {
    pub robot_plan: Vec<usize>,
    pub human_plan: Vec<usize>,
    pub value_robot: T,
    pub value_human: T,
}

impl<T: Scalar> StrategyProfile<T> {
    /// Evaluates both plans from the game's initial state.
    pub fn evaluate<G: MarkovGame<T> + ?Sized>(
        game: &G,
        robot_plan: Vec<usize>,
        human_plan: Vec<usize>,
        theta_r: T,
        theta_h: T,
    ) -> Result<Self> {
        let x0 = game.initial_state();
        let value_robot = cumulative_reward(game, x0, &robot_plan, &human_plan, theta_r, Agent::Robot)?;
        let value_human = cumulative_reward(game, x0, &robot_plan, &human_plan, theta_h, Agent::Human)?;
        Ok(Self { robot_plan, human_plan, value_robot, value_human })
    }
}

/// Subgame-perfect feedback policy from backward induction.
///
/// Tables are indexed `[step][state]`; entries for states that cannot be
/// reached from the initial state at that step are `None`.
#[derive(Debug, Clone)]
pub struct NashPolicy<T> {
    robot: Vec<Vec<Option<usize>>>,
    human: Vec<Vec<Option<usize>>>,
    value_robot: Vec<Vec<T>>,
    value_human: Vec<Vec<T>>,
    horizon: usize,
}

impl<T: Scalar> NashPolicy<T> {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Joint action played at `(step, state)`.
    pub fn action(&self, step: usize, state: usize) -> Option<(usize, usize)> {
        Some((self.robot.get(step)?.get(state).copied()??, self.human[step][state]?))
    }

    pub fn robot_action(&self, step: usize, state: usize) -> Option<usize> {
        self.robot.get(step)?.get(state).copied()?
    }

    /// Continuation values `(robot, human)` at `(step, state)`.
    pub fn values(&self, step: usize, state: usize) -> (T, T) {
        (self.value_robot[step][state], self.value_human[step][state])
    }

    /// Equilibrium plans for the remaining steps when play reaches `state` at
    /// `step`. Fails if the policy was never solved there.
    pub fn plans_from<G: MarkovGame<T> + ?Sized>(
        &self,
        game: &G,
        step: usize,
        state: usize,
    ) -> Result<(Vec<usize>, Vec<usize>)> {
        let mut robot = Vec::with_capacity(self.horizon - step);
        let mut human = Vec::with_capacity(self.horizon - step);
        let mut x = state;
        for t in step..self.horizon {
            let (ur, uh) = self.action(t, x).ok_or(Error::NoPureEquilibrium { stage: t, state: x })?;
            robot.push(ur);
            human.push(uh);
            x = game.step(x, ur, uh);
        }
        Ok((robot, human))
    }
}

/// States reachable at each step `0..=H` under any joint actions.
pub(crate) fn reachable_states<T: Scalar, G: MarkovGame<T> + ?Sized>(game: &G) -> Vec<Vec<bool>> {
    let n = game.num_states();
    let mut reach = vec![vec![false; n]; game.horizon() + 1];
    reach[0][game.initial_state()] = true;
    for t in 0..game.horizon() {
        for x in 0..n {
            if !reach[t][x] {
                continue;
            }
            for ur in 0..game.num_robot_actions() {
                for uh in 0..game.num_human_actions() {
                    reach[t + 1][game.step(x, ur, uh)] = true;
                }
            }
        }
    }
    reach
}

/// Backward induction over every reachable `(step, state)`.
///
/// Each stage game is built from immediate rewards plus continuation values;
/// the selected pure equilibrium of that stage game becomes the policy.
pub fn solve_nash_policy<T: Scalar, G: MarkovGame<T> + ?Sized>(
    game: &G,
    theta_r: T,
    theta_h: T,
    sel: &EquilibriumSelection,
) -> Result<NashPolicy<T>> {
    let (h, n) = (game.horizon(), game.num_states());
    if h == 0 {
        return Err(Error::Contract("horizon must be at least 1".into()));
    }
    let (nr, nh) = (game.num_robot_actions(), game.num_human_actions());
    let reach = reachable_states(game);

    let mut robot = vec![vec![None; n]; h];
    let mut human = vec![vec![None; n]; h];
    let mut value_robot = vec![vec![T::zero(); n]; h + 1];
    let mut value_human = vec![vec![T::zero(); n]; h + 1];
    // Shared terminal reward reached by the continuation play.
    let mut progress = vec![vec![T::zero(); n]; h + 1];
    for x in 0..n {
        if reach[h][x] {
            let terminal = game.terminal_reward(x);
            value_robot[h][x] = terminal;
            value_human[h][x] = terminal;
            progress[h][x] = terminal;
        }
    }

    let mut q_robot = vec![T::zero(); nr * nh];
    let mut q_human = vec![T::zero(); nr * nh];
    for t in (0..h).rev() {
        for x in (0..n).filter(|&x| reach[t][x]) {
            for ur in 0..nr {
                for uh in 0..nh {
                    let next = game.step(x, ur, uh);
                    q_robot[ur * nh + uh] = game.robot_reward(x, ur, uh, theta_r) + value_robot[t + 1][next];
                    q_human[ur * nh + uh] = game.human_reward(x, ur, uh, theta_h) + value_human[t + 1][next];
                }
            }
            let mut best: Option<StageCandidate<T>> = None;
            for ur in 0..nr {
                for uh in 0..nh {
                    let robot_br = (0..nr).all(|alt| !strictly_greater(q_robot[alt * nh + uh], q_robot[ur * nh + uh]));
                    let human_br = (0..nh).all(|alt| !strictly_greater(q_human[ur * nh + alt], q_human[ur * nh + uh]));
                    if !(robot_br && human_br) {
                        continue;
                    }
                    let cand = StageCandidate { robot: ur, human: uh, progress: progress[t + 1][game.step(x, ur, uh)] };
                    best = match best {
                        Some(b) if sel.compare_stage(t, &b, &cand).is_le() => Some(b),
                        _ => Some(cand),
                    };
                }
            }
            let chosen = best.ok_or(Error::NoPureEquilibrium { stage: t, state: x })?;
            let next = game.step(x, chosen.robot, chosen.human);
            robot[t][x] = Some(chosen.robot);
            human[t][x] = Some(chosen.human);
            value_robot[t][x] = q_robot[chosen.robot * nh + chosen.human];
            value_human[t][x] = q_human[chosen.robot * nh + chosen.human];
            progress[t][x] = progress[t + 1][next];
        }
    }
    Ok(NashPolicy { robot, human, value_robot, value_human, horizon: h })
}

/// Equilibrium plans from the initial state when both players know both
/// objectives.
pub fn solve_nash<T: Scalar, G: MarkovGame<T> + ?Sized>(
    game: &G,
    theta_r: T,
    theta_h: T,
    sel: &EquilibriumSelection,
) -> Result<StrategyProfile<T>> {
    let policy = solve_nash_policy(game, theta_r, theta_h, sel)?;
    let (robot, human) = policy.plans_from(game, 0, game.initial_state())?;
    StrategyProfile::evaluate(game, robot, human, theta_r, theta_h)
}

/// Robot's best open-loop plan against a fixed human plan, by dynamic
/// programming over states. Ties prefer larger robot actions.
pub fn robot_best_response<T: Scalar, G: MarkovGame<T> + ?Sized>(
    game: &G,
    human_plan: &[usize],
    theta_r: T,
    sel: &EquilibriumSelection,
) -> Result<Vec<usize>> {
    let (h, n) = (game.horizon(), game.num_states());
    if human_plan.len() != h {
        return Err(Error::Contract(format!("human plan must have length {h}")));
    }
    let reach = reachable_states(game);
    let mut value = vec![vec![T::zero(); n]; h + 1];
    let mut choice = vec![vec![0usize; n]; h];
    for x in (0..n).filter(|&x| reach[h][x]) {
        value[h][x] = game.terminal_reward(x);
    }
    for t in (0..h).rev() {
        let uh = human_plan[t];
        for x in (0..n).filter(|&x| reach[t][x]) {
            let q = (0..game.num_robot_actions())
                .map(|ur| (ur, game.robot_reward(x, ur, uh, theta_r) + value[t + 1][game.step(x, ur, uh)]));
            let (ur, v) = super::selection::argmax_by(q, |a, b| sel.compare_robot_actions(a, b))
                .ok_or_else(|| Error::Contract("robot has no actions".into()))?;
            value[t][x] = v;
            choice[t][x] = ur;
        }
    }
    let mut plan = Vec::with_capacity(h);
    let mut x = game.initial_state();
    for t in 0..h {
        let ur = choice[t][x];
        plan.push(ur);
        x = game.step(x, ur, human_plan[t]);
    }
    Ok(plan)
}
