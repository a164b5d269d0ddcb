//! Finite two-player Markov games between a robot and a human.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which player a reward is computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agent {
    Robot,
    Human,
}

/// Finite-horizon game with deterministic dynamics.
///
/// States and actions are indices: states in `0..num_states()`, robot
/// actions in `0..num_robot_actions()`, human actions in
/// `0..num_human_actions()`. The reward parameters `theta` are passed per
/// call so the same game can be evaluated for every candidate objective.
/// The terminal reward is shared by both players.
pub trait MarkovGame<T: Scalar>: Sync {
    fn num_states(&self) -> usize;
    fn num_robot_actions(&self) -> usize;
    fn num_human_actions(&self) -> usize;
    /// Number of decision steps before the terminal reward.
    fn horizon(&self) -> usize;
    fn initial_state(&self) -> usize;

    fn step(&self, state: usize, robot: usize, human: usize) -> usize;
    fn robot_reward(&self, state: usize, robot: usize, human: usize, theta_r: T) -> T;
    fn human_reward(&self, state: usize, robot: usize, human: usize, theta_h: T) -> T;
    fn terminal_reward(&self, state: usize) -> T;

    /// Physical value of a robot action (e.g. number of plates carried).
    fn robot_action_value(&self, robot: usize) -> T {
        T::from_count(robot)
    }

    fn human_action_value(&self, human: usize) -> T {
        T::from_count(human)
    }

    /// Numeric description of a state for traces.
    fn state_value(&self, state: usize) -> Vec<T> {
        vec![T::from_count(state)]
    }

    /// Stage reward for either player.
    fn reward(&self, agent: Agent, state: usize, robot: usize, human: usize, theta: T) -> T {
        match agent {
            Agent::Robot => self.robot_reward(state, robot, human, theta),
            Agent::Human => self.human_reward(state, robot, human, theta),
        }
    }
}

/// States visited by the joint plan, `x^0 ..= x^H`.
pub fn rollout<T: Scalar, G: MarkovGame<T> + ?Sized>(
    game: &G,
    x0: usize,
    robot_plan: &[usize],
    human_plan: &[usize],
) -> Result<Vec<usize>> {
    check_plans(game, robot_plan, human_plan)?;
    let mut states = Vec::with_capacity(robot_plan.len() + 1);
    let mut x = x0;
    states.push(x);
    for (&ur, &uh) in robot_plan.iter().zip(human_plan) {
        x = game.step(x, ur, uh);
        states.push(x);
    }
    Ok(states)
}

/// Sum of one player's stage rewards along the joint plan plus the terminal
/// reward of the final state.
pub fn cumulative_reward<T: Scalar, G: MarkovGame<T> + ?Sized>(
    game: &G,
    x0: usize,
    robot_plan: &[usize],
    human_plan: &[usize],
    theta: T,
    agent: Agent,
) -> Result<T> {
    check_plans(game, robot_plan, human_plan)?;
    Ok(partial_reward(game, x0, robot_plan, human_plan, theta, agent, true).0)
}

/// Reward accumulated over a plan segment starting at `x0`, with the terminal
/// reward included only when asked. Returns the reward and the final state.
pub(crate) fn partial_reward<T: Scalar, G: MarkovGame<T> + ?Sized>(
    game: &G,
    x0: usize,
    robot_plan: &[usize],
    human_plan: &[usize],
    theta: T,
    agent: Agent,
    with_terminal: bool,
) -> (T, usize) {
    let mut x = x0;
    let mut total = T::zero();
    for (&ur, &uh) in robot_plan.iter().zip(human_plan) {
        total += game.reward(agent, x, ur, uh, theta);
        x = game.step(x, ur, uh);
    }
    if with_terminal {
        total += game.terminal_reward(x);
    }
    (total, x)
}

fn check_plans<T: Scalar, G: MarkovGame<T> + ?Sized>(game: &G, robot: &[usize], human: &[usize]) -> Result<()> {
    let h = game.horizon();
    if robot.len() != h || human.len() != h {
        return Err(Error::Contract(format!(
            "plans must have length {h} (robot {}, human {})",
            robot.len(),
            human.len()
        )));
    }
    if let Some(a) = robot.iter().find(|&&a| a >= game.num_robot_actions()) {
        return Err(Error::Contract(format!("robot action {a} out of range")));
    }
    if let Some(a) = human.iter().find(|&&a| a >= game.num_human_actions()) {
        return Err(Error::Contract(format!("human action {a} out of range")));
    }
    Ok(())
}

/// Every action sequence of length `len` over `num_actions` actions, in
/// lexicographic order.
pub fn all_plans(num_actions: usize, len: usize) -> Vec<Vec<usize>> {
    let count = num_actions.pow(len as u32);
    (0..count)
        .map(|mut code| {
            let mut plan = vec![0; len];
            for slot in plan.iter_mut().rev() {
                *slot = code % num_actions;
                code /= num_actions;
            }
            plan
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two-step counter game with zero stage rewards.
    struct Zero;

    impl MarkovGame<f64> for Zero {
        fn num_states(&self) -> usize {
            5
        }
        fn num_robot_actions(&self) -> usize {
            2
        }
        fn num_human_actions(&self) -> usize {
            2
        }
        fn horizon(&self) -> usize {
            2
        }
        fn initial_state(&self) -> usize {
            0
        }
        fn step(&self, x: usize, r: usize, h: usize) -> usize {
            x + r + h
        }
        fn robot_reward(&self, _: usize, _: usize, _: usize, _: f64) -> f64 {
            0.0
        }
        fn human_reward(&self, _: usize, _: usize, _: usize, _: f64) -> f64 {
            0.0
        }
        fn terminal_reward(&self, _: usize) -> f64 {
            0.0
        }
    }

    #[test]
    fn zero_rewards_sum_to_zero() {
        let r = cumulative_reward(&Zero, 0, &[1, 0], &[0, 1], 1.0, Agent::Robot).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn length_mismatch_is_contract_violation() {
        let r = cumulative_reward(&Zero, 0, &[1], &[0, 1], 1.0, Agent::Robot);
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn rollout_visits_each_state() {
        assert_eq!(rollout(&Zero, 0, &[1, 1], &[1, 0]).unwrap(), vec![0, 2, 3]);
    }

    #[test]
    fn plan_enumeration_is_lexicographic() {
        let plans = all_plans(3, 2);
        assert_eq!(plans.len(), 9);
        assert_eq!(plans[0], vec![0, 0]);
        assert_eq!(plans[5], vec![1, 2]);
        assert_eq!(plans[8], vec![2, 2]);
        assert_eq!(all_plans(3, 0), vec![Vec::<usize>::new()]);
    }
}
