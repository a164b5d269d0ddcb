//! Step-by-step simulation records.

use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::game::MarkovGame;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep<T> {
    pub t: usize,
    /// State before the step.
    pub state: Vec<T>,
    pub robot_action: T,
    pub human_action: T,
    pub robot_reward: T,
    pub human_reward: T,
    /// Human's point estimate of the robot objective before the step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub belief: Option<Belief<T>>,
    /// The robot action was unexplained by every candidate objective.
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub off_path: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace<T> {
    pub steps: Vec<TraceStep<T>>,
    pub final_state: Vec<T>,
    pub terminal_robot: T,
    pub terminal_human: T,
    pub total_robot: T,
    pub total_human: T,
}

impl<T: Scalar> SimTrace<T> {
    /// Closes a trace: totals are the step rewards plus the terminal rewards.
    pub fn finish(steps: Vec<TraceStep<T>>, final_state: Vec<T>, terminal_robot: T, terminal_human: T) -> Self {
        let total_robot = steps.iter().map(|s| s.robot_reward).sum::<T>() + terminal_robot;
        let total_human = steps.iter().map(|s| s.human_reward).sum::<T>() + terminal_human;
        Self { steps, final_state, terminal_robot, terminal_human, total_robot, total_human }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn robot_actions(&self) -> Vec<T> {
        self.steps.iter().map(|s| s.robot_action).collect()
    }

    pub fn human_actions(&self) -> Vec<T> {
        self.steps.iter().map(|s| s.human_action).collect()
    }

    /// Checks the trace length and that totals match the recorded rewards.
    pub fn check(&self, horizon: usize) -> Result<()> {
        if self.steps.len() != horizon {
            return Err(Error::Contract(format!("trace has {} steps, expected {horizon}", self.steps.len())));
        }
        let again = Self::finish(self.steps.clone(), self.final_state.clone(), self.terminal_robot, self.terminal_human);
        if again.total_robot != self.total_robot || again.total_human != self.total_human {
            return Err(Error::Contract("trace totals differ from the recorded rewards".into()));
        }
        Ok(())
    }
}

/// Trace of a joint plan in a discrete game. `beliefs`, when given, holds the
/// human belief before each step; `off_path` flags steps with unexplained
/// robot actions.
pub fn trace_plans<T: Scalar, G: MarkovGame<T> + ?Sized>(
    game: &G,
    robot_plan: &[usize],
    human_plan: &[usize],
    theta_r: T,
    theta_h: T,
    beliefs: Option<&[Belief<T>]>,
    off_path: Option<&[bool]>,
) -> Result<SimTrace<T>> {
    crate::game::rollout(game, game.initial_state(), robot_plan, human_plan)?;
    let mut x = game.initial_state();
    let mut steps = Vec::with_capacity(robot_plan.len());
    for (t, (&ur, &uh)) in robot_plan.iter().zip(human_plan).enumerate() {
        let belief = beliefs.and_then(|b| b.get(t)).cloned();
        steps.push(TraceStep {
            t,
            state: game.state_value(x),
            robot_action: game.robot_action_value(ur),
            human_action: game.human_action_value(uh),
            robot_reward: game.robot_reward(x, ur, uh, theta_r),
            human_reward: game.human_reward(x, ur, uh, theta_h),
            estimate: belief.as_ref().map(Belief::mean),
            belief,
            off_path: off_path.and_then(|f| f.get(t)).copied().unwrap_or(false),
        });
        x = game.step(x, ur, uh);
    }
    let terminal = game.terminal_reward(x);
    Ok(SimTrace::finish(steps, game.state_value(x), terminal, terminal))
}
