//! Bayesian equilibrium over a grid of robot types.
//!
//! Every robot type (a candidate objective in the prior's support) commits to
//! an open-loop plan. The human observes the robot's past actions, updates
//! the prior by Bayes' rule on the type-contingent plans, and best-responds in
//! expectation at every robot history. Equilibria are found by iterated best
//! response, started from two initial robot strategies; the fixed point the
//! human prefers ex ante is returned.
//!
//! Cost is `|U_R|^H` plan evaluations per type per iteration plus one human
//! decision per robot history, so only small games are practical.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::nash::{solve_nash_policy, StrategyProfile};
use super::selection::{argmax_by, EquilibriumSelection};
use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::game::{all_plans, MarkovGame};
use crate::scalar::{strictly_greater, ties, Scalar};

/// Iterations allowed per starting point before giving up.
pub const MAX_ITERATIONS: usize = 100;

/// How the iteration that produced an equilibrium was started.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BayesianStart {
    /// Every type plays its full-information equilibrium plan.
    Nash,
    /// Every type best-responds to a human who never updates the prior.
    NonUpdatingHuman,
}

/// Human strategy: one action per robot history, for every history up to
/// length `H - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct HumanStrategy {
    actions: HashMap<Vec<usize>, usize>,
}

impl HumanStrategy {
    pub fn action(&self, robot_history: &[usize]) -> Option<usize> {
        self.actions.get(robot_history).copied()
    }

    /// Human plan induced by a robot plan.
    pub fn respond(&self, robot_plan: &[usize]) -> Vec<usize> {
        (0..robot_plan.len()).map(|t| self.actions[&robot_plan[..t]]).collect()
    }
}

#[derive(Debug, Clone)]
pub struct BayesianSolution<T> {
    prior: Belief<T>,
    /// Plan per support point; types with zero prior weight best-respond too.
    pub robot_plans: Vec<Vec<usize>>,
    pub human: HumanStrategy,
    /// Prior-expected human reward.
    pub human_welfare: T,
    pub start: BayesianStart,
    pub iterations: usize,
}

impl<T: Scalar> BayesianSolution<T> {
    pub fn prior(&self) -> &Belief<T> {
        &self.prior
    }

    /// Human belief after observing `robot_history`. Histories no type
    /// explains leave the belief where it was before the unexplained action.
    pub fn posterior(&self, robot_history: &[usize]) -> Result<Belief<T>> {
        posterior(&self.prior, &self.robot_plans, robot_history)
    }

    /// Play when the robot's true objective is `theta_r`: the plan of the
    /// matching support point, or the best response to the human strategy
    /// if `theta_r` is off the grid.
    pub fn profile_for<G: MarkovGame<T> + ?Sized>(
        &self,
        game: &G,
        theta_r: T,
        theta_h: T,
        sel: &EquilibriumSelection,
    ) -> Result<StrategyProfile<T>> {
        let robot = match self.prior.support().iter().position(|&s| ties(s, theta_r)) {
            Some(i) => self.robot_plans[i].clone(),
            None => robot_best_response_to(game, &self.human, theta_r, None, sel)?.0,
        };
        let human = self.human.respond(&robot);
        StrategyProfile::evaluate(game, robot, human, theta_r, theta_h)
    }

    /// Support points whose plan starts with `robot_history`.
    pub fn types_playing(&self, robot_history: &[usize]) -> Vec<T> {
        self.prior
            .support()
            .iter()
            .zip(&self.robot_plans)
            .filter(|(_, plan)| plan.starts_with(robot_history))
            .map(|(&theta, _)| theta)
            .collect()
    }
}

fn posterior<T: Scalar>(prior: &Belief<T>, plans: &[Vec<usize>], history: &[usize]) -> Result<Belief<T>> {
    let mut belief = prior.clone();
    for t in 0..history.len() {
        match belief.posterior_update_indexed(|i| if plans[i][..=t] == history[..=t] { T::one() } else { T::zero() }) {
            Ok(b) => belief = b,
            Err(Error::InconsistentObservation) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(belief)
}

/// Human best response to type-contingent robot plans, at every robot
/// history. Beliefs along each history come from `belief_at`.
struct HumanBestResponse<'a, T: Scalar, G: MarkovGame<T> + ?Sized, B> {
    game: &'a G,
    plans: &'a [Vec<usize>],
    theta_h: T,
    sel: &'a EquilibriumSelection,
    belief_at: B,
    /// Value and decision per (robot history, state).
    memo: HashMap<(Vec<usize>, usize), (T, usize)>,
}

impl<T, G, B> HumanBestResponse<'_, T, G, B>
where
    T: Scalar,
    G: MarkovGame<T> + ?Sized,
    B: Fn(&[usize]) -> Result<Belief<T>>,
{
    /// Expected human reward-to-go and decision at `history` in `state`.
    fn solve(&mut self, history: &mut Vec<usize>, state: usize) -> Result<(T, usize)> {
        let t = history.len();
        if t == self.game.horizon() {
            return Ok((self.game.terminal_reward(state), 0));
        }
        if let Some(&hit) = self.memo.get(&(history.clone(), state)) {
            return Ok(hit);
        }
        let belief = (self.belief_at)(history)?;
        let mut next_action = vec![T::zero(); self.game.num_robot_actions()];
        for i in belief.active() {
            next_action[self.plans[i][t]] += belief.weights()[i];
        }
        let mut options = Vec::with_capacity(self.game.num_human_actions());
        for uh in 0..self.game.num_human_actions() {
            let mut v = T::zero();
            for (ur, &p) in next_action.iter().enumerate() {
                if !(p > T::zero()) {
                    continue;
                }
                history.push(ur);
                let (cont, _) = self.solve(history, self.game.step(state, ur, uh))?;
                history.pop();
                v += p * (self.game.human_reward(state, ur, uh, self.theta_h) + cont);
            }
            options.push((uh, v));
        }
        let (uh, v) = argmax_by(options, |a, b| self.sel.compare_human_actions(a, b))
            .ok_or_else(|| Error::Contract("human has no actions".into()))?;
        self.memo.insert((history.clone(), state), (v, uh));
        Ok((v, uh))
    }

    /// Records the decision at every robot history, in the state the human's
    /// own earlier decisions lead to.
    fn fill(&mut self, history: &mut Vec<usize>, state: usize, out: &mut HashMap<Vec<usize>, usize>) -> Result<T> {
        let (v, uh) = self.solve(history, state)?;
        out.insert(history.clone(), uh);
        if history.len() + 1 < self.game.horizon() {
            for ur in 0..self.game.num_robot_actions() {
                history.push(ur);
                self.fill(history, self.game.step(state, ur, uh), out)?;
                history.pop();
            }
        }
        Ok(v)
    }
}

/// Human strategy best-responding to `plans` and its prior-expected reward.
/// A non-updating human keeps the prior at every history.
fn human_best_response<T: Scalar, G: MarkovGame<T> + ?Sized>(
    game: &G,
    prior: &Belief<T>,
    plans: &[Vec<usize>],
    theta_h: T,
    sel: &EquilibriumSelection,
    updating: bool,
) -> Result<(HumanStrategy, T)> {
    let belief_at = |h: &[usize]| if updating { posterior(prior, plans, h) } else { Ok(prior.clone()) };
    let mut br = HumanBestResponse { game, plans, theta_h, sel, belief_at, memo: HashMap::new() };
    let mut actions = HashMap::new();
    let value = br.fill(&mut Vec::new(), game.initial_state(), &mut actions)?;
    Ok((HumanStrategy { actions }, value))
}

/// Robot reward of `plan` against the human strategy.
fn robot_value<T: Scalar, G: MarkovGame<T> + ?Sized>(game: &G, human: &HumanStrategy, plan: &[usize], theta_r: T) -> T {
    let mut x = game.initial_state();
    let mut total = T::zero();
    for t in 0..plan.len() {
        let uh = human.actions[&plan[..t]];
        total += game.robot_reward(x, plan[t], uh, theta_r);
        x = game.step(x, plan[t], uh);
    }
    total + game.terminal_reward(x)
}

/// Best plan for objective `theta_r`. A `current` plan that ties the best
/// value is kept.
fn robot_best_response_to<T: Scalar, G: MarkovGame<T> + ?Sized>(
    game: &G,
    human: &HumanStrategy,
    theta_r: T,
    current: Option<&[usize]>,
    sel: &EquilibriumSelection,
) -> Result<(Vec<usize>, T)> {
    let mut best: Option<(Vec<usize>, T)> = None;
    for plan in all_plans(game.num_robot_actions(), game.horizon()) {
        let v = robot_value(game, human, &plan, theta_r);
        best = match best {
            None => Some((plan, v)),
            Some((b, bv)) => {
                if strictly_greater(v, bv) || (ties(v, bv) && sel.compare_robot_plans(&plan, &b).is_lt()) {
                    Some((plan, v))
                } else {
                    Some((b, bv))
                }
            }
        };
    }
    let (plan, v) = best.ok_or_else(|| Error::Contract("robot has no plans".into()))?;
    if let Some(cur) = current {
        let cv = robot_value(game, human, cur, theta_r);
        if ties(cv, v) {
            return Ok((cur.to_vec(), cv));
        }
    }
    Ok((plan, v))
}

/// Iterates best responses from `plans` until no type changes its plan.
fn iterate<T: Scalar, G: MarkovGame<T> + ?Sized>(
    game: &G,
    theta_h: T,
    prior: &Belief<T>,
    sel: &EquilibriumSelection,
    mut plans: Vec<Vec<usize>>,
    start: BayesianStart,
) -> Result<BayesianSolution<T>> {
    let mut seen: Vec<Vec<Vec<usize>>> = Vec::new();
    for iteration in 1..=MAX_ITERATIONS {
        let (human, welfare) = human_best_response(game, prior, &plans, theta_h, sel, true)?;
        let next = prior
            .support()
            .iter()
            .zip(&plans)
            .map(|(&theta, cur)| robot_best_response_to(game, &human, theta, Some(cur), sel).map(|(p, _)| p))
            .collect::<Result<Vec<_>>>()?;
        if next == plans {
            let solution = BayesianSolution { prior: prior.clone(), robot_plans: plans, human, human_welfare: welfare, start, iterations: iteration };
            verify(game, theta_h, &solution, sel)?;
            return Ok(solution);
        }
        if seen.contains(&next) {
            return Err(Error::NoBayesianEquilibrium(format!(
                "best responses from the {start:?} start cycle after {iteration} iterations"
            )));
        }
        seen.push(std::mem::replace(&mut plans, next));
    }
    Err(Error::NoBayesianEquilibrium(format!("no fixed point from the {start:?} start within {MAX_ITERATIONS} iterations")))
}

/// Checks both equilibrium conditions independently of the iteration.
fn verify<T: Scalar, G: MarkovGame<T> + ?Sized>(
    game: &G,
    theta_h: T,
    solution: &BayesianSolution<T>,
    sel: &EquilibriumSelection,
) -> Result<()> {
    for (&theta, plan) in solution.prior.support().iter().zip(&solution.robot_plans) {
        let own = robot_value(game, &solution.human, plan, theta);
        for alt in all_plans(game.num_robot_actions(), game.horizon()) {
            if strictly_greater(robot_value(game, &solution.human, &alt, theta), own) {
                return Err(Error::NoBayesianEquilibrium(format!("type {theta} gains by deviating to {alt:?}")));
            }
        }
    }
    let (_, welfare) = human_best_response(game, &solution.prior, &solution.robot_plans, theta_h, sel, true)?;
    if !ties(welfare, solution.human_welfare) {
        return Err(Error::NoBayesianEquilibrium("human strategy is not a best response".into()));
    }
    Ok(())
}

/// Bayesian equilibrium for the human objective `theta_h` and the prior over
/// robot types.
///
/// Two iterations are run: one started from every type's full-information
/// plan and one from every type's best response to a human who keeps the
/// prior. Among the fixed points reached, the one with the higher
/// prior-expected human reward is returned (the first start on ties). Fails
/// if neither start converges.
pub fn solve_bayesian<T: Scalar, G: MarkovGame<T> + ?Sized>(
    game: &G,
    theta_h: T,
    prior: &Belief<T>,
    sel: &EquilibriumSelection,
) -> Result<BayesianSolution<T>> {
    let nash_plans = prior
        .support()
        .iter()
        .map(|&theta| {
            let policy = solve_nash_policy(game, theta, theta_h, sel)?;
            Ok(policy.plans_from(game, 0, game.initial_state())?.0)
        })
        .collect::<Result<Vec<_>>>()?;

    let (naive, _) = human_best_response(game, prior, &nash_plans, theta_h, sel, false)?;
    let naive_plans = prior
        .support()
        .iter()
        .zip(&nash_plans)
        .map(|(&theta, cur)| robot_best_response_to(game, &naive, theta, Some(cur), sel).map(|(p, _)| p))
        .collect::<Result<Vec<_>>>()?;

    let a = iterate(game, theta_h, prior, sel, nash_plans, BayesianStart::Nash);
    let b = iterate(game, theta_h, prior, sel, naive_plans, BayesianStart::NonUpdatingHuman);
    match (a, b) {
        (Ok(a), Ok(b)) => Ok(if strictly_greater(b.human_welfare, a.human_welfare) { b } else { a }),
        (Ok(a), Err(_)) => Ok(a),
        (Err(_), Ok(b)) => Ok(b),
        (Err(ea), Err(eb)) => Err(Error::NoBayesianEquilibrium(format!("{ea}; {eb}"))),
    }
}
