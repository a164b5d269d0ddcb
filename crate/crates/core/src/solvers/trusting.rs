//! Planning against a trusting human.
//!
//! A trusting human learns the robot's objective from its actions while
//! assuming the robot plays the full-information equilibrium for whatever
//! objective it really has. Given the human's belief, the human's next
//! action is therefore predictable, and planning for the robot becomes a
//! single-agent MDP over augmented states `(state, theta_h, belief)`.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::nash::{solve_nash_policy, NashPolicy, StrategyProfile};
use super::selection::{argmax_by, EquilibriumSelection};
use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::game::MarkovGame;
use crate::scalar::Scalar;

/// MDP state: system state, the human's objective and the human's belief
/// over the robot's objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedState<T> {
    pub state: usize,
    pub theta_h: T,
    pub belief: Belief<T>,
}

/// Result of one augmented-state transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<T> {
    pub next: AugmentedState<T>,
    /// Action the trusting human took during the step.
    pub human_action: usize,
    /// The robot action matched no candidate objective's equilibrium play,
    /// so the belief was left unchanged.
    pub off_path: bool,
}

/// Which support points of the belief are still possible.
type Mask = Vec<bool>;

/// Equilibrium policies for every candidate robot objective in a belief's
/// support, with the predictions built from them.
pub struct TrustingModel<'g, T: Scalar, G: MarkovGame<T> + ?Sized> {
    game: &'g G,
    support: Vec<T>,
    theta_h: T,
    sel: EquilibriumSelection,
    policies: Vec<Arc<NashPolicy<T>>>,
    predictions: HashMap<(usize, usize, Vec<u64>), usize>,
}

impl<'g, T: Scalar, G: MarkovGame<T> + ?Sized> TrustingModel<'g, T, G> {
    /// Solves the full-information game for each candidate objective.
    pub fn new(game: &'g G, support: &[T], theta_h: T, sel: &EquilibriumSelection) -> Result<Self> {
        let policies = support
            .iter()
            .map(|&theta| solve_nash_policy(game, theta, theta_h, sel).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            game,
            support: support.to_vec(),
            theta_h,
            sel: sel.clone(),
            policies,
            predictions: HashMap::new(),
        })
    }

    pub fn support(&self) -> &[T] {
        &self.support
    }

    fn check(&self, s: &AugmentedState<T>, step: usize) -> Result<()> {
        if step >= self.game.horizon() {
            return Err(Error::Contract(format!("step {step} is past the horizon {}", self.game.horizon())));
        }
        if s.belief.support() != self.support.as_slice() {
            return Err(Error::Contract("belief support differs from the model's candidate objectives".into()));
        }
        if s.theta_h != self.theta_h {
            return Err(Error::Contract("augmented state has a different human objective".into()));
        }
        Ok(())
    }

    /// Robot equilibrium action at `(step, state)` for candidate `i`.
    fn conservative_action(&self, i: usize, step: usize, state: usize) -> Result<usize> {
        self.policies[i]
            .robot_action(step, state)
            .ok_or(Error::NoPureEquilibrium { stage: step, state })
    }

    /// The human's action at `step`: the first move of the plan maximizing
    /// expected reward against the equilibrium robot plans, weighted by the
    /// belief. Weights need not be normalized.
    pub fn predict_human(&mut self, s: &AugmentedState<T>, step: usize) -> Result<usize> {
        self.check(s, step)?;
        let key = (step, s.state, s.belief.weights().iter().map(|w| w.as_f64().to_bits()).collect::<Vec<_>>());
        if let Some(&action) = self.predictions.get(&key) {
            return Ok(action);
        }
        let action = self.predict_uncached(s.state, s.belief.weights(), step)?;
        self.predictions.insert(key, action);
        Ok(action)
    }

    fn predict_uncached(&self, state: usize, weights: &[T], step: usize) -> Result<usize> {
        // Candidates with identical equilibrium robot play are merged.
        let mut groups: Vec<(Vec<usize>, T)> = Vec::new();
        for (i, &w) in weights.iter().enumerate() {
            if !(w > T::zero()) {
                continue;
            }
            let (robot, _) = self.policies[i].plans_from(self.game, step, state)?;
            match groups.iter_mut().find(|(plan, _)| *plan == robot) {
                Some((_, total)) => *total += w,
                None => groups.push((robot, w)),
            }
        }
        if groups.is_empty() {
            return Err(Error::Contract("belief has no positive weight".into()));
        }
        let mut search = HumanPlanSearch { game: self.game, groups: &groups, step, theta_h: self.theta_h, sel: &self.sel, memo: HashMap::new() };
        let (_, action) = search.best(step, vec![state; groups.len()]);
        Ok(action)
    }

    /// Steps the augmented state: the trusting human acts, the system moves,
    /// and the belief keeps only objectives whose equilibrium robot action
    /// matches the one observed. If none matches, the belief is kept and the
    /// transition is flagged off-path.
    pub fn transition(&mut self, s: &AugmentedState<T>, robot_action: usize, step: usize) -> Result<Transition<T>> {
        self.check(s, step)?;
        if robot_action >= self.game.num_robot_actions() {
            return Err(Error::Contract(format!("robot action {robot_action} out of range")));
        }
        let human_action = self.predict_human(s, step)?;
        let state = self.game.step(s.state, robot_action, human_action);
        let matches = (0..self.support.len())
            .map(|i| self.conservative_action(i, step, s.state).map(|a| a == robot_action))
            .collect::<Result<Vec<_>>>()?;
        let (belief, off_path) = match s.belief.posterior_update_indexed(|i| if matches[i] { T::one() } else { T::zero() }) {
            Ok(b) => (b, false),
            Err(Error::InconsistentObservation) => (s.belief.clone(), true),
            Err(e) => return Err(e),
        };
        Ok(Transition { next: AugmentedState { state, theta_h: s.theta_h, belief }, human_action, off_path })
    }
}

/// Best open-loop human plan against a mixture of robot plans, by dynamic
/// programming over the tuple of per-group states.
struct HumanPlanSearch<'a, T: Scalar, G: MarkovGame<T> + ?Sized> {
    game: &'a G,
    groups: &'a [(Vec<usize>, T)],
    step: usize,
    theta_h: T,
    sel: &'a EquilibriumSelection,
    memo: HashMap<(usize, Vec<usize>), (T, usize)>,
}

impl<T: Scalar, G: MarkovGame<T> + ?Sized> HumanPlanSearch<'_, T, G> {
    fn best(&mut self, t: usize, states: Vec<usize>) -> (T, usize) {
        if t == self.game.horizon() {
            let value = self.groups.iter().zip(&states).map(|((_, w), &x)| *w * self.game.terminal_reward(x)).sum();
            return (value, 0);
        }
        if let Some(&hit) = self.memo.get(&(t, states.clone())) {
            return hit;
        }
        let mut options = Vec::with_capacity(self.game.num_human_actions());
        for uh in 0..self.game.num_human_actions() {
            let mut value = T::zero();
            let mut next = Vec::with_capacity(states.len());
            for ((plan, w), &x) in self.groups.iter().zip(&states) {
                let ur = plan[t - self.step];
                value += *w * self.game.human_reward(x, ur, uh, self.theta_h);
                next.push(self.game.step(x, ur, uh));
            }
            value += self.best(t + 1, next).0;
            options.push((uh, value));
        }
        let (uh, value) = argmax_by(options, |a, b| self.sel.compare_human_actions(a, b)).expect("human has actions");
        self.memo.insert((t, states), (value, uh));
        (value, uh)
    }
}

/// Predicts the trusting human's action at `step`.
pub fn predict_trusting_human<T: Scalar, G: MarkovGame<T> + ?Sized>(
    game: &G,
    s: &AugmentedState<T>,
    step: usize,
    sel: &EquilibriumSelection,
) -> Result<usize> {
    TrustingModel::new(game, s.belief.support(), s.theta_h, sel)?.predict_human(s, step)
}

/// One augmented-state transition under robot action `robot_action`.
pub fn trusting_transition<T: Scalar, G: MarkovGame<T> + ?Sized>(
    game: &G,
    s: &AugmentedState<T>,
    robot_action: usize,
    step: usize,
    sel: &EquilibriumSelection,
) -> Result<Transition<T>> {
    TrustingModel::new(game, s.belief.support(), s.theta_h, sel)?.transition(s, robot_action, step)
}

/// Decision recorded for one reachable augmented state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustingDecision<T> {
    pub robot_action: usize,
    pub human_action: usize,
    /// Robot reward-to-go under optimal play.
    pub value: T,
}

/// Optimal robot policy over the reachable augmented states.
#[derive(Debug, Clone)]
pub struct TrustingPolicy<T> {
    support: Vec<T>,
    table: HashMap<(usize, usize, Mask), TrustingDecision<T>>,
}

impl<T: Scalar> TrustingPolicy<T> {
    fn mask_of(&self, belief: &Belief<T>) -> Mask {
        belief.weights().iter().map(|&w| w > T::zero()).collect()
    }

    /// Decision at an augmented state visited by the solver.
    pub fn decision(&self, s: &AugmentedState<T>, step: usize) -> Option<TrustingDecision<T>> {
        if s.belief.support() != self.support.as_slice() {
            return None;
        }
        self.table.get(&(step, s.state, self.mask_of(&s.belief))).copied()
    }

    pub fn robot_action(&self, s: &AugmentedState<T>, step: usize) -> Option<usize> {
        self.decision(s, step).map(|d| d.robot_action)
    }

    /// Human action the trusting model predicts at this augmented state.
    pub fn induced_human(&self, s: &AugmentedState<T>, step: usize) -> Option<usize> {
        self.decision(s, step).map(|d| d.human_action)
    }

    /// Number of reachable augmented states solved.
    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

/// Optimal plan against a trusting human together with the belief path.
#[derive(Debug, Clone)]
pub struct TrustingSolution<T> {
    pub policy: TrustingPolicy<T>,
    pub profile: StrategyProfile<T>,
    /// Human belief before each step and after the last one (`H + 1` entries).
    pub beliefs: Vec<Belief<T>>,
    /// Per-step flag for robot actions no candidate objective explains.
    pub off_path: Vec<bool>,
}

struct MdpSolver<'m, 'g, T: Scalar, G: MarkovGame<T> + ?Sized> {
    model: &'m mut TrustingModel<'g, T, G>,
    prior: Vec<T>,
    theta_r: T,
    table: HashMap<(usize, usize, Mask), TrustingDecision<T>>,
}

impl<T: Scalar, G: MarkovGame<T> + ?Sized> MdpSolver<'_, '_, T, G> {
    fn augmented(&self, state: usize, mask: &[bool]) -> Result<AugmentedState<T>> {
        let weights = self.prior.iter().zip(mask).map(|(&w, &m)| if m { w } else { T::zero() }).collect();
        Ok(AugmentedState {
            state,
            theta_h: self.model.theta_h,
            belief: Belief::from_unnormalized(self.model.support.clone(), weights)?,
        })
    }

    fn next_mask(&self, mask: &[bool], step: usize, state: usize, robot_action: usize) -> Result<(Mask, bool)> {
        let mut next = mask.to_vec();
        for (i, keep) in next.iter_mut().enumerate() {
            if *keep {
                *keep = self.model.conservative_action(i, step, state)? == robot_action;
            }
        }
        if next.iter().any(|&m| m) {
            Ok((next, false))
        } else {
            Ok((mask.to_vec(), true))
        }
    }

    /// Robot reward-to-go from `(step, state, mask)` under optimal play.
    fn value(&mut self, step: usize, state: usize, mask: Mask) -> Result<T> {
        let game = self.model.game;
        if step == game.horizon() {
            return Ok(game.terminal_reward(state));
        }
        let key = (step, state, mask);
        if let Some(d) = self.table.get(&key) {
            return Ok(d.value);
        }
        let (_, _, mask) = key;
        let s = self.augmented(state, &mask)?;
        let human_action = self.model.predict_human(&s, step)?;
        let mut options = Vec::with_capacity(game.num_robot_actions());
        for ur in 0..game.num_robot_actions() {
            let (next_mask, _) = self.next_mask(&mask, step, state, ur)?;
            let next_state = game.step(state, ur, human_action);
            let v = game.robot_reward(state, ur, human_action, self.theta_r) + self.value(step + 1, next_state, next_mask)?;
            options.push((ur, v));
        }
        let sel = self.model.sel.clone();
        let (robot_action, value) =
            argmax_by(options, |a, b| sel.compare_robot_actions(a, b)).ok_or_else(|| Error::Contract("robot has no actions".into()))?;
        self.table.insert((step, state, mask), TrustingDecision { robot_action, human_action, value });
        Ok(value)
    }
}

/// Backward induction over the augmented states reachable from the prior,
/// maximizing the robot's true reward with the human's actions supplied by
/// the trusting model. Returns the policy and its rollout.
pub fn solve_trusting_mdp<T: Scalar, G: MarkovGame<T> + ?Sized>(
    game: &G,
    theta_r: T,
    theta_h: T,
    prior: &Belief<T>,
    sel: &EquilibriumSelection,
) -> Result<TrustingSolution<T>> {
    let mut model = TrustingModel::new(game, prior.support(), theta_h, sel)?;
    solve_trusting_with(&mut model, theta_r, prior)
}

/// As [`solve_trusting_mdp`], reusing the candidate equilibria in `model`.
pub fn solve_trusting_with<T: Scalar, G: MarkovGame<T> + ?Sized>(
    model: &mut TrustingModel<'_, T, G>,
    theta_r: T,
    prior: &Belief<T>,
) -> Result<TrustingSolution<T>> {
    if prior.support() != model.support() {
        return Err(Error::Contract("prior support differs from the model's candidate objectives".into()));
    }
    let game = model.game;
    let theta_h = model.theta_h;
    let x0 = game.initial_state();
    let root: Mask = prior.weights().iter().map(|&w| w > T::zero()).collect();
    let mut solver = MdpSolver { model, prior: prior.weights().to_vec(), theta_r, table: HashMap::new() };
    solver.value(0, x0, root.clone())?;

    let (mut robot_plan, mut human_plan, mut off_path) = (Vec::new(), Vec::new(), Vec::new());
    let mut beliefs = vec![prior.clone()];
    let (mut state, mut mask) = (x0, root);
    for t in 0..game.horizon() {
        let d = solver.table[&(t, state, mask.clone())];
        let (next_mask, flagged) = solver.next_mask(&mask, t, state, d.robot_action)?;
        robot_plan.push(d.robot_action);
        human_plan.push(d.human_action);
        off_path.push(flagged);
        state = game.step(state, d.robot_action, d.human_action);
        mask = next_mask;
        beliefs.push(solver.augmented(state, &mask)?.belief);
    }
    let policy = TrustingPolicy { support: prior.support().to_vec(), table: solver.table };
    let profile = StrategyProfile::evaluate(game, robot_plan, human_plan, theta_r, theta_h)?;
    Ok(TrustingSolution { policy, profile, beliefs, off_path })
}
