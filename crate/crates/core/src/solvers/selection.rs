use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::scalar::{strictly_greater, Scalar};

/// Criterion used to rank coexisting pure equilibria of one stage game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageRanking {
    /// Largest robot action first, then smallest human action.
    RobotEffort,
    /// Largest shared terminal reward reached under the continuation play,
    /// then as [`StageRanking::RobotEffort`].
    SharedProgress,
}

/// Deterministic rule picking one equilibrium when several coexist.
///
/// Action indices are assumed ordered by effort (index 0 is "do nothing").
/// Every ranking ends with the total order (robot action descending, human
/// action ascending), so no ties survive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquilibriumSelection {
    pub name: String,
    /// Ranking applied at the first decision step.
    pub first_stage: StageRanking,
    /// Ranking applied at every later step.
    pub later_stages: StageRanking,
}

impl Default for EquilibriumSelection {
    fn default() -> Self {
        Self::robot_leads()
    }
}

/// One candidate stage equilibrium.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StageCandidate<T> {
    pub robot: usize,
    pub human: usize,
    /// Shared terminal reward reached if this joint action is played.
    pub progress: T,
}

impl EquilibriumSelection {
    /// The robot takes on work at the first step; afterwards the agents
    /// coordinate on the equilibrium that gets the most shared work done,
    /// with the robot carrying on ties.
    pub fn robot_leads() -> Self {
        Self {
            name: "robot-leads".into(),
            first_stage: StageRanking::RobotEffort,
            later_stages: StageRanking::SharedProgress,
        }
    }

    /// Robot action descending, human action ascending, at every step.
    pub fn lexicographic() -> Self {
        Self {
            name: "lexicographic".into(),
            first_stage: StageRanking::RobotEffort,
            later_stages: StageRanking::RobotEffort,
        }
    }

    pub fn ranking_at(&self, step: usize) -> StageRanking {
        if step == 0 {
            self.first_stage
        } else {
            self.later_stages
        }
    }

    /// `Less` means `a` is preferred over `b`.
    pub(crate) fn compare_stage<T: Scalar>(&self, step: usize, a: &StageCandidate<T>, b: &StageCandidate<T>) -> Ordering {
        if self.ranking_at(step) == StageRanking::SharedProgress {
            if strictly_greater(a.progress, b.progress) {
                return Ordering::Less;
            }
            if strictly_greater(b.progress, a.progress) {
                return Ordering::Greater;
            }
        }
        b.robot.cmp(&a.robot).then(a.human.cmp(&b.human))
    }

    /// Preference between robot plans that tie in value: larger actions at
    /// the earliest differing step win. `Less` means `a` is preferred.
    pub fn compare_robot_plans(&self, a: &[usize], b: &[usize]) -> Ordering {
        for (x, y) in a.iter().zip(b) {
            match y.cmp(x) {
                Ordering::Equal => continue,
                other => return other,
            }
        }
        Ordering::Equal
    }

    /// Preference between tied human plans: smaller actions win.
    pub fn compare_human_plans(&self, a: &[usize], b: &[usize]) -> Ordering {
        a.cmp(b)
    }

    /// Preference between tied single robot actions.
    pub fn compare_robot_actions(&self, a: usize, b: usize) -> Ordering {
        b.cmp(&a)
    }

    /// Preference between tied single human actions.
    pub fn compare_human_actions(&self, a: usize, b: usize) -> Ordering {
        a.cmp(&b)
    }
}

/// Index of the best value, where ties (within tolerance) go to the item the
/// `prefer` order ranks first.
pub(crate) fn argmax_by<T, I, F>(items: I, mut prefer: F) -> Option<(usize, T)>
where
    T: Scalar,
    I: IntoIterator<Item = (usize, T)>,
    F: FnMut(usize, usize) -> Ordering,
{
    let mut best: Option<(usize, T)> = None;
    for (idx, value) in items {
        best = match best {
            None => Some((idx, value)),
            Some((b, bv)) => {
                if strictly_greater(value, bv) || (!strictly_greater(bv, value) && prefer(idx, b) == Ordering::Less) {
                    Some((idx, value))
                } else {
                    Some((b, bv))
                }
            }
        };
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(robot: usize, human: usize, progress: f64) -> StageCandidate<f64> {
        StageCandidate { robot, human, progress }
    }

    #[test]
    fn first_stage_prefers_robot_effort() {
        let sel = EquilibriumSelection::robot_leads();
        let (a, b) = (cand(1, 0, 3.0), cand(0, 2, 4.0));
        assert_eq!(sel.compare_stage(0, &a, &b), Ordering::Less);
        assert_eq!(sel.compare_stage(1, &a, &b), Ordering::Greater);
    }

    #[test]
    fn progress_ties_fall_back_to_robot_effort() {
        let sel = EquilibriumSelection::robot_leads();
        assert_eq!(sel.compare_stage(1, &cand(2, 0, 4.0), &cand(0, 2, 4.0)), Ordering::Less);
    }

    #[test]
    fn lexicographic_ignores_progress() {
        let sel = EquilibriumSelection::lexicographic();
        assert_eq!(sel.compare_stage(1, &cand(1, 0, 3.0), &cand(0, 2, 4.0)), Ordering::Less);
        assert_eq!(sel.compare_stage(1, &cand(1, 0, 3.0), &cand(1, 2, 4.0)), Ordering::Less);
    }

    #[test]
    fn argmax_breaks_ties_with_preference() {
        let sel = EquilibriumSelection::robot_leads();
        let values = [(0, 1.0), (1, 2.0), (2, 2.0)];
        let best = argmax_by(values, |a, b| sel.compare_robot_actions(a, b)).unwrap();
        assert_eq!(best.0, 2);
        let best = argmax_by(values, |a, b| sel.compare_human_actions(a, b)).unwrap();
        assert_eq!(best.0, 1);
    }
}
