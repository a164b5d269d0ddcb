//! Closed-loop simulation of the table-pushing game.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::human::{gradient_update, human_action, HumanKind, HumanModel};
use super::planner::{logspace, optimistic_plan, plan_trust_robot, PlannerOptions};
use super::riccati::{coupled_gains, FeedbackGains, LqSystem};
use super::LqParams;
use crate::error::Result;
use crate::scalar::Scalar;
use crate::trace::{SimTrace, TraceStep};

/// Effort weights below this are redrawn.
pub const MIN_SAMPLED_THETA: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RobotStrategy<T> {
    /// Feedback with the true-objective Nash gains.
    Nash,
    /// Open-loop best response to the human it pretends to have convinced.
    Optimistic,
    /// Open-loop plan against a human assumed to learn with `eta_assumed`.
    Trust { eta_assumed: T },
}

impl<T: Scalar> RobotStrategy<T> {
    pub fn label(&self) -> String {
        match self {
            Self::Nash => "nash".into(),
            Self::Optimistic => "optimistic".into(),
            Self::Trust { eta_assumed } => format!("trust({eta_assumed})"),
        }
    }
}

/// Objectives and initial estimate for one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqDraw<T> {
    pub theta_r: T,
    pub theta_h: T,
    pub estimate0: T,
}

impl<T: Scalar> LqDraw<T> {
    /// `theta_r ~ N(5, 0.5)`, `theta_h ~ N(1, 0.5)` (standard deviations),
    /// both redrawn until above [`MIN_SAMPLED_THETA`], and the initial
    /// estimate `~ U(0.05, 0.15)`. Each trial uses its own stream of the
    /// seeded generator.
    pub fn sample(seed: u64, trial: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        let mut positive = |mean: f64, sd: f64| loop {
            let v: f64 = Normal::new(mean, sd).expect("valid normal").sample(&mut rng);
            if v > MIN_SAMPLED_THETA {
                return v;
            }
        };
        let theta_r = positive(5.0, 0.5);
        let theta_h = positive(1.0, 0.5);
        let estimate0 = rng.random_range(0.05..0.15);
        Self { theta_r: T::lit(theta_r), theta_h: T::lit(theta_h), estimate0: T::lit(estimate0) }
    }

    pub fn fixed(theta_r: T, theta_h: T, estimate0: T) -> Self {
        Self { theta_r, theta_h, estimate0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqMetrics<T> {
    pub robot_cost: T,
    pub human_cost: T,
    pub communication_pct: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqOutcome<T> {
    pub trace: SimTrace<T>,
    pub metrics: LqMetrics<T>,
    /// The optimistic robot's pretended objective.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_tilde: Option<T>,
    /// The trust planner fell back to the Nash forces.
    pub planner_warning: bool,
}

/// Share of robot effort spent pushing away from the goal, in percent.
/// `start_position` is the initial position relative to the goal; forces
/// with the same sign push away.
pub fn communication_pct<T: Scalar>(forces: &[T], start_position: T) -> T {
    let total = forces.iter().fold(T::zero(), |acc, u| acc + u.abs());
    if total == T::zero() {
        return T::zero();
    }
    let away = forces.iter().filter(|&&u| u * start_position > T::zero()).fold(T::zero(), |acc, u| acc + u.abs());
    T::lit(100.0) * away / total
}

enum Robot<T> {
    Feedback(FeedbackGains<T>),
    OpenLoop(Vec<T>),
}

/// Rolls the game forward with the given robot and human.
fn run<T: Scalar>(
    params: &LqParams<T>,
    draw: &LqDraw<T>,
    robot: &Robot<T>,
    kind: HumanKind<T>,
) -> Result<(SimTrace<T>, LqMetrics<T>)> {
    kind.validate()?;
    let sys = LqSystem::from_params(params)?;
    let mut human = HumanModel::new(kind, draw.estimate0, draw.theta_h);
    let mut x = params.x0();
    let mut u_r_last = T::zero();
    let mut steps = Vec::with_capacity(sys.steps);
    for t in 0..sys.steps {
        let u_h = human_action(&human, x, t, &sys, u_r_last)?;
        let u_r = match robot {
            Robot::Feedback(g) => -g.robot[t].dot(x),
            Robot::OpenLoop(f) => f[t],
        };
        steps.push(TraceStep {
            t,
            state: x.0.to_vec(),
            robot_action: u_r,
            human_action: u_h,
            robot_reward: T::zero() - draw.theta_r * sys.dt * u_r * u_r,
            human_reward: T::zero() - draw.theta_h * sys.dt * u_h * u_h,
            estimate: Some(human.estimate),
            belief: None,
            off_path: false,
        });
        human.estimate = gradient_update(&human, u_r, x, t, &sys)?;
        x = sys.step(x, u_r, u_h);
        u_r_last = u_r;
    }
    let terminal = -x.norm_sq();
    let trace = SimTrace::finish(steps, x.0.to_vec(), terminal, terminal);
    let metrics = LqMetrics {
        robot_cost: -trace.total_robot,
        human_cost: -trace.total_human,
        communication_pct: communication_pct(&trace.robot_actions(), params.x0[0]),
    };
    Ok((trace, metrics))
}

/// One trial: the robot plays `strategy` against a human of the given kind.
/// The optimistic robot searches 50 log-spaced objectives in `[0.01, 100]`.
pub fn simulate_lq<T: Scalar>(
    params: &LqParams<T>,
    strategy: RobotStrategy<T>,
    human: HumanKind<T>,
    draw: &LqDraw<T>,
    planner: &PlannerOptions<T>,
) -> Result<LqOutcome<T>> {
    let sys = LqSystem::from_params(params)?;
    let (robot, theta_tilde, planner_warning) = match strategy {
        RobotStrategy::Nash => (Robot::Feedback(coupled_gains(&sys, draw.theta_r, draw.theta_h)?), None, false),
        RobotStrategy::Optimistic => {
            let grid = logspace(T::lit(1e-2), T::lit(1e2), 50);
            let (tilde, forces) = optimistic_plan(params, draw.theta_r, draw.theta_h, &grid)?;
            (Robot::OpenLoop(forces), Some(tilde), false)
        }
        RobotStrategy::Trust { eta_assumed } => {
            let plan = plan_trust_robot(params, draw.theta_r, draw.theta_h, draw.estimate0, eta_assumed, planner)?;
            (Robot::OpenLoop(plan.forces), None, plan.warning)
        }
    };
    let (trace, metrics) = run(params, draw, &robot, human)?;
    Ok(LqOutcome { trace, metrics, theta_tilde, planner_warning })
}

/// Plays fixed open-loop robot forces against a human.
pub fn simulate_forces<T: Scalar>(
    params: &LqParams<T>,
    forces: &[T],
    human: HumanKind<T>,
    draw: &LqDraw<T>,
) -> Result<(SimTrace<T>, LqMetrics<T>)> {
    if forces.len() != params.steps {
        return Err(crate::error::Error::Contract(format!("need {} forces, got {}", params.steps, forces.len())));
    }
    run(params, draw, &Robot::OpenLoop(forces.to_vec()), human)
}

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Self { mean: f64::NAN, se: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n;
        if values.len() < 2 {
            return Self { mean, se: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self { mean, se: (var / n).sqrt() }
    }
}

/// Aggregate costs of one robot strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub strategy: String,
    pub robot_cost: MeanSe,
    pub human_cost: MeanSe,
    pub communication_pct: MeanSe,
}

impl SweepRow {
    pub fn from_metrics<T: Scalar>(strategy: String, metrics: &[LqMetrics<T>]) -> Self {
        let col = |f: fn(&LqMetrics<T>) -> T| metrics.iter().map(|m| f(m).as_f64()).collect::<Vec<_>>();
        Self {
            strategy,
            robot_cost: MeanSe::of(&col(|m| m.robot_cost)),
            human_cost: MeanSe::of(&col(|m| m.human_cost)),
            communication_pct: MeanSe::of(&col(|m| m.communication_pct)),
        }
    }
}

/// Trust robots that assume a learning human, played against a human that
/// does not learn, next to the Nash and Optimistic baselines. Trial `k`
/// draws its objectives from stream `k` of `seed`.
pub fn model_error_sweep<T: Scalar>(
    params: &LqParams<T>,
    assumed_etas: &[T],
    true_human: HumanKind<T>,
    trials: usize,
    seed: u64,
    planner: &PlannerOptions<T>,
) -> Result<Vec<SweepRow>> {
    let mut strategies = vec![RobotStrategy::Nash, RobotStrategy::Optimistic];
    strategies.extend(assumed_etas.iter().map(|&eta_assumed| RobotStrategy::Trust { eta_assumed }));
    let mut rows = Vec::with_capacity(strategies.len());
    for strategy in strategies {
        let metrics = (0..trials)
            .map(|k| simulate_lq(params, strategy, true_human, &LqDraw::sample(seed, k as u64), planner).map(|o| o.metrics))
            .collect::<Result<Vec<_>>>()?;
        rows.push(SweepRow::from_metrics(strategy.label(), &metrics));
    }
    Ok(rows)
}
