//! Linear-quadratic table pushing: a robot and a human push a table of mass
//! `m` toward the origin with viscous friction, each paying for its own
//! effort and both paying for the final distance to the goal.

pub mod human;
pub mod linalg;
pub mod planner;
pub mod riccati;
pub mod sim;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
pub use human::{gradient_update, human_action, HumanKind, HumanModel, LEARN_FD_STEP};
pub use linalg::{Mat2, Vec2};
pub use planner::{logspace, optimistic_plan, plan_trust_robot, PlannerOptions, TrustPlan, PLANNER_SEED};
pub use riccati::{best_response_forces, gains_at, lqr_gains, nash_rollout, riccati_nash_gains, FeedbackGains, LqSystem};
pub use sim::{communication_pct, model_error_sweep, simulate_forces, simulate_lq, LqDraw, LqMetrics, LqOutcome, MeanSe, RobotStrategy, SweepRow};

/// Table-pushing parameters. The state is `[position, velocity]` relative
/// to the goal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqParams<T> {
    /// Table mass (kg).
    pub m: T,
    /// Viscous friction (N s/m).
    pub b_fric: T,
    /// Control period (s).
    pub dt: T,
    pub x0: [T; 2],
    pub steps: usize,
    pub theta_r: T,
    pub theta_h: T,
}

impl<T: Scalar> LqParams<T> {
    /// Half-kilogram table, 1 N s/m friction, 0.5 s steps over 10 s, one
    /// meter from the goal, `theta_r = 5`, `theta_h = 1`.
    pub fn standard() -> Self {
        Self {
            m: T::lit(0.5),
            b_fric: T::one(),
            dt: T::lit(0.5),
            x0: [-T::one(), T::zero()],
            steps: 20,
            theta_r: T::lit(5.0),
            theta_h: T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.m, self.b_fric, self.dt, self.x0[0], self.x0[1], self.theta_r, self.theta_h].iter().all(|v| v.is_finite());
        if !finite || !(self.m > T::zero()) || !(self.dt > T::zero()) || self.steps == 0 {
            return Err(Error::Contract(format!("invalid LQ parameters: {self:?}")));
        }
        if !(self.theta_r > T::zero() && self.theta_h > T::zero()) {
            return Err(Error::Contract("effort weights must be positive".into()));
        }
        Ok(())
    }

    pub fn x0(&self) -> Vec2<T> {
        Vec2(self.x0)
    }
}

/// Discrete-time dynamics `x' = A x + B (u_r + u_h)`.
pub fn lq_dynamics<T: Scalar>(params: &LqParams<T>) -> Result<(Mat2<T>, Vec2<T>)> {
    params.validate()?;
    let LqParams { m, b_fric, dt, .. } = *params;
    let a = Mat2([[T::one(), dt], [T::zero(), T::one() - b_fric * dt / m]]);
    Ok((a, Vec2::new(T::zero(), dt / m)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_dynamics() {
        let (a, b) = lq_dynamics(&LqParams::<f64>::standard()).unwrap();
        assert_eq!(a, Mat2([[1.0, 0.5], [0.0, 0.0]]));
        assert_eq!(b, Vec2::new(0.0, 1.0));
    }

    #[test]
    fn frictionless_dynamics() {
        let p = LqParams { m: 1.0, b_fric: 0.0, dt: 0.1, ..LqParams::standard() };
        let (a, b) = lq_dynamics(&p).unwrap();
        assert_eq!(a, Mat2([[1.0, 0.1], [0.0, 1.0]]));
        assert_eq!(b, Vec2::new(0.0, 0.1));
    }

    #[test]
    fn zero_timestep_rejected() {
        let p = LqParams { dt: 0.0, ..LqParams::<f64>::standard() };
        assert!(lq_dynamics(&p).is_err());
    }
}
