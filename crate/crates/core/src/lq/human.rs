//! Human models for the table-pushing game.

use serde::{Deserialize, Serialize};

use super::linalg::Vec2;
use super::riccati::{best_response_forces, gains_at, LqSystem};
use crate::error::{Error, Result};
use crate::scalar::{sign, Scalar};

/// Central-difference step for the estimate gradient.
pub const LEARN_FD_STEP: f64 = 1e-4;
/// Bounds the estimate is clamped to.
pub const ESTIMATE_BOUNDS: (f64, f64) = (1e-3, 1e3);
/// Default lookahead of the predicting human, in steps.
pub const DEFAULT_LOOKAHEAD: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HumanKind<T> {
    /// Plays Nash for its current estimate and corrects the estimate by
    /// gradient descent on the error in predicting the robot's force.
    Learn { eta: T },
    /// Plays Nash for its initial estimate forever.
    Fixed,
    /// Assumes the robot repeats its last force for `lookahead` steps, then
    /// stops, and best-responds open-loop.
    Predict { lookahead: usize },
}

impl<T: Scalar> HumanKind<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Learn { eta } if !(eta >= T::zero()) || !eta.is_finite() => {
                Err(Error::Config(format!("learning rate must be finite and nonnegative, got {eta}")))
            }
            Self::Predict { lookahead: 0 } => Err(Error::Config("prediction lookahead must be at least 1".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanModel<T> {
    pub kind: HumanKind<T>,
    /// Current estimate of the robot's effort weight.
    pub estimate: T,
    pub theta_h: T,
    /// Step up the prediction error instead of down.
    #[serde(default)]
    pub literal_ascent: bool,
}

impl<T: Scalar> HumanModel<T> {
    pub fn new(kind: HumanKind<T>, estimate: T, theta_h: T) -> Self {
        Self { kind, estimate: clamp_estimate(estimate), theta_h, literal_ascent: false }
    }
}

fn clamp_estimate<T: Scalar>(v: T) -> T {
    let (lo, hi) = (T::lit(ESTIMATE_BOUNDS.0), T::lit(ESTIMATE_BOUNDS.1));
    if v.is_nan() {
        lo
    } else {
        v.max(lo).min(hi)
    }
}

/// Signed error between the Nash force predicted for objective `theta` and
/// the observed force.
fn prediction_error<T: Scalar>(sys: &LqSystem<T>, theta: T, theta_h: T, x: Vec2<T>, t: usize, observed: T) -> Result<T> {
    let (k_r, _) = gains_at(sys, theta, theta_h, t)?;
    Ok(-k_r.dot(x) - observed)
}

/// Derivative of the absolute prediction error with respect to the
/// estimate, by central differences; zero where the prediction is exact.
pub fn prediction_error_slope<T: Scalar>(
    sys: &LqSystem<T>,
    estimate: T,
    theta_h: T,
    x: Vec2<T>,
    t: usize,
    observed: T,
) -> Result<T> {
    let h = T::lit(LEARN_FD_STEP);
    let e = prediction_error(sys, estimate, theta_h, x, t, observed)?;
    let hi = prediction_error(sys, estimate + h, theta_h, x, t, observed)?;
    // Estimates are clamped above the step, so `estimate - h` stays positive.
    let lo = prediction_error(sys, estimate - h, theta_h, x, t, observed)?;
    Ok(sign(e) * (hi - lo) / (h + h))
}

/// Estimate after observing the robot force `observed` at state `x`, step
/// `t`. Non-learning models keep their estimate.
pub fn gradient_update<T: Scalar>(model: &HumanModel<T>, observed: T, x: Vec2<T>, t: usize, sys: &LqSystem<T>) -> Result<T> {
    let eta = match model.kind {
        HumanKind::Learn { eta } => eta,
        _ => return Ok(model.estimate),
    };
    if eta == T::zero() {
        return Ok(model.estimate);
    }
    let slope = prediction_error_slope(sys, model.estimate, model.theta_h, x, t, observed)?;
    let step = if model.literal_ascent { eta * slope } else { -eta * slope };
    Ok(clamp_estimate(model.estimate + step))
}

/// Human force at step `t` in state `x`; `u_r_last` is the robot's force at
/// the previous step (zero at the first step).
pub fn human_action<T: Scalar>(model: &HumanModel<T>, x: Vec2<T>, t: usize, sys: &LqSystem<T>, u_r_last: T) -> Result<T> {
    match model.kind {
        HumanKind::Learn { .. } | HumanKind::Fixed => {
            let (_, k_h) = gains_at(sys, model.estimate, model.theta_h, t)?;
            Ok(-k_h.dot(x))
        }
        HumanKind::Predict { lookahead } => {
            let remaining = sys.steps.checked_sub(t).filter(|&r| r > 0).ok_or_else(|| Error::Contract(format!("step {t} past the horizon")))?;
            let robot: Vec<T> = (0..remaining).map(|k| if k < lookahead { u_r_last } else { T::zero() }).collect();
            let plan = best_response_forces(sys.a, sys.b_h, sys.b_r, x, &robot, model.theta_h * sys.dt)?;
            Ok(plan[0])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lq::LqParams;

    fn sys() -> LqSystem<f64> {
        LqSystem::from_params(&LqParams::standard()).unwrap()
    }

    #[test]
    fn zero_rate_keeps_estimate() {
        let m = HumanModel::new(HumanKind::Learn { eta: 0.0 }, 0.1, 1.0);
        assert_eq!(gradient_update(&m, -3.0, Vec2::new(-1.0, 0.0), 0, &sys()).unwrap(), 0.1);
    }

    #[test]
    fn pushing_away_raises_estimate() {
        let m = HumanModel::new(HumanKind::Learn { eta: 5.0 }, 0.1, 1.0);
        let next = gradient_update(&m, -1.0, Vec2::new(-1.0, 0.0), 0, &sys()).unwrap();
        assert!(next > 0.1, "{next}");
        let literal = HumanModel { literal_ascent: true, ..m };
        assert!(gradient_update(&literal, -1.0, Vec2::new(-1.0, 0.0), 0, &sys()).unwrap() < 0.1);
    }

    #[test]
    fn exact_prediction_does_not_move() {
        let s = sys();
        let (k_r, _) = gains_at(&s, 0.3, 1.0, 2).unwrap();
        let x = Vec2::new(-0.5, 0.2);
        let m = HumanModel::new(HumanKind::Learn { eta: 5.0 }, 0.3, 1.0);
        assert_eq!(gradient_update(&m, -k_r.dot(x), x, 2, &s).unwrap(), 0.3);
    }

    #[test]
    fn estimate_is_clamped() {
        let m = HumanModel::new(HumanKind::Learn { eta: 1e9 }, 0.1, 1.0);
        let next = gradient_update(&m, -100.0, Vec2::new(-1.0, 0.0), 0, &sys()).unwrap();
        assert!((1e-3..=1e3).contains(&next));
    }

    #[test]
    fn fixed_human_at_goal_rests() {
        let m = HumanModel::new(HumanKind::Fixed, 0.1, 1.0);
        assert_eq!(human_action(&m, Vec2::zero(), 3, &sys(), 2.0).unwrap(), 0.0);
    }

    #[test]
    fn bad_models_rejected() {
        assert!(HumanKind::Learn { eta: -1.0 }.validate().is_err());
        assert!(HumanKind::<f64>::Predict { lookahead: 0 }.validate().is_err());
        assert!(HumanKind::<f64>::Fixed.validate().is_ok());
    }
}
