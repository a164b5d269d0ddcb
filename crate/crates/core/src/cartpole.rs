//! Cart-pole with a shared cart force. `phi` is the pole angle from
//! vertical, positive when the pole leans toward negative cart position, so
//! a positive cart force increases it and `-sign(phi)` catches the pole.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{sign, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartPoleParams<T> {
    pub cart_mass: T,
    pub pole_mass: T,
    /// Distance from the pivot to the pole's center of mass.
    pub half_length: T,
    pub gravity: T,
    /// Robot force magnitude.
    pub force: T,
    /// Human force magnitude per key press.
    pub human_force: T,
    pub dt: T,
    /// Seconds during which the trust robot destabilizes the pole.
    pub t_destab: T,
}

impl<T: Scalar> Default for CartPoleParams<T> {
    fn default() -> Self {
        Self {
            cart_mass: T::one(),
            pole_mass: T::lit(0.1),
            half_length: T::lit(0.5),
            gravity: T::lit(9.8),
            force: T::lit(10.0),
            human_force: T::lit(10.0),
            dt: T::lit(0.02),
            t_destab: T::one(),
        }
    }
}

impl<T: Scalar> CartPoleParams<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.cart_mass, self.pole_mass, self.half_length, self.gravity, self.force, self.human_force, self.dt];
        if positive.iter().any(|v| !(v.is_finite() && *v > T::zero())) || !(self.t_destab.is_finite() && self.t_destab >= T::zero()) {
            return Err(Error::Config(format!("invalid cart-pole parameters: {self:?}")));
        }
        Ok(())
    }

    /// Number of steps in the destabilization window.
    pub fn destab_steps(&self) -> usize {
        (self.t_destab / self.dt).round().to_usize().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartPoleState<T> {
    pub x: T,
    pub v: T,
    pub phi: T,
    pub omega: T,
    pub t: usize,
}

impl<T: Scalar> CartPoleState<T> {
    pub fn upright(phi: T) -> Self {
        Self { x: T::zero(), v: T::zero(), phi, omega: T::zero(), t: 0 }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.v.is_finite() && self.phi.is_finite() && self.omega.is_finite()
    }

    pub fn is_upright(&self) -> bool {
        self.phi.abs() < T::lit(std::f64::consts::FRAC_PI_2)
    }
}

/// Cart and pole accelerations under total cart force `f`.
pub fn accelerations<T: Scalar>(p: &CartPoleParams<T>, s: &CartPoleState<T>, f: T) -> (T, T) {
    let total = p.cart_mass + p.pole_mass;
    let ml = p.pole_mass * p.half_length;
    let (sin, cos) = (s.phi.sin(), s.phi.cos());
    let temp = (f - ml * s.omega * s.omega * sin) / total;
    let phi_acc = (p.gravity * sin + cos * temp) / (p.half_length * (T::lit(4.0 / 3.0) - p.pole_mass * cos * cos / total));
    let x_acc = temp + ml * phi_acc * cos / total;
    (x_acc, phi_acc)
}

/// One semi-implicit Euler step (velocities first, then positions from the
/// new velocities) with the human and robot forces added on the cart.
pub fn step<T: Scalar>(p: &CartPoleParams<T>, s: &CartPoleState<T>, u_h: T, u_r: T) -> Result<CartPoleState<T>> {
    if !(u_h.is_finite() && u_r.is_finite() && s.is_finite()) {
        return Err(Error::Contract(format!("non-finite cart-pole input: {s:?}, u_h={u_h:?}, u_r={u_r:?}")));
    }
    let (x_acc, phi_acc) = accelerations(p, s, u_h + u_r);
    let v = s.v + p.dt * x_acc;
    let omega = s.omega + p.dt * phi_acc;
    Ok(CartPoleState { x: s.x + p.dt * v, v, phi: s.phi + p.dt * omega, omega, t: s.t + 1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CartPoleStrategy {
    Nash,
    Trust,
}

impl std::str::FromStr for CartPoleStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nash" => Ok(Self::Nash),
            "trust" => Ok(Self::Trust),
            other => Err(Error::Config(format!("unknown strategy {other:?}, expected nash or trust"))),
        }
    }
}

/// Bang-bang robot force. Trust pushes the pole over for the first
/// `destab_steps` steps, then balances like Nash.
pub fn robot_action<T: Scalar>(strategy: CartPoleStrategy, s: &CartPoleState<T>, magnitude: T, destab_steps: usize) -> T {
    let balance = -sign(s.phi) * magnitude;
    match strategy {
        CartPoleStrategy::Trust if s.t < destab_steps => -balance,
        _ => balance,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub time_upright_pct: f64,
    pub human_effort_pct: f64,
}

/// Percent of steps with the pole upright and with nonzero human input.
/// `states[t]` is the state at which `human[t]` was applied.
pub fn episode_metrics<T: Scalar>(states: &[CartPoleState<T>], human: &[T]) -> Result<EpisodeMetrics> {
    if states.is_empty() || states.len() != human.len() {
        return Err(Error::Contract(format!("episode needs matching nonempty traces, got {} states and {} inputs", states.len(), human.len())));
    }
    let n = states.len() as f64;
    let upright = states.iter().filter(|s| s.is_upright()).count() as f64;
    let effort = human.iter().filter(|u| **u != T::zero()).count() as f64;
    Ok(EpisodeMetrics { time_upright_pct: 100.0 * upright / n, human_effort_pct: 100.0 * effort / n })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartPoleStep<T> {
    pub state: CartPoleState<T>,
    pub u_r: T,
    pub u_h: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode<T> {
    pub steps: Vec<CartPoleStep<T>>,
    pub final_state: CartPoleState<T>,
    pub metrics: EpisodeMetrics,
}

/// Runs `steps` steps with the human force given by `human(state)`.
pub fn run_episode<T: Scalar>(
    p: &CartPoleParams<T>,
    strategy: CartPoleStrategy,
    initial: CartPoleState<T>,
    steps: usize,
    mut human: impl FnMut(&CartPoleState<T>) -> T,
) -> Result<Episode<T>> {
    p.validate()?;
    let destab = p.destab_steps();
    let mut s = initial;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let u_r = robot_action(strategy, &s, p.force, destab);
        let u_h = human(&s);
        out.push(CartPoleStep { state: s, u_r, u_h });
        s = step(p, &s, u_h, u_r)?;
    }
    let states: Vec<_> = out.iter().map(|x| x.state).collect();
    let inputs: Vec<_> = out.iter().map(|x| x.u_h).collect();
    let metrics = episode_metrics(&states, &inputs)?;
    Ok(Episode { steps: out, final_state: s, metrics })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> CartPoleParams<f64> {
        CartPoleParams::default()
    }

    #[test]
    fn rest_is_equilibrium() {
        let s = CartPoleState::upright(0.0);
        let n = step(&params(), &s, 0.0, 0.0).unwrap();
        assert_eq!((n.x, n.v, n.phi, n.omega, n.t), (0.0, 0.0, 0.0, 0.0, 1));
    }

    #[test]
    fn gravity_tips_the_pole() {
        let p = params();
        let s = step(&p, &CartPoleState::upright(0.05), 0.0, 0.0).unwrap();
        let s = step(&p, &s, 0.0, 0.0).unwrap();
        assert!(s.phi > 0.05);
    }

    #[test]
    fn positive_force_raises_phi() {
        let (x_acc, phi_acc) = accelerations(&params(), &CartPoleState::upright(0.0), 10.0);
        assert!(x_acc > 0.0 && phi_acc > 0.0);
    }

    #[test]
    fn strategies() {
        let s = CartPoleState { t: 0, ..CartPoleState::upright(0.1) };
        assert_eq!(robot_action(CartPoleStrategy::Nash, &s, 10.0, 50), -10.0);
        assert_eq!(robot_action(CartPoleStrategy::Trust, &s, 10.0, 50), 10.0);
        let late = CartPoleState { t: 50, ..s };
        assert_eq!(robot_action(CartPoleStrategy::Trust, &late, 10.0, 50), -10.0);
        let flat = CartPoleState::upright(0.0);
        assert_eq!(robot_action(CartPoleStrategy::Trust, &flat, 10.0, 50), 0.0);
        assert_eq!(robot_action(CartPoleStrategy::Nash, &flat, 10.0, 50), 0.0);
    }

    #[test]
    fn metrics_definition() {
        let s = vec![CartPoleState::upright(0.0); 4];
        let m = episode_metrics(&s, &[0.0; 4]).unwrap();
        assert_eq!((m.time_upright_pct, m.human_effort_pct), (100.0, 0.0));
        let mut s2 = s.clone();
        s2[3].phi = 2.0;
        let m = episode_metrics(&s2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!((m.time_upright_pct, m.human_effort_pct), (75.0, 25.0));
        assert!(episode_metrics::<f64>(&[], &[]).is_err());
    }

    #[test]
    fn non_finite_force_rejected() {
        assert!(step(&params(), &CartPoleState::upright(0.0), f64::NAN, 0.0).is_err());
    }

    #[test]
    fn nash_balances_and_trust_drops_the_pole() {
        let p = params();
        for phi in [-0.1, -0.02, 0.01, 0.05] {
            let nash = run_episode(&p, CartPoleStrategy::Nash, CartPoleState::upright(phi), 500, |_| 0.0).unwrap();
            let trust = run_episode(&p, CartPoleStrategy::Trust, CartPoleState::upright(phi), 500, |_| 0.0).unwrap();
            assert!(nash.metrics.time_upright_pct >= 95.0);
            assert!(trust.metrics.time_upright_pct < nash.metrics.time_upright_pct);
        }
    }

    #[test]
    fn default_window_is_fifty_steps() {
        assert_eq!(params().destab_steps(), 50);
    }
}
