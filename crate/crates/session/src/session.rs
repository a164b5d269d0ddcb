//! One session's environment, input handoff and event log, independent of
//! any clock or transport.

use serde::{Deserialize, Serialize};
use trustgames_core::cartpole::{episode_metrics, robot_action, step, CartPoleParams, CartPoleState, CartPoleStrategy, EpisodeMetrics};

use crate::error::ServiceError;
use crate::protocol::{CreateSession, Direction, EndReason, Frame, WireMetrics, WireState};

pub const MIN_TICK_RATE: f64 = 10.0;
pub const MAX_TICK_RATE: f64 = 120.0;
pub const DEFAULT_DURATION_S: f64 = 30.0;
pub const DEFAULT_GRACE_S: f64 = 10.0;

/// Validated session settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSpec {
    pub strategy: CartPoleStrategy,
    pub tick_rate: f64,
    pub params: CartPoleParams<f64>,
    pub initial: CartPoleState<f64>,
    pub duration_ticks: u64,
    pub grace_ticks: u64,
}

fn ticks(seconds: f64, rate: f64, field: &str) -> Result<u64, ServiceError> {
    if !(seconds.is_finite() && seconds >= 0.0) {
        return Err(ServiceError::BadRequest(format!("{field} must be a nonnegative number of seconds")));
    }
    Ok((seconds * rate).round() as u64)
}

impl SessionSpec {
    pub fn from_request(req: &CreateSession) -> Result<Self, ServiceError> {
        let rate = req.tick_rate;
        if !(MIN_TICK_RATE..=MAX_TICK_RATE).contains(&rate) {
            return Err(ServiceError::BadRequest(format!("tick_rate must be in [{MIN_TICK_RATE}, {MAX_TICK_RATE}] Hz, got {rate}")));
        }
        let o = &req.overrides;
        let mut params = CartPoleParams::default();
        params.t_destab = o.t_destab.unwrap_or(params.t_destab);
        params.force = o.force.unwrap_or(params.force);
        params.human_force = o.human_force.unwrap_or(params.human_force);
        params.validate().map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        let phi = o.initial_phi.unwrap_or(0.05);
        if !(phi.is_finite() && phi.abs() < std::f64::consts::FRAC_PI_2) {
            return Err(ServiceError::BadRequest("initial_phi must be finite and below pi/2 in magnitude".into()));
        }
        let duration_ticks = ticks(o.duration_s.unwrap_or(DEFAULT_DURATION_S), rate, "duration_s")?;
        if duration_ticks == 0 {
            return Err(ServiceError::BadRequest("duration_s must cover at least one tick".into()));
        }
        Ok(Self {
            strategy: req.strategy,
            tick_rate: rate,
            params,
            initial: CartPoleState::upright(phi),
            duration_ticks,
            grace_ticks: ticks(o.grace_s.unwrap_or(DEFAULT_GRACE_S), rate, "grace_s")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogEvent {
    Started,
    /// Input received while the next tick to run was `tick`.
    Input { tick: u64, direction: Direction, client_tick: u64 },
    /// Forces applied at `state`, which is the state at `tick`.
    Step { tick: u64, state: CartPoleState<f64>, direction: Direction, u_r: f64, u_h: f64 },
    ClientConnected { tick: u64 },
    ClientDisconnected { tick: u64 },
    Ended { tick: u64, reason: EndReason, final_metrics: EpisodeMetrics },
}

/// Full record of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub id: String,
    /// Creation order across the service, for counterbalancing records.
    pub sequence: u64,
    pub spec: SessionSpec,
    pub events: Vec<LogEvent>,
}

/// Recomputes the episode metrics from the logged steps.
pub fn metrics_from_log(log: &SessionLog) -> trustgames_core::Result<EpisodeMetrics> {
    let (states, human): (Vec<_>, Vec<_>) = log
        .events
        .iter()
        .filter_map(|e| match e {
            LogEvent::Step { state, u_h, .. } => Some((*state, *u_h)),
            _ => None,
        })
        .unzip();
    episode_metrics(&states, &human)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Idle,
    Running,
    Ended,
}

/// Environment plus bookkeeping. The caller decides when ticks happen.
#[derive(Debug)]
pub struct SessionCore {
    log: SessionLog,
    state: CartPoleState<f64>,
    tick: u64,
    pending: Direction,
    status: Status,
    upright: u64,
    effort: u64,
    final_metrics: Option<EpisodeMetrics>,
}

impl SessionCore {
    pub fn new(id: String, sequence: u64, spec: SessionSpec) -> Self {
        let state = spec.initial;
        Self {
            log: SessionLog { id, sequence, spec, events: Vec::new() },
            state,
            tick: 0,
            pending: Direction::None,
            status: Status::Idle,
            upright: 0,
            effort: 0,
            final_metrics: None,
        }
    }

    pub fn spec(&self) -> &SessionSpec {
        &self.log.spec
    }

    pub fn log(&self) -> &SessionLog {
        &self.log
    }

    pub fn status(&self) -> Status {
        self.status
    }

    /// Index of the next tick to run.
    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn final_metrics(&self) -> Option<EpisodeMetrics> {
        self.final_metrics
    }

    pub fn start(&mut self) -> Result<(), ServiceError> {
        match self.status {
            Status::Idle => {
                self.status = Status::Running;
                self.log.events.push(LogEvent::Started);
                Ok(())
            }
            Status::Running => Err(ServiceError::Conflict("session already started".into())),
            Status::Ended => Err(ServiceError::Conflict("session has ended".into())),
        }
    }

    /// Queues an input for the next tick; a later input before that tick
    /// replaces it. Returns the tick it applies to.
    pub fn submit(&mut self, direction: Direction, client_tick: u64) -> Result<u64, ServiceError> {
        match self.status {
            Status::Running => {}
            Status::Idle => return Err(ServiceError::Conflict("session not started".into())),
            Status::Ended => return Err(ServiceError::Conflict("session has ended".into())),
        }
        self.pending = direction;
        self.log.events.push(LogEvent::Input { tick: self.tick, direction, client_tick });
        Ok(self.tick)
    }

    pub fn note(&mut self, event: LogEvent) {
        self.log.events.push(event);
    }

    /// Runs one tick: applies the pending input and the robot force at the
    /// current state and returns that tick's frame.
    pub fn step(&mut self) -> Result<Frame, ServiceError> {
        if self.status != Status::Running {
            return Err(ServiceError::Conflict("session is not running".into()));
        }
        let spec = &self.log.spec;
        let direction = std::mem::take(&mut self.pending);
        let u_h = direction.force(spec.params.human_force);
        let u_r = robot_action(spec.strategy, &self.state, spec.params.force, spec.params.destab_steps());
        let next = step(&spec.params, &self.state, u_h, u_r).map_err(|e| ServiceError::Internal(e.to_string()))?;

        self.upright += u64::from(self.state.is_upright());
        self.effort += u64::from(u_h != 0.0);
        let n = (self.tick + 1) as f64;
        let frame = Frame {
            tick: self.tick,
            state: WireState::from(&self.state),
            u_r,
            u_h,
            metrics: WireMetrics { upright_pct: 100.0 * self.upright as f64 / n, effort_pct: 100.0 * self.effort as f64 / n },
        };
        self.log.events.push(LogEvent::Step { tick: self.tick, state: self.state, direction, u_r, u_h });
        self.state = next;
        self.tick += 1;
        Ok(frame)
    }

    pub fn is_complete(&self) -> bool {
        self.tick >= self.log.spec.duration_ticks
    }

    /// Ends the session; metrics come from the log.
    pub fn end(&mut self, reason: EndReason) -> Result<EpisodeMetrics, ServiceError> {
        if let Some(m) = self.final_metrics {
            return Ok(m);
        }
        let metrics = if self.tick == 0 {
            EpisodeMetrics { time_upright_pct: 0.0, human_effort_pct: 0.0 }
        } else {
            metrics_from_log(&self.log).map_err(|e| ServiceError::Internal(e.to_string()))?
        };
        self.status = Status::Ended;
        self.final_metrics = Some(metrics);
        self.log.events.push(LogEvent::Ended { tick: self.tick, reason, final_metrics: metrics });
        Ok(metrics)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::SessionOverrides;

    fn core(strategy: CartPoleStrategy, overrides: SessionOverrides) -> SessionCore {
        let spec = SessionSpec::from_request(&CreateSession { strategy, tick_rate: 50.0, overrides }).unwrap();
        let mut c = SessionCore::new("s".into(), 0, spec);
        c.start().unwrap();
        c
    }

    #[test]
    fn tick_rate_bounds() {
        for (rate, ok) in [(9.9, false), (10.0, true), (120.0, true), (500.0, false), (f64::NAN, false)] {
            let r = SessionSpec::from_request(&CreateSession { strategy: CartPoleStrategy::Nash, tick_rate: rate, overrides: Default::default() });
            assert_eq!(r.is_ok(), ok, "{rate}");
        }
    }

    #[test]
    fn last_input_in_a_tick_wins() {
        let mut c = core(CartPoleStrategy::Nash, Default::default());
        c.submit(Direction::Left, 0).unwrap();
        c.submit(Direction::Right, 0).unwrap();
        assert_eq!(c.step().unwrap().u_h, 10.0);
        assert_eq!(c.step().unwrap().u_h, 0.0);
    }

    #[test]
    fn frames_chain_through_the_dynamics() {
        let mut c = core(CartPoleStrategy::Trust, Default::default());
        let spec = c.spec().clone();
        let mut s = spec.initial;
        for k in 0..200 {
            if k % 3 == 0 {
                c.submit(Direction::Left, k).unwrap();
            }
            let f = c.step().unwrap();
            assert_eq!(f.state, WireState::from(&s));
            assert_eq!(f.u_r, robot_action(spec.strategy, &s, spec.params.force, spec.params.destab_steps()));
            s = step(&spec.params, &s, f.u_h, f.u_r).unwrap();
        }
    }

    #[test]
    fn trust_destabilizes_for_the_configured_window() {
        let o = SessionOverrides { t_destab: Some(2.0), initial_phi: Some(0.05), ..Default::default() };
        let mut c = core(CartPoleStrategy::Trust, o);
        let frames: Vec<_> = (0..150).map(|_| c.step().unwrap()).collect();
        for f in &frames {
            let push = f.state.phi.signum() * 10.0;
            if f.tick < 100 {
                assert_eq!(f.u_r, push, "tick {}", f.tick);
            } else {
                assert_eq!(f.u_r, -push, "tick {}", f.tick);
            }
        }
    }

    #[test]
    fn final_metrics_match_last_frame_and_log() {
        let mut c = core(CartPoleStrategy::Nash, SessionOverrides { duration_s: Some(2.0), ..Default::default() });
        let mut last = None;
        while !c.is_complete() {
            if c.tick().is_multiple_of(2) {
                c.submit(Direction::Right, c.tick()).unwrap();
            }
            last = Some(c.step().unwrap());
        }
        assert_eq!(c.tick(), 100);
        let m = c.end(EndReason::Completed).unwrap();
        assert_eq!(WireMetrics::from(m), last.unwrap().metrics);
        assert_eq!(metrics_from_log(c.log()).unwrap(), m);
        assert!(c.submit(Direction::Left, 0).is_err());
    }

    #[test]
    fn inputs_need_a_running_session() {
        let spec = SessionSpec::from_request(&CreateSession { strategy: CartPoleStrategy::Nash, tick_rate: 50.0, overrides: Default::default() }).unwrap();
        let mut c = SessionCore::new("s".into(), 0, spec);
        assert!(c.submit(Direction::Left, 0).is_err());
        c.start().unwrap();
        assert!(c.start().is_err());
    }
}
