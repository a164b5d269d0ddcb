//! JSON messages exchanged with clients.

use serde::{Deserialize, Serialize};
use trustgames_core::cartpole::{CartPoleState, CartPoleStrategy, EpisodeMetrics};

/// Arrow key state sent by the client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Right,
    #[default]
    None,
}

impl Direction {
    /// Cart force for a key press of strength `magnitude`.
    pub fn force(self, magnitude: f64) -> f64 {
        match self {
            Self::Left => -magnitude,
            Self::Right => magnitude,
            Self::None => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ClientMessage {
    Input { session: String, direction: Direction, client_tick: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireState {
    pub x: f64,
    pub v: f64,
    pub phi: f64,
    pub omega: f64,
}

impl From<&CartPoleState<f64>> for WireState {
    fn from(s: &CartPoleState<f64>) -> Self {
        Self { x: s.x, v: s.v, phi: s.phi, omega: s.omega }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireMetrics {
    pub upright_pct: f64,
    pub effort_pct: f64,
}

impl From<EpisodeMetrics> for WireMetrics {
    fn from(m: EpisodeMetrics) -> Self {
        Self { upright_pct: m.time_upright_pct, effort_pct: m.human_effort_pct }
    }
}

/// State at `tick`, the forces applied from it and the metrics over ticks
/// `0..=tick`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub tick: u64,
    pub state: WireState,
    pub u_r: f64,
    pub u_h: f64,
    pub metrics: WireMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    /// The configured duration elapsed.
    Completed,
    /// Every client left and none came back within the grace period.
    Disconnected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ServerMessage {
    Frame(Frame),
    Ended { final_metrics: WireMetrics, reason: EndReason },
    /// The input with this client tick was queued for the next server tick.
    Ack { client_tick: u64, applies_at: u64 },
    Error { message: String },
}

/// Optional per-session settings.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionOverrides {
    pub t_destab: Option<f64>,
    pub force: Option<f64>,
    pub human_force: Option<f64>,
    pub initial_phi: Option<f64>,
    pub duration_s: Option<f64>,
    pub grace_s: Option<f64>,
}

/// Body of `POST /sessions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub strategy: CartPoleStrategy,
    pub tick_rate: f64,
    #[serde(default)]
    pub overrides: SessionOverrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
}

/// Body of `POST /sessions/{id}/input`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputRequest {
    pub direction: Direction,
    #[serde(default)]
    pub client_tick: u64,
}

/// Body of `POST /sessions/{id}/advance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdvanceRequest {
    pub ticks: u64,
}
