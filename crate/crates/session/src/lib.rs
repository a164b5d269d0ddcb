//! Real-time cart-pole sessions: a human steers the cart from the keyboard
//! while a robot strategy pushes it too.
//!
//! HTTP endpoints:
//!
//! | method | path | body / reply |
//! |---|---|---|
//! | POST | `/sessions` | `{strategy, tick_rate, overrides?}` → `{id}` |
//! | POST | `/sessions/{id}/start` | → `{status}` |
//! | POST | `/sessions/{id}/input` | `{direction, client_tick}` → ack |
//! | POST | `/sessions/{id}/advance` | `{ticks}` (fake clock only) |
//! | GET | `/sessions/{id}` | status and settings |
//! | GET | `/sessions/{id}/log` | full event log |
//! | GET | `/sessions/{id}/stream` | WebSocket |
//!
//! The socket carries [`ServerMessage`]s out and [`ClientMessage`]s in.

// Negated comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod protocol;
pub mod server;
pub mod session;

pub use error::ServiceError;
pub use protocol::{ClientMessage, CreateSession, Direction, EndReason, Frame, ServerMessage, SessionOverrides, WireMetrics, WireState};
pub use server::{serve, Clock, Service, ServiceConfig, SessionInfo};
pub use session::{metrics_from_log, LogEvent, SessionCore, SessionLog, SessionSpec, Status};
