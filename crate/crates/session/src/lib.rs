//! Session service for the phantom teleoperation core.
//!
//! - [`config`]: scene file (models, mapping, networks, cameras, rates).
//! - [`protocol`]: JSON messages exchanged with the operator console.
//! - [`session`]: state machine plus cameras and snapshot numbering.
//! - [`replay`]: headless trace + pedal script playback.
//! - [`eval`]: latency histogram, network quality, mapping endpoints.
//! - [`serve`]: single-operator WebSocket endpoint.

pub mod config;
mod error;
pub mod eval;
pub mod protocol;
pub mod replay;
pub mod serve;
pub mod session;

pub use config::{Scene, SceneConfig};
pub use error::{Result, SessionError};
pub use protocol::{ErrorCode, ProtocolMessage, StateSnapshot};
pub use session::Session;
