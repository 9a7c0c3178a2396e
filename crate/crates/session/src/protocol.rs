//! JSON messages exchanged with the operator console, one per text frame.

use std::collections::BTreeMap;

use phantom_core::fsm::{Pedal, Phase};
use phantom_core::se3::PoseDoc;
use serde::{Deserialize, Serialize};

/// Latest view of a session, broadcast to the operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSnapshot {
    /// Strictly increasing per session.
    pub seq: u64,
    /// Session clock (s).
    pub t: f64,
    pub fsm: Phase,
    pub robot_q: Vec<f64>,
    pub phantom_q: Vec<f64>,
    /// `base -> frame` for every camera and the tag.
    pub frames: BTreeMap<String, PoseDoc>,
    /// Camera the operator is viewing through.
    pub camera: String,
    /// True when the last retargeting tick was corrected by the networks.
    pub gate: bool,
    /// Per-link collision labels of the phantom configuration.
    pub collision: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planner_error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Frame is not valid JSON or not a known message.
    Malformed,
    /// Message only the server may send.
    UnexpectedType,
    /// Input payload failed validation.
    InvalidInput,
    /// The state machine refused the event in its current phase.
    Rejected,
    UnknownCamera,
    /// Another operator is already connected.
    OperatorBusy,
    /// The session could not process the message.
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProtocolMessage {
    Input { t: f64, wrist: PoseDoc, glove: Vec<f64> },
    Pedal { state: Pedal },
    View { camera: String },
    State(StateSnapshot),
    Error { code: ErrorCode, msg: String },
}

impl ProtocolMessage {
    pub fn error(code: ErrorCode, msg: impl Into<String>) -> Self {
        ProtocolMessage::Error { code, msg: msg.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("protocol messages serialize")
    }

    /// Parses one text frame; failures come back as the error message to
    /// send to the peer.
    pub fn from_json(text: &str) -> Result<Self, ProtocolMessage> {
        serde_json::from_str(text).map_err(|e| ProtocolMessage::error(ErrorCode::Malformed, e.to_string()))
    }

    /// True for the messages a client may send.
    pub fn is_client_message(&self) -> bool {
        matches!(
            self,
            ProtocolMessage::Input { .. } | ProtocolMessage::Pedal { .. } | ProtocolMessage::View { .. }
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_shapes() {
        let m = ProtocolMessage::from_json(r#"{"type":"pedal","state":"down"}"#).unwrap();
        assert_eq!(m, ProtocolMessage::Pedal { state: Pedal::Down });
        let m = ProtocolMessage::from_json(r#"{"type":"view","camera":"top_down"}"#).unwrap();
        assert!(m.is_client_message());
        let e = ProtocolMessage::error(ErrorCode::OperatorBusy, "one operator per session");
        assert_eq!(e.to_json(), r#"{"type":"error","code":"operator_busy","msg":"one operator per session"}"#);
        assert!(ProtocolMessage::from_json(r#"{"type":"teleport"}"#).is_err());
        assert!(ProtocolMessage::from_json(r#"{"type":"pedal","state":"sideways"}"#).is_err());
    }
}
