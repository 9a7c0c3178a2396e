use std::collections::BTreeMap;

use phantom_core::fsm::{Pedal, Phase};
use phantom_core::se3::PoseDoc;
use phantom_session::{ErrorCode, ProtocolMessage, StateSnapshot};
use proptest::prelude::*;

fn float() -> impl Strategy<Value = f64> {
    any::<f64>().prop_filter("finite", |v| v.is_finite())
}

fn pose() -> impl Strategy<Value = PoseDoc> {
    (prop::array::uniform4(float()), prop::array::uniform3(float())).prop_map(|(quat, pos)| PoseDoc { quat, pos })
}

fn phase() -> impl Strategy<Value = Phase> {
    prop_oneof![Just(Phase::Live), Just(Phase::Preview), Just(Phase::Executing)]
}

fn pedal() -> impl Strategy<Value = Pedal> {
    prop_oneof![Just(Pedal::Down), Just(Pedal::Up)]
}

fn code() -> impl Strategy<Value = ErrorCode> {
    prop_oneof![
        Just(ErrorCode::Malformed),
        Just(ErrorCode::UnexpectedType),
        Just(ErrorCode::InvalidInput),
        Just(ErrorCode::Rejected),
        Just(ErrorCode::UnknownCamera),
        Just(ErrorCode::OperatorBusy),
        Just(ErrorCode::Internal),
    ]
}

fn snapshot() -> impl Strategy<Value = StateSnapshot> {
    (
        any::<u64>(),
        float(),
        phase(),
        prop::collection::vec(float(), 0..24),
        prop::collection::vec(float(), 0..24),
        prop::collection::btree_map("[a-z_]{1,12}", pose(), 0..4),
        "[a-z_]{0,12}",
        any::<bool>(),
        prop::collection::vec(any::<bool>(), 0..24),
        prop::option::of(".{0,40}"),
    )
        .prop_map(
            |(seq, t, fsm, robot_q, phantom_q, frames, camera, gate, collision, planner_error)| StateSnapshot {
                seq,
                t,
                fsm,
                robot_q,
                phantom_q,
                frames: frames.into_iter().collect::<BTreeMap<_, _>>(),
                camera,
                gate,
                collision,
                planner_error,
            },
        )
}

fn message() -> impl Strategy<Value = ProtocolMessage> {
    prop_oneof![
        (float(), pose(), prop::collection::vec(float(), 0..30))
            .prop_map(|(t, wrist, glove)| ProtocolMessage::Input { t, wrist, glove }),
        pedal().prop_map(|state| ProtocolMessage::Pedal { state }),
        ".{0,20}".prop_map(|camera| ProtocolMessage::View { camera }),
        snapshot().prop_map(ProtocolMessage::State),
        (code(), ".{0,40}").prop_map(|(code, msg)| ProtocolMessage::Error { code, msg }),
    ]
}

proptest! {
    #[test]
    fn every_message_round_trips(m in message()) {
        let text = m.to_json();
        let back = ProtocolMessage::from_json(&text).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(back.to_json(), text);
    }
}

#[test]
fn documented_wire_examples_parse() {
    let input = r#"{"type":"input","t":0.5,"wrist":{"quat":[1,0,0,0],"pos":[0,0,1]},"glove":[0,0,0]}"#;
    assert!(matches!(ProtocolMessage::from_json(input).unwrap(), ProtocolMessage::Input { t, .. } if t == 0.5));
    let state = r#"{"type":"state","seq":3,"t":1.0,"fsm":"PREVIEW","robot_q":[0.1],"phantom_q":[0.2],
        "frames":{"tag":{"quat":[1,0,0,0],"pos":[0.6,0,0]}},"camera":"top_down","gate":false,"collision":[false]}"#;
    match ProtocolMessage::from_json(state).unwrap() {
        ProtocolMessage::State(s) => {
            assert_eq!(s.seq, 3);
            assert_eq!(s.fsm, Phase::Preview);
            assert!(s.planner_error.is_none());
        }
        other => panic!("{other:?}"),
    }
    let err = ProtocolMessage::from_json(r#"{"type":"error","code":"rejected","msg":"no"}"#).unwrap();
    assert!(!err.is_client_message());
}

#[test]
fn malformed_frames_become_error_messages() {
    for text in ["", "{", r#"{"type":"pedal"}"#, r#"{"state":"down"}"#, r#"{"type":"view","camera":"a","extra":1}"#] {
        match ProtocolMessage::from_json(text) {
            Err(ProtocolMessage::Error { code, .. }) => assert_eq!(code, ErrorCode::Malformed, "{text}"),
            other => panic!("{text}: {other:?}"),
        }
    }
}
