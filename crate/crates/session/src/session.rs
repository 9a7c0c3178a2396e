//! A running session: the state machine plus cameras, view selection and
//! snapshot numbering. Both the network service and headless replay drive
//! one of these.

use phantom_core::fsm::{DemoRecord, Event, Pedal, Phase, SessionState, Transition};
use phantom_core::io_streams::InputFrame;
use phantom_core::kinematics::check_self_collision;
use phantom_core::retarget::GloveSample;
use phantom_core::se3::PoseDoc;
use phantom_core::{Error, RigidTransform};

use crate::config::{CameraRig, Scene};
use crate::error::Result;
use crate::protocol::{ErrorCode, ProtocolMessage, StateSnapshot};

pub struct Session {
    state: SessionState,
    rig: CameraRig,
    camera: String,
    seq: u64,
    last_frame: Option<InputFrame>,
}

impl Session {
    pub fn new(scene: &Scene) -> Result<Self> {
        let state = SessionState::new(scene.setup.clone(), scene.metadata())?;
        let camera = scene.rig.names().next().unwrap_or_default().to_string();
        Ok(Self {
            state,
            rig: scene.rig.clone(),
            camera,
            seq: 0,
            last_frame: None,
        })
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn phase(&self) -> Phase {
        self.state.phase()
    }

    pub fn camera(&self) -> &str {
        &self.camera
    }

    pub fn rig(&self) -> &CameraRig {
        &self.rig
    }

    pub fn into_record(self) -> DemoRecord {
        self.state.into_record()
    }

    /// Applies one input tick, then completes the running trajectory if
    /// this tick reached its end.
    pub fn input(&mut self, frame: InputFrame) -> phantom_core::Result<Transition> {
        self.last_frame = Some(frame.clone());
        let tr = self.state.step(Event::InputTick(frame))?;
        if self.state.trajectory_finished() {
            return self.state.step(Event::TrajectoryDone);
        }
        Ok(tr)
    }

    /// Re-applies the latest input at time `t` so that execution keeps
    /// advancing while the operator is not streaming. Only acts in
    /// EXECUTING and only once an input has been seen.
    pub fn hold(&mut self, t: f64) -> phantom_core::Result<Option<Transition>> {
        if self.phase() != Phase::Executing || t <= self.state.clock() {
            return Ok(None);
        }
        match &self.last_frame {
            Some(f) => {
                let f = InputFrame::new(t, f.wrist.pose, f.glove.angles);
                self.input(f).map(Some)
            }
            None => Ok(None),
        }
    }

    pub fn pedal(&mut self, state: Pedal) -> phantom_core::Result<Transition> {
        self.state.step(match state {
            Pedal::Down => Event::PedalDown,
            Pedal::Up => Event::PedalUp,
        })
    }

    pub fn set_view(&mut self, camera: &str) -> bool {
        if self.rig.contains(camera) {
            self.camera = camera.to_string();
            true
        } else {
            false
        }
    }

    /// Moves the simulated floating camera and re-solves its pose.
    pub fn move_floating_camera(&mut self, base_to_float: &RigidTransform) -> Result<RigidTransform> {
        self.rig.observe_floating(base_to_float, self.state.clock())
    }

    /// Applies one client message. `t` is the session time stamped on
    /// inputs; the message's own `t` is only validated. Returns the error
    /// to send back, if any.
    pub fn handle(&mut self, msg: ProtocolMessage, t: f64) -> Option<ProtocolMessage> {
        let outcome = match msg {
            ProtocolMessage::Input { t: client_t, wrist, glove } => {
                if !client_t.is_finite() {
                    return Some(ProtocolMessage::error(ErrorCode::InvalidInput, "input time must be finite"));
                }
                let Some(pose) = wrist.to_transform() else {
                    return Some(ProtocolMessage::error(ErrorCode::InvalidInput, "wrist quaternion is not normalizable"));
                };
                let glove = match GloveSample::from_slice(t, &glove) {
                    Ok(g) => g,
                    Err(e) => return Some(ProtocolMessage::error(ErrorCode::InvalidInput, e.to_string())),
                };
                self.input(InputFrame::new(t, pose, glove.angles))
            }
            ProtocolMessage::Pedal { state } => self.pedal(state),
            ProtocolMessage::View { camera } => {
                return (!self.set_view(&camera))
                    .then(|| ProtocolMessage::error(ErrorCode::UnknownCamera, format!("no camera named `{camera}`")));
            }
            ProtocolMessage::State(_) | ProtocolMessage::Error { .. } => {
                return Some(ProtocolMessage::error(ErrorCode::UnexpectedType, "only the server sends this message type"));
            }
        };
        match outcome {
            Ok(_) => None,
            Err(e @ Error::Rejected { .. }) => Some(ProtocolMessage::error(ErrorCode::Rejected, e.to_string())),
            Err(e) => Some(ProtocolMessage::error(ErrorCode::Internal, e.to_string())),
        }
    }

    /// Captures the current state under the next sequence number.
    pub fn snapshot(&mut self) -> StateSnapshot {
        self.seq += 1;
        let s = &self.state;
        let collision = check_self_collision(&s.setup().model, s.phantom_config()).expect("session configs match the model");
        StateSnapshot {
            seq: self.seq,
            t: s.clock(),
            fsm: s.phase(),
            robot_q: s.robot_config().0.clone(),
            phantom_q: s.phantom_config().0.clone(),
            frames: self.rig.frames(),
            camera: self.camera.clone(),
            gate: s.last_gate(),
            collision,
            planner_error: s.planner_error().map(str::to_string),
        }
    }

    /// End-effector pose of the robot, in the wire format.
    pub fn robot_ee(&self) -> PoseDoc {
        self.state.robot_ee_pose().into()
    }
}
