//! Preview-then-execute session state machine, joint-space planner and the
//! demonstration recorder.
//!
//! ```text
//!   LIVE --pedal_down--> PREVIEW --pedal_up--> EXECUTING --trajectory_done--> LIVE
//!                           ^  |
//!                           +--+ planner failure (error flag, robot untouched)
//! ```

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::collision_net::CollisionGuard;
use crate::error::{Error, Result};
use crate::io_streams::InputFrame;
use crate::kinematics::{check_self_collision, fk_unchecked, solve_ik, IkOptions, JointConfig, KinematicModel};
use crate::retarget::{wrist_to_target, EndEffectorTarget, MappingTable, WristSample};
use crate::se3::RigidTransform;

/// Default collision sampling step along trajectories (s).
pub const DEFAULT_PLAN_DT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Phase {
    Live,
    Preview,
    Executing,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Live => "LIVE",
            Phase::Preview => "PREVIEW",
            Phase::Executing => "EXECUTING",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pedal {
    Down,
    Up,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    PedalDown,
    PedalUp,
    TrajectoryDone,
    InputTick(InputFrame),
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::PedalDown => "pedal_down",
            Event::PedalUp => "pedal_up",
            Event::TrajectoryDone => "trajectory_done",
            Event::InputTick(_) => "input_tick",
        }
    }
}

/// Result of an accepted event.
#[derive(Debug, Clone, PartialEq)]
pub enum Transition {
    /// State advanced normally (possibly to the same phase).
    Applied { from: Phase, to: Phase },
    /// Commit attempted but the planner refused; the session stays in
    /// PREVIEW with [`SessionState::planner_error`] set.
    PlannerFailed { reason: String },
}

// ---------------------------------------------------------------- planner

/// Timed joint-space path. `waypoints[k].0` are offsets from the start.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub waypoints: Vec<(f64, JointConfig)>,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.waypoints.last().map_or(0.0, |w| w.0)
    }

    pub fn start(&self) -> &JointConfig {
        &self.waypoints[0].1
    }

    pub fn end(&self) -> &JointConfig {
        &self.waypoints[self.waypoints.len() - 1].1
    }

    /// Configuration at offset `t`, linearly interpolated and clamped to the
    /// ends.
    pub fn sample(&self, t: f64) -> JointConfig {
        let w = &self.waypoints;
        if t <= w[0].0 {
            return w[0].1.clone();
        }
        if t >= self.duration() {
            return self.end().clone();
        }
        let k = w.partition_point(|(tk, _)| *tk <= t);
        let (t0, q0) = &w[k - 1];
        let (t1, q1) = &w[k];
        let s = (t - t0) / (t1 - t0);
        JointConfig(q0.0.iter().zip(&q1.0).map(|(a, b)| a + s * (b - a)).collect())
    }
}

/// Straight-line joint-space path from `from` to `to`, timed so the slowest
/// joint runs at its velocity limit, with every waypoint (spacing at most
/// `dt`) checked against the geometric oracle.
pub fn plan_trajectory(model: &KinematicModel, from: &JointConfig, to: &JointConfig, dt: f64) -> Result<Trajectory> {
    model.check_len(from)?;
    model.check_len(to)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("planner step must be positive, got {dt}")));
    }
    for q in [from, to] {
        if let Some((j, v)) = q.limit_violation(model) {
            let spec = &model.joints()[j];
            return Err(Error::OutOfLimits {
                joint: j,
                value: v,
                lower: spec.lower,
                upper: spec.upper,
            });
        }
    }
    let duration = model
        .joints()
        .iter()
        .zip(from.0.iter().zip(&to.0))
        .map(|(j, (a, b))| (b - a).abs() / j.max_velocity)
        .fold(0.0, f64::max);
    let n = if duration == 0.0 { 0 } else { (duration / dt).ceil().max(1.0) as usize };
    let mut waypoints = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let (t, q) = if k == n {
            (duration, to.clone())
        } else {
            let s = k as f64 / n as f64;
            (
                duration * s,
                JointConfig(from.0.iter().zip(&to.0).map(|(a, b)| a + s * (b - a)).collect()),
            )
        };
        let labels = check_self_collision(model, &q)?;
        if labels.iter().any(|&c| c) {
            return Err(Error::PathCollision {
                fraction: if n == 0 { 0.0 } else { k as f64 / n as f64 },
                links: labels.iter().enumerate().filter(|(_, &c)| c).map(|(i, _)| i).collect(),
            });
        }
        waypoints.push((t, q));
    }
    Ok(Trajectory { waypoints })
}

// ---------------------------------------------------------------- recorder

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoMetadata {
    pub task: String,
    pub seed: u64,
    pub model_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoSample {
    pub t: f64,
    pub phase: Phase,
    pub q: JointConfig,
    pub ee: RigidTransform,
    pub pedal: Pedal,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCounts {
    pub live: usize,
    pub preview: usize,
    pub executing: usize,
}

impl PhaseCounts {
    pub fn total(&self) -> usize {
        self.live + self.preview + self.executing
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    header: DemoMetadata,
}

/// Recorded demonstration. Only LIVE and EXECUTING samples are ever kept.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoRecord {
    pub metadata: DemoMetadata,
    samples: Vec<DemoSample>,
}

impl DemoRecord {
    pub fn new(metadata: DemoMetadata) -> Self {
        Self {
            metadata,
            samples: Vec::new(),
        }
    }

    pub fn samples(&self) -> &[DemoSample] {
        &self.samples
    }

    /// Appends `sample` unless it belongs to PREVIEW; returns whether it was kept.
    pub fn append(&mut self, sample: DemoSample) -> bool {
        if sample.phase == Phase::Preview {
            return false;
        }
        self.samples.push(sample);
        true
    }

    pub fn counts(&self) -> PhaseCounts {
        let mut c = PhaseCounts::default();
        for s in &self.samples {
            match s.phase {
                Phase::Live => c.live += 1,
                Phase::Preview => c.preview += 1,
                Phase::Executing => c.executing += 1,
            }
        }
        c
    }

    /// JSON-lines text: a header line `{"header": {...}}` followed by one
    /// sample per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&HeaderLine {
            header: self.metadata.clone(),
        })
        .expect("serializable header");
        out.push('\n');
        for s in &self.samples {
            out.push_str(&serde_json::to_string(s).expect("serializable sample"));
            out.push('\n');
        }
        out
    }

    /// Writes the demo file and returns the per-phase sample counts.
    pub fn finalize(&self, path: impl AsRef<Path>) -> Result<PhaseCounts> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(self.to_jsonl().as_bytes()).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(self.counts())
    }

    /// Reads a demo file back. Files holding PREVIEW samples are accepted
    /// here so that they can be inspected; [`DemoRecord::counts`] exposes them.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let parse = |line: usize, reason: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| parse(1, "missing header line".into()))?
            .map_err(|e| Error::io(path, e))?;
        let header: HeaderLine = serde_json::from_str(&header).map_err(|e| parse(1, e.to_string()))?;
        let mut samples = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            samples.push(serde_json::from_str(&line).map_err(|e| parse(i + 2, e.to_string()))?);
        }
        Ok(Self {
            metadata: header.header,
            samples,
        })
    }
}

// ---------------------------------------------------------------- session

/// Everything the session needs to turn inputs into joint configurations.
#[derive(Debug, Clone)]
pub struct SessionSetup {
    /// Combined arm + hand model.
    pub model: KinematicModel,
    /// Joint whose frame is the end effector.
    pub ee_joint: usize,
    /// Index of the first hand joint in the combined configuration.
    pub hand_offset: usize,
    pub mapping: MappingTable,
    /// Optional learned correction applied to hand configurations.
    pub guard: Option<CollisionGuard>,
    pub ik: IkOptions,
    pub plan_dt: f64,
    pub initial: JointConfig,
}

impl SessionSetup {
    fn validate(&self) -> Result<()> {
        self.model.check_len(&self.initial)?;
        if self.ee_joint >= self.model.dof() {
            return Err(Error::InvalidParameter(format!("end-effector joint {} out of range", self.ee_joint)));
        }
        if self.hand_offset + self.mapping.len() != self.model.dof() {
            return Err(Error::Dimension {
                context: "hand mapping vs model",
                expected: self.model.dof() - self.hand_offset,
                actual: self.mapping.len(),
            });
        }
        if let Some(g) = &self.guard {
            if g.cpn.dof() != self.mapping.len() || g.ccn.dof() != self.mapping.len() {
                return Err(Error::Dimension {
                    context: "collision networks vs hand",
                    expected: self.mapping.len(),
                    actual: g.cpn.dof(),
                });
            }
        }
        if !(self.plan_dt > 0.0) {
            return Err(Error::InvalidParameter("planner step must be positive".into()));
        }
        Ok(())
    }

    pub fn ee_pose(&self, q: &JointConfig) -> RigidTransform {
        fk_unchecked(&self.model, &q.0)[self.ee_joint]
    }
}

/// Output of one retargeting pass.
#[derive(Debug, Clone)]
struct Retargeted {
    q: JointConfig,
    gated: bool,
    target: EndEffectorTarget,
}

#[derive(Debug, Clone)]
pub struct SessionState {
    setup: SessionSetup,
    phase: Phase,
    pedal: Pedal,
    robot: JointConfig,
    phantom: JointConfig,
    ee_origin: EndEffectorTarget,
    wrist_origin: Option<WristSample>,
    /// The next LIVE tick re-anchors the wrist origin to itself.
    rebase_pending: bool,
    trajectory: Option<Trajectory>,
    exec_start: f64,
    clock: f64,
    latest_wrist: Option<WristSample>,
    last_target: Option<EndEffectorTarget>,
    last_gate: bool,
    planner_error: Option<String>,
    gate_activations: usize,
    planner_failures: usize,
    recorder: DemoRecord,
}

impl SessionState {
    pub fn new(setup: SessionSetup, metadata: DemoMetadata) -> Result<Self> {
        setup.validate()?;
        let robot = setup.initial.clamped(&setup.model);
        let ee = setup.ee_pose(&robot);
        Ok(Self {
            phase: Phase::Live,
            pedal: Pedal::Up,
            phantom: robot.clone(),
            ee_origin: EndEffectorTarget::from_pose(0.0, &ee),
            wrist_origin: None,
            rebase_pending: false,
            trajectory: None,
            exec_start: 0.0,
            clock: 0.0,
            latest_wrist: None,
            last_target: None,
            last_gate: false,
            planner_error: None,
            gate_activations: 0,
            planner_failures: 0,
            recorder: DemoRecord::new(metadata),
            robot,
            setup,
        })
    }

    pub fn setup(&self) -> &SessionSetup {
        &self.setup
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn pedal(&self) -> Pedal {
        self.pedal
    }

    pub fn robot_config(&self) -> &JointConfig {
        &self.robot
    }

    pub fn phantom_config(&self) -> &JointConfig {
        &self.phantom
    }

    pub fn ee_origin(&self) -> &EndEffectorTarget {
        &self.ee_origin
    }

    pub fn wrist_origin(&self) -> Option<&WristSample> {
        self.wrist_origin.as_ref()
    }

    pub fn trajectory(&self) -> Option<&Trajectory> {
        self.trajectory.as_ref()
    }

    /// Target computed on the most recent LIVE or PREVIEW tick.
    pub fn last_target(&self) -> Option<&EndEffectorTarget> {
        self.last_target.as_ref()
    }

    /// Whether the correction network fired on the most recent tick.
    pub fn last_gate(&self) -> bool {
        self.last_gate
    }

    pub fn planner_error(&self) -> Option<&str> {
        self.planner_error.as_deref()
    }

    pub fn gate_activations(&self) -> usize {
        self.gate_activations
    }

    pub fn planner_failures(&self) -> usize {
        self.planner_failures
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn recorder(&self) -> &DemoRecord {
        &self.recorder
    }

    pub fn into_record(self) -> DemoRecord {
        self.recorder
    }

    pub fn robot_ee_pose(&self) -> RigidTransform {
        self.setup.ee_pose(&self.robot)
    }

    /// True once the active trajectory has been played to its end; the
    /// session loop then issues [`Event::TrajectoryDone`].
    pub fn trajectory_finished(&self) -> bool {
        self.phase == Phase::Executing
            && self
                .trajectory
                .as_ref()
                .is_some_and(|t| self.clock - self.exec_start >= t.duration())
    }

    fn reject(&self, event: &Event, reason: &'static str) -> Error {
        Error::Rejected {
            state: self.phase.name(),
            event: event.name(),
            reason,
        }
    }

    /// Applies one event. Every `(phase, event)` pair either yields a
    /// [`Transition`] or an [`Error::Rejected`] that leaves the state intact.
    pub fn step(&mut self, event: Event) -> Result<Transition> {
        let from = self.phase;
        match (self.phase, &event) {
            (Phase::Live, Event::PedalDown) => {
                self.pedal = Pedal::Down;
                self.phase = Phase::Preview;
                self.phantom = self.robot.clone();
            }
            (Phase::Live, Event::PedalUp) => return Err(self.reject(&event, "pedal is not held")),
            (Phase::Live | Phase::Preview, Event::TrajectoryDone) => {
                return Err(self.reject(&event, "no trajectory is running"))
            }
            (Phase::Live, Event::InputTick(frame)) => {
                let frame = frame.clone();
                self.advance_clock(frame.timestamp());
                if self.rebase_pending {
                    self.rebase_origins(frame.wrist);
                }
                let r = self.retarget(&frame, &self.robot.clone())?;
                self.robot = r.q;
                self.phantom = self.robot.clone();
                self.finish_tick(&frame, r.gated, Some(r.target));
            }
            (Phase::Preview, Event::PedalDown) => {
                if self.pedal == Pedal::Down {
                    return Err(self.reject(&event, "pedal is already held"));
                }
                // re-preview after a failed commit
                self.pedal = Pedal::Down;
                self.planner_error = None;
            }
            (Phase::Preview, Event::PedalUp) => {
                if self.pedal == Pedal::Up {
                    return Err(self.reject(&event, "pedal is not held"));
                }
                self.pedal = Pedal::Up;
                match plan_trajectory(&self.setup.model, &self.robot, &self.phantom, self.setup.plan_dt) {
                    Ok(traj) => {
                        self.planner_error = None;
                        if traj.duration() == 0.0 {
                            self.trajectory = None;
                            self.resume_live();
                        } else {
                            self.exec_start = self.clock;
                            self.trajectory = Some(traj);
                            self.phase = Phase::Executing;
                        }
                    }
                    Err(e) => {
                        let reason = e.to_string();
                        log::warn!("commit refused: {reason}");
                        self.planner_failures += 1;
                        self.planner_error = Some(reason.clone());
                        return Ok(Transition::PlannerFailed { reason });
                    }
                }
            }
            (Phase::Preview, Event::InputTick(frame)) => {
                let frame = frame.clone();
                self.advance_clock(frame.timestamp());
                let r = self.retarget(&frame, &self.phantom.clone())?;
                self.phantom = r.q;
                self.finish_tick(&frame, r.gated, Some(r.target));
            }
            (Phase::Executing, Event::PedalDown) => return Err(self.reject(&event, "busy executing")),
            (Phase::Executing, Event::PedalUp) => return Err(self.reject(&event, "busy executing")),
            (Phase::Executing, Event::TrajectoryDone) => {
                if !self.trajectory_finished() {
                    return Err(self.reject(&event, "trajectory still running"));
                }
                self.robot = self.trajectory.take().expect("executing has a trajectory").end().clone();
                self.resume_live();
            }
            (Phase::Executing, Event::InputTick(frame)) => {
                let frame = frame.clone();
                self.advance_clock(frame.timestamp());
                let traj = self.trajectory.as_ref().expect("executing has a trajectory");
                self.robot = traj.sample(self.clock - self.exec_start);
                self.phantom = traj.end().clone();
                self.finish_tick(&frame, false, None);
            }
        }
        Ok(Transition::Applied { from, to: self.phase })
    }

    fn advance_clock(&mut self, t: f64) {
        if t > self.clock {
            self.clock = t;
        }
    }

    fn resume_live(&mut self) {
        self.phase = Phase::Live;
        self.phantom = self.robot.clone();
        // The end-effector origin is fixed now; the wrist origin is taken
        // from the first tick that arrives in LIVE.
        let ee = self.robot_ee_pose();
        self.ee_origin = EndEffectorTarget::from_pose(self.clock, &ee);
        if let Some(w) = self.latest_wrist {
            self.rebase_origins(w);
        }
        self.rebase_pending = true;
    }

    /// Anchors the relative wrist mapping at the robot's current end-effector
    /// pose and `latest`, so that `latest` maps to zero displacement.
    pub fn rebase_origins(&mut self, latest: WristSample) {
        let ee = self.robot_ee_pose();
        self.ee_origin = EndEffectorTarget::from_pose(latest.timestamp, &ee);
        self.wrist_origin = Some(latest);
        self.rebase_pending = false;
    }

    fn retarget(&mut self, frame: &InputFrame, seed: &JointConfig) -> Result<Retargeted> {
        let wrist_origin = *self.wrist_origin.get_or_insert(frame.wrist);
        let target = wrist_to_target(&frame.wrist, &wrist_origin, &self.ee_origin);
        let ik = solve_ik(&self.setup.model, self.setup.ee_joint, &target.pose(), seed, &self.setup.ik)?;
        let mut q = ik.q;
        let hand = self.setup.mapping.map_hand(&frame.glove);
        let (hand, gated) = match &self.setup.guard {
            Some(g) => {
                let r = g.apply(&hand)?;
                (r.corrected, r.was_gated)
            }
            None => (hand, false),
        };
        let off = self.setup.hand_offset;
        q.0[off..off + hand.len()].copy_from_slice(&hand.0);
        let q = q.clamped(&self.setup.model);
        Ok(Retargeted { q, gated, target })
    }

    fn finish_tick(&mut self, frame: &InputFrame, gated: bool, target: Option<EndEffectorTarget>) {
        self.latest_wrist = Some(frame.wrist);
        self.last_gate = gated;
        if gated {
            self.gate_activations += 1;
        }
        if target.is_some() {
            self.last_target = target;
        }
        let sample = DemoSample {
            t: frame.timestamp(),
            phase: self.phase,
            q: self.robot.clone(),
            ee: self.robot_ee_pose(),
            pedal: self.pedal,
        };
        self.recorder.append(sample);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::bundled;

    #[test]
    fn zero_displacement_plan_is_single_waypoint() {
        let m = bundled::toy_finger();
        let q = JointConfig(vec![0.1, 0.2, 0.3]);
        let t = plan_trajectory(&m, &q, &q, DEFAULT_PLAN_DT).unwrap();
        assert_eq!(t.waypoints.len(), 1);
        assert_eq!(t.duration(), 0.0);
    }

    #[test]
    fn duration_follows_slowest_joint() {
        let toy = bundled::toy_finger();
        let mut joints = toy.joints().to_vec();
        joints[0].max_velocity = 0.5;
        let m = KinematicModel::new(toy.root_name(), joints, toy.links().to_vec()).unwrap();
        let from = JointConfig(vec![0.0, 0.5, 0.5]);
        let to = JointConfig(vec![1.0, 0.5, 0.5]);
        let t = plan_trajectory(&m, &from, &to, DEFAULT_PLAN_DT).unwrap();
        assert_eq!(t.duration(), 2.0);
        assert!(t.waypoints.windows(2).all(|w| w[1].0 > w[0].0 && w[1].0 - w[0].0 <= DEFAULT_PLAN_DT + 1e-12));
        assert_eq!(t.end(), &to);
        let mid = t.sample(1.0);
        assert!((mid.0[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn out_of_limits_target_is_refused() {
        let m = bundled::toy_finger();
        let from = JointConfig(vec![0.0, 0.5, 0.5]);
        let to = JointConfig(vec![5.0, 0.5, 0.5]);
        assert!(matches!(plan_trajectory(&m, &from, &to, 0.01), Err(Error::OutOfLimits { joint: 0, .. })));
    }

    #[test]
    fn recorder_drops_preview_samples() {
        let mut rec = DemoRecord::new(DemoMetadata {
            task: "t".into(),
            seed: 0,
            model_hash: "h".into(),
        });
        for (i, phase) in [Phase::Live, Phase::Preview, Phase::Executing].into_iter().enumerate() {
            rec.append(DemoSample {
                t: i as f64,
                phase,
                q: JointConfig(vec![0.0]),
                ee: RigidTransform::identity(),
                pedal: Pedal::Up,
            });
        }
        assert_eq!(
            rec.counts(),
            PhaseCounts {
                live: 1,
                preview: 0,
                executing: 1
            }
        );
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("demo.jsonl");
        rec.finalize(&p).unwrap();
        let back = DemoRecord::load(&p).unwrap();
        assert_eq!(back, rec);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(!text.contains("PREVIEW"));
    }

    fn session() -> SessionState {
        let model = bundled::arm_with_hand();
        let hand = bundled::hand16();
        let setup = SessionSetup {
            mapping: crate::retarget::default_hand_mapping(&hand).unwrap(),
            ee_joint: bundled::ARM_FLANGE_JOINT,
            hand_offset: bundled::ARM_DOF,
            guard: None,
            ik: IkOptions::default(),
            plan_dt: DEFAULT_PLAN_DT,
            initial: {
                let mut q = JointConfig::zeros(model.dof());
                q.0[..6].copy_from_slice(&bundled::arm_home().0);
                q
            },
            model,
        };
        SessionState::new(
            setup,
            DemoMetadata {
                task: "unit".into(),
                seed: 0,
                model_hash: String::new(),
            },
        )
        .unwrap()
    }

    fn frame(t: f64, dx: f64) -> InputFrame {
        InputFrame::new(t, RigidTransform::from_translation(dx, 0.0, 1.0), [0.2; 27])
    }

    #[test]
    fn preview_freezes_robot_and_commit_executes() {
        let mut s = session();
        s.step(Event::InputTick(frame(0.0, 0.0))).unwrap();
        s.step(Event::PedalDown).unwrap();
        let frozen = s.robot_config().clone();
        for k in 1..20 {
            s.step(Event::InputTick(frame(0.01 * k as f64, 0.002 * k as f64))).unwrap();
            assert_eq!(s.robot_config(), &frozen);
        }
        assert_ne!(s.phantom_config(), &frozen);
        let target = s.phantom_config().clone();
        assert!(matches!(s.step(Event::PedalUp).unwrap(), Transition::Applied { to: Phase::Executing, .. }));
        assert!(s.step(Event::PedalDown).is_err());
        assert!(s.step(Event::TrajectoryDone).is_err());
        let mut t = 0.2;
        while !s.trajectory_finished() {
            t += 0.01;
            s.step(Event::InputTick(frame(t, 0.0))).unwrap();
        }
        s.step(Event::TrajectoryDone).unwrap();
        assert_eq!(s.phase(), Phase::Live);
        assert_eq!(s.robot_config(), &target);
        assert_eq!(s.recorder().counts().preview, 0);
        // first LIVE tick maps to zero displacement
        s.step(Event::InputTick(frame(t + 0.01, 0.05))).unwrap();
        let target = s.last_target().unwrap();
        let ee_before = s.ee_origin().position;
        assert!((target.position - ee_before).norm() < 1e-12);
    }

    #[test]
    fn commit_without_motion_returns_to_live() {
        let mut s = session();
        s.step(Event::InputTick(frame(0.0, 0.0))).unwrap();
        s.step(Event::PedalDown).unwrap();
        s.step(Event::PedalUp).unwrap();
        assert_eq!(s.phase(), Phase::Live);
    }

    #[test]
    fn live_ignores_pedal_up_and_done() {
        let mut s = session();
        assert!(matches!(s.step(Event::PedalUp), Err(Error::Rejected { .. })));
        assert!(matches!(s.step(Event::TrajectoryDone), Err(Error::Rejected { .. })));
        assert_eq!(s.phase(), Phase::Live);
    }
}
