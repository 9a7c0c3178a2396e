use nalgebra::Vector3;
use phantom_core::fsm::{
    plan_trajectory, DemoMetadata, DemoRecord, Event, Phase, SessionSetup, SessionState, Transition, DEFAULT_PLAN_DT,
};
use phantom_core::io_streams::InputFrame;
use phantom_core::kinematics::random::random_config;
use phantom_core::kinematics::{bundled, check_self_collision, forward_kinematics, IkOptions};
use phantom_core::retarget::default_hand_mapping;
use phantom_core::{Error, JointConfig, RigidTransform};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup() -> SessionSetup {
    let model = bundled::arm_with_hand();
    let mut initial = JointConfig::zeros(model.dof());
    initial.0[..bundled::ARM_DOF].copy_from_slice(&bundled::arm_home().0);
    SessionSetup {
        mapping: default_hand_mapping(&bundled::hand16()).unwrap(),
        ee_joint: bundled::ARM_FLANGE_JOINT,
        hand_offset: bundled::ARM_DOF,
        guard: None,
        ik: IkOptions::default(),
        plan_dt: DEFAULT_PLAN_DT,
        initial,
        model,
    }
}

fn metadata(seed: u64) -> DemoMetadata {
    DemoMetadata {
        task: "walk".into(),
        seed,
        model_hash: String::new(),
    }
}

/// Drives a session with random events and checks the safety invariants
/// after every one of them.
fn walk(seed: u64, events: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = SessionState::new(setup(), metadata(seed)).unwrap();
    let rot = s.robot_ee_pose().rotation;
    let mut wrist = Vector3::new(0.0, 0.0, 1.0);
    let mut glove = [0.3f64; 27];
    let mut t = 0.0;
    let mut frozen: Option<JointConfig> = None;
    let mut resumed = false;
    for k in 0..events {
        let r: f64 = rng.random();
        let event = if r < 0.7 {
            t += 1.0 / 60.0;
            wrist += Vector3::from_fn(|_, _| rng.random_range(-0.004..0.004));
            for g in glove.iter_mut() {
                *g = (*g + rng.random_range(-0.05f64..0.05)).clamp(0.0, 1.2);
            }
            Event::InputTick(InputFrame::new(t, RigidTransform::new(rot, wrist), glove))
        } else if r < 0.8 {
            Event::PedalDown
        } else if r < 0.9 {
            Event::PedalUp
        } else {
            Event::TrajectoryDone
        };
        let before_phase = s.phase();
        let before_robot = s.robot_config().clone();
        let before_ee = s.robot_ee_pose();
        let is_tick = matches!(event, Event::InputTick(_));
        match s.step(event) {
            Ok(Transition::Applied { from, to }) => {
                if from == Phase::Executing && to == Phase::Live {
                    resumed = true;
                } else if resumed && to == Phase::Live && is_tick {
                    let target = s.last_target().unwrap();
                    let d = (target.position - before_ee.translation).norm();
                    if d >= 1e-9 {
                        return Err(format!("event {k}: resume displacement {d}"));
                    }
                    resumed = false;
                }
            }
            Ok(Transition::PlannerFailed { .. }) => {}
            Err(Error::Rejected { .. }) => {
                if s.phase() != before_phase || s.robot_config() != &before_robot {
                    return Err(format!("event {k}: rejected event changed the state"));
                }
            }
            Err(e) => return Err(format!("event {k}: {e}")),
        }
        match (s.phase(), &frozen) {
            (Phase::Preview, None) => frozen = Some(before_robot.clone()),
            (Phase::Preview, Some(f)) if s.robot_config() != f => {
                return Err(format!("event {k}: robot moved during preview"));
            }
            (Phase::Preview, Some(_)) => {}
            (_, _) => frozen = None,
        }
        if s.phase() == Phase::Preview && s.robot_config() != &before_robot {
            return Err(format!("event {k}: robot moved entering or during preview"));
        }
        if s.phase() == Phase::Live && s.phantom_config() != s.robot_config() {
            return Err(format!("event {k}: phantom diverged in LIVE"));
        }
    }
    let record = s.into_record();
    if record.counts().preview != 0 || record.to_jsonl().contains("PREVIEW") {
        return Err("demo contains preview samples".into());
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn random_event_sequences_keep_safety_invariants(seed in any::<u64>()) {
        let r = walk(seed, 1500);
        prop_assert!(r.is_ok(), "{:?}", r);
    }
}

#[test]
fn planner_waypoints_are_collision_free_on_toy_finger() {
    let toy = bundled::toy_finger();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut planned = 0;
    while planned < 100 {
        let (a, b) = (random_config(&mut rng, &toy), random_config(&mut rng, &toy));
        let free = |q: &JointConfig| !check_self_collision(&toy, q).unwrap().contains(&true);
        if !free(&a) || !free(&b) {
            continue;
        }
        match plan_trajectory(&toy, &a, &b, DEFAULT_PLAN_DT) {
            Ok(traj) => {
                planned += 1;
                assert_eq!(traj.start(), &a);
                assert_eq!(traj.end(), &b);
                for w in traj.waypoints.windows(2) {
                    let dt = w[1].0 - w[0].0;
                    assert!(dt > 0.0 && dt <= DEFAULT_PLAN_DT + 1e-12);
                    for (j, spec) in toy.joints().iter().enumerate() {
                        let v = (w[1].1 .0[j] - w[0].1 .0[j]).abs() / dt;
                        assert!(v <= spec.max_velocity * (1.0 + 1e-9));
                    }
                }
                for (_, q) in &traj.waypoints {
                    assert!(free(q));
                }
            }
            Err(Error::PathCollision { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn planner_refuses_paths_into_collision() {
    let toy = bundled::toy_finger();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let free = JointConfig(vec![0.0, 0.2, 0.2]);
    assert!(!check_self_collision(&toy, &free).unwrap().contains(&true));
    let mut tried = 0;
    while tried < 20 {
        let q = random_config(&mut rng, &toy);
        if !check_self_collision(&toy, &q).unwrap().contains(&true) {
            continue;
        }
        tried += 1;
        match plan_trajectory(&toy, &free, &q, DEFAULT_PLAN_DT) {
            Err(Error::PathCollision { fraction, links }) => {
                assert!(fraction > 0.0 && fraction <= 1.0);
                assert!(!links.is_empty());
            }
            other => panic!("expected a path collision, got {other:?}"),
        }
    }
}

#[test]
fn preview_commit_reaches_the_extracted_target() {
    let mut s = SessionState::new(setup(), metadata(0)).unwrap();
    let rot = s.robot_ee_pose().rotation;
    let frame = |t: f64, x: f64| InputFrame::new(t, RigidTransform::new(rot, Vector3::new(x, 0.0, 1.0)), [0.2; 27]);
    s.step(Event::InputTick(frame(0.0, 0.0))).unwrap();
    s.step(Event::PedalDown).unwrap();
    let mut t = 0.0;
    for k in 0..30 {
        t += 0.02;
        s.step(Event::InputTick(frame(t, 0.002 * k as f64))).unwrap();
    }
    let target = s.phantom_config().clone();
    s.step(Event::PedalUp).unwrap();
    assert_eq!(s.phase(), Phase::Executing);
    while !s.trajectory_finished() {
        t += 0.02;
        s.step(Event::InputTick(frame(t, 0.0))).unwrap();
    }
    s.step(Event::TrajectoryDone).unwrap();
    let ee = forward_kinematics(&s.setup().model, s.robot_config()).unwrap()[bundled::ARM_FLANGE_JOINT];
    let expected = forward_kinematics(&s.setup().model, &target).unwrap()[bundled::ARM_FLANGE_JOINT];
    assert!(ee.translation_distance(&expected) < 1e-12);
}

#[test]
fn demo_files_round_trip() {
    let mut s = SessionState::new(setup(), metadata(3)).unwrap();
    let rot = s.robot_ee_pose().rotation;
    for k in 0..10 {
        let f = InputFrame::new(k as f64 * 0.1, RigidTransform::new(rot, Vector3::new(0.0, 0.01 * k as f64, 1.0)), [0.1; 27]);
        s.step(Event::InputTick(f)).unwrap();
    }
    let record = s.into_record();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("demo.jsonl");
    let counts = record.finalize(&path).unwrap();
    assert_eq!(counts.live, 10);
    let back = DemoRecord::load(&path).unwrap();
    assert_eq!(back, record);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), record.to_jsonl());
}
