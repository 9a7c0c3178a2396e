//! Models shipped with the crate.

use crate::se3::RigidTransform;

use super::model::{JointConfig, KinematicModel};

pub const HAND16_JSON: &str = include_str!("../../models/hand16.json");
pub const ARM6_JSON: &str = include_str!("../../models/arm6.json");
pub const TOY_FINGER_JSON: &str = include_str!("../../models/toy_finger.json");

/// Index of the arm's flange joint, where the hand is mounted.
pub const ARM_FLANGE_JOINT: usize = 5;
pub const ARM_DOF: usize = 6;
pub const HAND_DOF: usize = 16;

/// Four-finger, 16-joint hand: index, middle, ring, thumb with four joints each.
pub fn hand16() -> KinematicModel {
    KinematicModel::from_json_str(HAND16_JSON).expect("bundled hand model is valid")
}

/// Six-joint arm ending in a flange frame.
pub fn arm6() -> KinematicModel {
    KinematicModel::from_json_str(ARM6_JSON).expect("bundled arm model is valid")
}

/// Three-link planar finger that can fold onto itself.
pub fn toy_finger() -> KinematicModel {
    KinematicModel::from_json_str(TOY_FINGER_JSON).expect("bundled finger model is valid")
}

/// Palm pose relative to the arm flange.
pub fn hand_mount() -> RigidTransform {
    RigidTransform::from_translation(0.03, 0.0, 0.0)
}

/// Arm with the hand mounted on its flange; joints are `[arm(6), hand(16)]`.
pub fn arm_with_hand() -> KinematicModel {
    arm6()
        .attach(ARM_FLANGE_JOINT, hand_mount(), &hand16())
        .expect("bundled models attach")
}

/// Arm posture used when a session starts.
pub fn arm_home() -> JointConfig {
    JointConfig(vec![0.0, 0.4, -1.0, 0.0, 0.6, 0.0])
}
