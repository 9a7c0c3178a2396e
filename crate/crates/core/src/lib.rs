//! Core of a hardware-free assisted-teleoperation stack.
//!
//! Human wrist and glove streams are retargeted onto a simulated arm and
//! dexterous hand, corrected away from self-collision by a pair of small
//! networks, previewed as a detached "phantom" configuration and committed
//! to execution through a pedal-driven state machine that records clean
//! demonstrations.
//!
//! Module map:
//! - [`kinematics`]: kinematic trees, FK, capsule collision oracle, IK.
//! - [`retarget`]: wrist→end-effector and glove→hand joint mapping.
//! - [`nn`] / [`collision_net`]: MLPs, losses, training, runtime correction.
//! - [`calibration`]: camera/tag frame chain and pinhole projection.
//! - [`fsm`]: preview/execute state machine, planner, demo recorder.
//! - [`io_streams`]: trace playback and scripted input sources.

pub mod calibration;
pub mod collision_net;
mod error;
pub mod exec;
pub mod fsm;
pub mod io_streams;
pub mod kinematics;
pub mod nn;
pub mod retarget;
pub mod se3;

pub use error::{Error, Result};
pub use exec::Exec;
pub use kinematics::{JointConfig, KinematicModel};
pub use se3::RigidTransform;
