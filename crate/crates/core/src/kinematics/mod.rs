//! Kinematic tree, forward kinematics and capsule-based self-collision.

pub mod bundled;
mod collision;
mod fk;
mod ik;
mod model;
pub mod random;

pub use collision::{
    capsule_distance, check_self_collision, closest_segment_params, colliding_pairs, is_collision_free,
    min_clearance, world_capsules,
};
pub(crate) use collision::labels_unchecked;
pub use fk::forward_kinematics;
pub(crate) use fk::fk_unchecked;
pub use ik::{solve_ik, IkOptions, IkSolution};
pub use model::{load_model, Capsule, JointConfig, JointSpec, KinematicModel, LinkSpec};
