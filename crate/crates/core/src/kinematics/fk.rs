use crate::error::Result;
use crate::se3::RigidTransform;

use super::model::{JointConfig, KinematicModel};

/// Pose of every joint frame in the root frame, indexed like `model.joints()`.
pub fn forward_kinematics(model: &KinematicModel, q: &JointConfig) -> Result<Vec<RigidTransform>> {
    model.check_len(q)?;
    Ok(fk_unchecked(model, q.as_slice()))
}

pub(crate) fn fk_unchecked(model: &KinematicModel, q: &[f64]) -> Vec<RigidTransform> {
    let joints = model.joints();
    let mut frames = vec![RigidTransform::identity(); joints.len()];
    for &i in model.order() {
        let j = &joints[i];
        let parent = match j.parent {
            Some(p) => frames[p],
            None => RigidTransform::identity(),
        };
        let motion = RigidTransform::from_axis_angle(&j.axis, q[i]);
        frames[i] = parent.compose(&j.origin).compose(&motion);
    }
    frames
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use nalgebra::Vector3;

    use super::*;
    use crate::kinematics::model::JointSpec;

    fn revolute(parent: Option<usize>, origin: RigidTransform) -> JointSpec {
        JointSpec {
            name: "j".into(),
            parent,
            origin,
            axis: Vector3::z(),
            lower: -3.0,
            upper: 3.0,
            max_velocity: 1.0,
        }
    }

    #[test]
    fn zero_config_single_joint_is_identity() {
        let m = KinematicModel::new("base", vec![revolute(None, RigidTransform::identity())], vec![]).unwrap();
        let f = forward_kinematics(&m, &JointConfig::zeros(1)).unwrap();
        assert_eq!(f[0], RigidTransform::identity());
    }

    #[test]
    fn quarter_turn_carries_child() {
        let m = KinematicModel::new(
            "base",
            vec![
                revolute(None, RigidTransform::identity()),
                revolute(Some(0), RigidTransform::from_translation(1.0, 0.0, 0.0)),
            ],
            vec![],
        )
        .unwrap();
        let f = forward_kinematics(&m, &JointConfig(vec![FRAC_PI_2, 0.0])).unwrap();
        // child origin (1,0,0) in the rotated parent lands on (0,1,0)
        assert!((f[1].translation - Vector3::y()).norm() < 1e-15);
        // a point one unit along the child's x also turns with it
        let p = f[1].transform_point(&Vector3::x());
        assert!((p - Vector3::new(0.0, 2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn wrong_length_is_dimension_error() {
        let m = KinematicModel::new("base", vec![revolute(None, RigidTransform::identity())], vec![]).unwrap();
        assert!(matches!(
            forward_kinematics(&m, &JointConfig::zeros(2)),
            Err(crate::Error::Dimension { expected: 1, actual: 2, .. })
        ));
    }
}
