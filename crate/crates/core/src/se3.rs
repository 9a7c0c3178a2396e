//! Rigid transforms in SE(3).
//!
//! A [`RigidTransform`] maps points from a child frame into a parent frame:
//! `p_parent = R * p_child + t`. Composition reads left to right along a
//! frame chain, so `a.compose(&b)` is "first `a`, then `b` expressed in the
//! frame `a` lands in", i.e. the 4x4 product `A * B`.

use nalgebra::{Matrix4, Quaternion, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Tolerance on the quaternion norm accepted from external documents.
pub const QUAT_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(UnitQuaternion::identity(), Vector3::new(x, y, z))
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>) -> Self {
        Self::new(rotation, Vector3::zeros())
    }

    /// Rotation of `angle` radians about a unit `axis`.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let axis = Unit::new_normalize(*axis);
        Self::from_rotation(UnitQuaternion::from_axis_angle(&axis, angle))
    }

    /// Builds a transform from `[w, x, y, z]` and `[x, y, z]`, rejecting
    /// quaternions whose norm is off by more than [`QUAT_NORM_TOL`].
    pub fn from_parts(quat_wxyz: [f64; 4], pos: [f64; 3]) -> Option<Self> {
        let [w, x, y, z] = quat_wxyz;
        let q = Quaternion::new(w, x, y, z);
        if !quat_wxyz.iter().chain(pos.iter()).all(|v| v.is_finite()) {
            return None;
        }
        if (q.norm() - 1.0).abs() > QUAT_NORM_TOL {
            return None;
        }
        // Already-unit inputs are kept bit for bit so that files round-trip.
        let rotation = if (q.norm_squared() - 1.0).abs() <= 8.0 * f64::EPSILON {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::new_normalize(q)
        };
        Some(Self::new(rotation, Vector3::new(pos[0], pos[1], pos[2])))
    }

    pub fn quat_wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn pos(&self) -> [f64; 3] {
        [self.translation.x, self.translation.y, self.translation.z]
    }

    /// `self * other`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let inv = self.rotation.inverse();
        RigidTransform {
            rotation: inv,
            translation: -(inv * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = self.rotation.to_homogeneous();
        m[(0, 3)] = self.translation.x;
        m[(1, 3)] = self.translation.y;
        m[(2, 3)] = self.translation.z;
        m
    }

    /// Rotation angle (radians) between two orientations.
    pub fn rotation_distance(&self, other: &RigidTransform) -> f64 {
        self.rotation.angle_to(&other.rotation)
    }

    pub fn translation_distance(&self, other: &RigidTransform) -> f64 {
        (self.translation - other.translation).norm()
    }
}

/// Wire form shared by every file format: `{"quat":[w,x,y,z], "pos":[x,y,z]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseDoc {
    pub quat: [f64; 4],
    pub pos: [f64; 3],
}

impl From<&RigidTransform> for PoseDoc {
    fn from(t: &RigidTransform) -> Self {
        PoseDoc {
            quat: t.quat_wxyz(),
            pos: t.pos(),
        }
    }
}

impl From<RigidTransform> for PoseDoc {
    fn from(t: RigidTransform) -> Self {
        PoseDoc::from(&t)
    }
}

impl PoseDoc {
    pub fn to_transform(&self) -> Option<RigidTransform> {
        RigidTransform::from_parts(self.quat, self.pos)
    }
}

impl Serialize for RigidTransform {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PoseDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = PoseDoc::deserialize(d)?;
        doc.to_transform().ok_or_else(|| {
            serde::de::Error::custom("pose quaternion must be finite with unit norm (1e-9)")
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn identity_is_neutral() {
        let x = RigidTransform::new(
            UnitQuaternion::from_euler_angles(0.1, -0.4, 2.0),
            Vector3::new(1.0, -2.0, 0.5),
        );
        let id = RigidTransform::identity();
        assert_eq!(id.compose(&x), x);
        assert_eq!(x.compose(&id), x);
    }

    #[test]
    fn pure_translations_add() {
        let a = RigidTransform::from_translation(1.0, 2.0, 3.0);
        let b = RigidTransform::from_translation(-0.5, 0.25, 4.0);
        let c = a.compose(&b);
        assert_eq!(c.pos(), [0.5, 2.25, 7.0]);
        assert_eq!(c.rotation, UnitQuaternion::identity());
    }

    #[test]
    fn quarter_turn_maps_x_to_y() {
        let r = RigidTransform::from_axis_angle(&Vector3::z(), FRAC_PI_2);
        let p = r.transform_point(&Vector3::x());
        assert!((p - Vector3::y()).norm() < 1e-15);
    }

    #[test]
    fn rejects_non_unit_quaternion() {
        assert!(RigidTransform::from_parts([1.0, 0.1, 0.0, 0.0], [0.0; 3]).is_none());
        assert!(RigidTransform::from_parts([1.0, 0.0, 0.0, 0.0], [f64::NAN, 0.0, 0.0]).is_none());
        assert!(RigidTransform::from_parts([1.0, 0.0, 0.0, 0.0], [0.0; 3]).is_some());
    }

    #[test]
    fn serde_uses_wxyz() {
        let t = RigidTransform::from_translation(1.0, 2.0, 3.0);
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, r#"{"quat":[1.0,0.0,0.0,0.0],"pos":[1.0,2.0,3.0]}"#);
        let back: RigidTransform = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }
}
