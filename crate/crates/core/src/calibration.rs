//! Camera/tag/base frame chain.
//!
//! Acquisition order is fixed:
//! 1. `base -> fixed_cam` from hand-eye calibration (an input here),
//! 2. a tag observation from the fixed camera gives `base -> tag`,
//! 3. a tag observation from the floating camera gives `base -> float_cam`.
//!
//! Step 3 is refused until step 2 has happened. The floating camera re-solves
//! on every observation it reports.

use std::collections::BTreeMap;

use nalgebra::{Unit, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se3::RigidTransform;

pub const BASE: &str = "base";
pub const FIXED_CAM: &str = "fixed_cam";
pub const TAG: &str = "tag";
pub const FLOAT_CAM: &str = "float_cam";
pub const WORLD: &str = "world";

/// How an edge was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    HandEye,
    TagObservation,
    Derived,
}

/// A tag pose reported by a camera: `observer -> tag`.
#[derive(Debug, Clone, PartialEq)]
pub struct TagObservation {
    pub observer: String,
    pub tag_pose: RigidTransform,
    pub timestamp: f64,
    /// Rotation noise (rad) injected by synthetic harnesses; 0 for real data.
    pub noise_sigma: f64,
}

impl TagObservation {
    pub fn new(observer: impl Into<String>, tag_pose: RigidTransform, timestamp: f64) -> Self {
        Self {
            observer: observer.into(),
            tag_pose,
            timestamp,
            noise_sigma: 0.0,
        }
    }
}

/// `base -> tag` = `(base -> fixed_cam) * (fixed_cam -> tag)`.
pub fn solve_tag_to_base(hand_eye: &RigidTransform, obs: &TagObservation) -> Result<RigidTransform> {
    if obs.observer != FIXED_CAM {
        return Err(Error::FrameMismatch {
            expected: FIXED_CAM.into(),
            actual: obs.observer.clone(),
        });
    }
    Ok(hand_eye.compose(&obs.tag_pose))
}

/// `base -> float_cam` = `(base -> tag) * (float_cam -> tag)^-1`.
pub fn solve_float_to_base(tag_to_base: &RigidTransform, obs: &TagObservation) -> Result<RigidTransform> {
    if obs.observer != FLOAT_CAM {
        return Err(Error::FrameMismatch {
            expected: FLOAT_CAM.into(),
            actual: obs.observer.clone(),
        });
    }
    Ok(tag_to_base.compose(&obs.tag_pose.inverse()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// `from -> to`: maps points in `to` into `from`.
    pub transform: RigidTransform,
    pub provenance: Provenance,
}

/// Named frames with directed edges. Every stored edge also has its exact
/// inverse stored under the reversed key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameGraph {
    edges: BTreeMap<(String, String), Edge>,
}

impl FrameGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn edge(&self, from: &str, to: &str) -> Option<&Edge> {
        self.edges.get(&(from.to_string(), to.to_string()))
    }

    pub fn transform(&self, from: &str, to: &str) -> Option<RigidTransform> {
        if from == to {
            return Some(RigidTransform::identity());
        }
        self.edge(from, to).map(|e| e.transform)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&(String, String), &Edge)> {
        self.edges.iter()
    }

    fn insert(&mut self, from: &str, to: &str, transform: RigidTransform, provenance: Provenance) {
        self.edges.insert((from.into(), to.into()), Edge { transform, provenance });
        self.edges.insert(
            (to.into(), from.into()),
            Edge {
                transform: transform.inverse(),
                provenance,
            },
        );
    }

    /// Step 1: the hand-eye result `base -> fixed_cam`.
    pub fn set_hand_eye(&mut self, base_to_fixed: RigidTransform) {
        self.insert(BASE, FIXED_CAM, base_to_fixed, Provenance::HandEye);
    }

    /// Optional declared pose of the operator world frame in the base frame.
    pub fn set_world(&mut self, base_to_world: RigidTransform) {
        self.insert(BASE, WORLD, base_to_world, Provenance::Derived);
    }

    /// Step 2: fixed camera sees the tag.
    pub fn observe_from_fixed(&mut self, obs: &TagObservation) -> Result<RigidTransform> {
        let hand_eye = self
            .transform(BASE, FIXED_CAM)
            .ok_or_else(|| Error::AcquisitionOrder("hand-eye transform must be set before observing the tag".into()))?;
        let base_to_tag = solve_tag_to_base(&hand_eye, obs)?;
        self.insert(FIXED_CAM, TAG, obs.tag_pose, Provenance::TagObservation);
        self.insert(BASE, TAG, base_to_tag, Provenance::Derived);
        Ok(base_to_tag)
    }

    /// Step 3: floating camera sees the tag; re-solved on every call.
    pub fn observe_from_float(&mut self, obs: &TagObservation) -> Result<RigidTransform> {
        let base_to_tag = match self.edge(BASE, TAG) {
            Some(e) if e.provenance == Provenance::Derived => e.transform,
            _ => {
                return Err(Error::AcquisitionOrder(
                    "base -> tag must be derived from the fixed camera before the floating camera".into(),
                ))
            }
        };
        let base_to_float = solve_float_to_base(&base_to_tag, obs)?;
        self.insert(FLOAT_CAM, TAG, obs.tag_pose, Provenance::TagObservation);
        self.insert(BASE, FLOAT_CAM, base_to_float, Provenance::Derived);
        Ok(base_to_float)
    }

    /// Dispatches on the observer frame.
    pub fn observe(&mut self, obs: &TagObservation) -> Result<RigidTransform> {
        match obs.observer.as_str() {
            FIXED_CAM => self.observe_from_fixed(obs),
            FLOAT_CAM => self.observe_from_float(obs),
            other => Err(Error::FrameMismatch {
                expected: format!("{FIXED_CAM} or {FLOAT_CAM}"),
                actual: other.into(),
            }),
        }
    }

    /// Composes edges along `path` (`path[0] -> path[1] -> ...`).
    pub fn compose_path(&self, path: &[&str]) -> Option<RigidTransform> {
        let mut acc = RigidTransform::identity();
        for w in path.windows(2) {
            acc = acc.compose(&self.transform(w[0], w[1])?);
        }
        Some(acc)
    }

    /// Every frame's pose in the base frame, for snapshots.
    pub fn snapshot(&self) -> BTreeMap<String, RigidTransform> {
        let mut out = BTreeMap::new();
        out.insert(BASE.to_string(), RigidTransform::identity());
        for ((from, to), e) in &self.edges {
            if from == BASE {
                out.insert(to.clone(), e.transform);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

/// Pinhole projection of a base-frame point seen by a camera at `base_to_cam`
/// (camera looks along its +z).
pub fn project_point(k: &Intrinsics, base_to_cam: &RigidTransform, point: &Vector3<f64>) -> Result<(f64, f64)> {
    let p = base_to_cam.inverse().transform_point(point);
    if p.z <= 0.0 {
        return Err(Error::BehindCamera { depth: p.z });
    }
    Ok((k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy))
}

/// Ground truth for a synthetic rig and the observations it would produce.
#[derive(Debug, Clone)]
pub struct SyntheticRig {
    pub base_to_fixed: RigidTransform,
    pub base_to_tag: RigidTransform,
    pub base_to_float: RigidTransform,
}

impl SyntheticRig {
    /// Random rig with frames within `extent` meters of the base.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, extent: f64) -> Self {
        Self {
            base_to_fixed: random_transform(rng, extent),
            base_to_tag: random_transform(rng, extent),
            base_to_float: random_transform(rng, extent),
        }
    }

    pub fn fixed_observation(&self) -> TagObservation {
        TagObservation::new(FIXED_CAM, self.base_to_fixed.inverse().compose(&self.base_to_tag), 0.0)
    }

    pub fn float_observation(&self) -> TagObservation {
        TagObservation::new(FLOAT_CAM, self.base_to_float.inverse().compose(&self.base_to_tag), 0.0)
    }

    /// Moves the floating camera to a new pose.
    pub fn move_float(&mut self, base_to_float: RigidTransform) {
        self.base_to_float = base_to_float;
    }
}

pub fn random_transform<R: Rng + ?Sized>(rng: &mut R, extent: f64) -> RigidTransform {
    let axis = random_unit(rng);
    let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    RigidTransform::new(
        UnitQuaternion::from_axis_angle(&axis, angle),
        Vector3::new(
            rng.random_range(-extent..extent),
            rng.random_range(-extent..extent),
            rng.random_range(-extent..extent),
        ),
    )
}

fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Unit<Vector3<f64>> {
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    loop {
        let v = Vector3::new(n.sample(rng), n.sample(rng), n.sample(rng));
        if v.norm() > 1e-9 {
            return Unit::new_normalize(v);
        }
    }
}

/// Isotropic Gaussian perturbation: rotation by an axis-angle vector with
/// per-component std `sigma_rot` (rad), translation with std `sigma_trans` (m).
pub fn perturb<R: Rng + ?Sized>(t: &RigidTransform, sigma_rot: f64, sigma_trans: f64, rng: &mut R) -> RigidTransform {
    let draw = |rng: &mut R, s: f64| {
        if s > 0.0 {
            let n = Normal::new(0.0, s).expect("finite sigma");
            Vector3::new(n.sample(rng), n.sample(rng), n.sample(rng))
        } else {
            Vector3::zeros()
        }
    };
    let dr = UnitQuaternion::from_scaled_axis(draw(rng, sigma_rot));
    let dt = draw(rng, sigma_trans);
    RigidTransform::new(dr * t.rotation, t.translation + dt)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn identity_chain() {
        let mut g = FrameGraph::new();
        g.set_hand_eye(RigidTransform::identity());
        g.observe(&TagObservation::new(FIXED_CAM, RigidTransform::identity(), 0.0)).unwrap();
        let f = g.observe(&TagObservation::new(FLOAT_CAM, RigidTransform::identity(), 0.0)).unwrap();
        assert_eq!(f, RigidTransform::identity());
    }

    #[test]
    fn float_before_fixed_is_order_error() {
        let mut g = FrameGraph::new();
        g.set_hand_eye(RigidTransform::identity());
        let err = g
            .observe_from_float(&TagObservation::new(FLOAT_CAM, RigidTransform::identity(), 0.0))
            .unwrap_err();
        assert!(matches!(err, Error::AcquisitionOrder(_)));
        let mut g = FrameGraph::new();
        let err = g
            .observe_from_fixed(&TagObservation::new(FIXED_CAM, RigidTransform::identity(), 0.0))
            .unwrap_err();
        assert!(matches!(err, Error::AcquisitionOrder(_)));
    }

    #[test]
    fn wrong_observer_is_frame_mismatch() {
        let err = solve_tag_to_base(
            &RigidTransform::identity(),
            &TagObservation::new(FLOAT_CAM, RigidTransform::identity(), 0.0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::FrameMismatch { .. }));
        let mut g = FrameGraph::new();
        assert!(g.observe(&TagObservation::new("wrist_cam", RigidTransform::identity(), 0.0)).is_err());
    }

    #[test]
    fn recovers_ground_truth_and_loops_close() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rig = SyntheticRig::random(&mut rng, 1.5);
        let mut g = FrameGraph::new();
        g.set_hand_eye(rig.base_to_fixed);
        g.observe(&rig.fixed_observation()).unwrap();
        let f = g.observe(&rig.float_observation()).unwrap();
        assert!(f.translation_distance(&rig.base_to_float) < 1e-9);
        assert!(f.rotation_distance(&rig.base_to_float) < 1e-9);
        let lp = g.compose_path(&[BASE, FIXED_CAM, TAG, FLOAT_CAM, BASE]).unwrap();
        assert!(lp.translation.norm() < 1e-9 && lp.rotation.angle() < 1e-9);
        // reverse edges are exact inverses
        let e = g.transform(BASE, FLOAT_CAM).unwrap().compose(&g.transform(FLOAT_CAM, BASE).unwrap());
        assert!(e.translation.norm() < 1e-12 && e.rotation.angle() < 1e-12);
    }

    #[test]
    fn moving_float_camera_keeps_tag() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rig = SyntheticRig::random(&mut rng, 1.0);
        let mut g = FrameGraph::new();
        g.set_hand_eye(rig.base_to_fixed);
        let tag = g.observe(&rig.fixed_observation()).unwrap();
        for _ in 0..10 {
            rig.move_float(random_transform(&mut rng, 1.0));
            let f = g.observe(&rig.float_observation()).unwrap();
            assert!(f.translation_distance(&rig.base_to_float) < 1e-9);
            assert_eq!(g.transform(BASE, TAG).unwrap(), tag);
        }
    }

    #[test]
    fn projection_examples() {
        let k = Intrinsics {
            fx: 100.0,
            fy: 100.0,
            cx: 320.0,
            cy: 240.0,
        };
        let cam = RigidTransform::identity();
        assert_eq!(project_point(&k, &cam, &Vector3::new(0.0, 0.0, 1.0)).unwrap(), (320.0, 240.0));
        let (u, v) = project_point(&k, &cam, &Vector3::new(0.1, 0.0, 1.0)).unwrap();
        assert!((u - 330.0).abs() < 1e-12 && v == 240.0);
        assert!(matches!(
            project_point(&k, &cam, &Vector3::new(0.0, 0.0, -1.0)),
            Err(Error::BehindCamera { .. })
        ));
    }
}
