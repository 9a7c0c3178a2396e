//! Random kinematic trees for fuzzing, property tests and benchmarks.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::se3::RigidTransform;

use super::model::{Capsule, JointConfig, JointSpec, KinematicModel, LinkSpec};

fn unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::from_fn(|_, _| StandardNormal.sample(rng));
        let n: f64 = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> UnitQuaternion<f64> {
    loop {
        let q = Quaternion::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        if q.norm() > 1e-6 {
            return UnitQuaternion::from_quaternion(q);
        }
    }
}

/// A tree of `n_joints` revolute joints (possibly several hanging off the
/// root) with joint indices shuffled so parents may come after children, and
/// `n_links` capsules attached to random joints.
pub fn random_model<R: Rng + ?Sized>(rng: &mut R, n_joints: usize, n_links: usize) -> KinematicModel {
    assert!(n_joints > 0, "a model needs at least one joint");
    // parents in creation order, then relabel through a permutation
    let created: Vec<Option<usize>> = (0..n_joints)
        .map(|k| (k > 0 && rng.random_bool(0.85)).then(|| rng.random_range(0..k)))
        .collect();
    let mut perm: Vec<usize> = (0..n_joints).collect();
    perm.shuffle(rng);
    let mut slots: Vec<Option<JointSpec>> = vec![None; n_joints];
    for (k, parent) in created.iter().enumerate() {
        let translation = Vector3::from_fn(|_, _| rng.random_range(-0.3..0.3));
        slots[perm[k]] = Some(JointSpec {
            name: format!("j{}", perm[k]),
            parent: parent.map(|p| perm[p]),
            origin: RigidTransform::new(random_rotation(rng), translation),
            axis: unit_vector(rng),
            lower: rng.random_range(-3.0..-0.1),
            upper: rng.random_range(0.1..3.0),
            max_velocity: rng.random_range(0.5..5.0),
        });
    }
    let joints: Vec<JointSpec> = slots.into_iter().map(|j| j.expect("every slot filled")).collect();
    let links = (0..n_links)
        .map(|i| LinkSpec {
            name: format!("l{i}"),
            joint: rng.random_range(0..n_joints),
            capsule: Capsule::new(
                Vector3::from_fn(|_, _| rng.random_range(-0.1..0.1)),
                Vector3::from_fn(|_, _| rng.random_range(-0.1..0.1)),
                rng.random_range(0.01..0.05),
            ),
            mask: Vec::new(),
        })
        .collect();
    KinematicModel::new("base", joints, links).expect("random model is valid by construction")
}

/// Uniform configuration within the model's limits.
pub fn random_config<R: Rng + ?Sized>(rng: &mut R, model: &KinematicModel) -> JointConfig {
    JointConfig(model.joints().iter().map(|j| rng.random_range(j.lower..j.upper)).collect())
}
