//! Capsule distance and the geometric self-collision oracle.

use nalgebra::Vector3;

use crate::error::Result;

use super::fk::fk_unchecked;
use super::model::{Capsule, JointConfig, KinematicModel};

const EPS: f64 = 1e-12;

/// Closest points between segments `p1q1` and `p2q2`, as parameters `(s, t)`
/// in `[0, 1]` and the squared distance between the points.
pub fn closest_segment_params(
    p1: &Vector3<f64>,
    q1: &Vector3<f64>,
    p2: &Vector3<f64>,
    q2: &Vector3<f64>,
) -> (f64, f64, f64) {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);

    let (s, t) = if a <= EPS && e <= EPS {
        (0.0, 0.0)
    } else if a <= EPS {
        (0.0, (f / e).clamp(0.0, 1.0))
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            ((-c / a).clamp(0.0, 1.0), 0.0)
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s = if denom > EPS * a * e {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                // parallel: any s works, pick an end and fix t from it
                0.0
            };
            let mut t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
            (s, t)
        }
    };
    let c1 = p1 + d1 * s;
    let c2 = p2 + d2 * t;
    (s, t, (c1 - c2).norm_squared())
}

/// Minimum axis-to-axis distance minus the radii sum. Negative values mean
/// the capsules overlap; the magnitude is a lower bound on penetration depth.
pub fn capsule_distance(a: &Capsule, b: &Capsule) -> f64 {
    let (_, _, d2) = closest_segment_params(&a.a, &a.b, &b.a, &b.b);
    d2.sqrt() - (a.radius + b.radius)
}

/// Every link capsule in the root frame for configuration `q`.
pub fn world_capsules(model: &KinematicModel, q: &JointConfig) -> Result<Vec<Capsule>> {
    model.check_len(q)?;
    Ok(world_capsules_unchecked(model, q.as_slice()))
}

pub(crate) fn world_capsules_unchecked(model: &KinematicModel, q: &[f64]) -> Vec<Capsule> {
    let frames = fk_unchecked(model, q);
    model
        .links()
        .iter()
        .map(|l| l.capsule.transformed(&frames[l.joint]))
        .collect()
}

/// One label per link: true when the link's capsule overlaps any capsule it
/// is not masked against.
pub fn check_self_collision(model: &KinematicModel, q: &JointConfig) -> Result<Vec<bool>> {
    model.check_len(q)?;
    Ok(labels_unchecked(model, q.as_slice()))
}

pub(crate) fn labels_unchecked(model: &KinematicModel, q: &[f64]) -> Vec<bool> {
    let caps = world_capsules_unchecked(model, q);
    let mut labels = vec![false; caps.len()];
    for &(i, j) in model.collision_pairs() {
        if capsule_distance(&caps[i], &caps[j]) < 0.0 {
            labels[i] = true;
            labels[j] = true;
        }
    }
    labels
}

/// Colliding link pairs `(i, j)`, `i < j`.
pub fn colliding_pairs(model: &KinematicModel, q: &JointConfig) -> Result<Vec<(usize, usize)>> {
    model.check_len(q)?;
    let caps = world_capsules_unchecked(model, q.as_slice());
    Ok(model
        .collision_pairs()
        .iter()
        .copied()
        .filter(|&(i, j)| capsule_distance(&caps[i], &caps[j]) < 0.0)
        .collect())
}

/// True when no link collides.
pub fn is_collision_free(model: &KinematicModel, q: &JointConfig) -> Result<bool> {
    Ok(!check_self_collision(model, q)?.into_iter().any(|c| c))
}

/// Smallest signed clearance over all tested pairs (`+inf` with no pairs).
pub fn min_clearance(model: &KinematicModel, q: &JointConfig) -> Result<f64> {
    model.check_len(q)?;
    let caps = world_capsules_unchecked(model, q.as_slice());
    Ok(model
        .collision_pairs()
        .iter()
        .map(|&(i, j)| capsule_distance(&caps[i], &caps[j]))
        .fold(f64::INFINITY, f64::min))
}
