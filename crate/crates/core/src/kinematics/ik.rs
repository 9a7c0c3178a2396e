//! Damped least-squares inverse kinematics for one end-effector frame.
//!
//! Used to turn end-effector pose targets into arm joint angles. Iterates
//! from a warm start, clamps to joint limits after every step, and returns
//! the best iterate found when the target is unreachable.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{Error, Result};
use crate::se3::RigidTransform;

use super::fk::fk_unchecked;
use super::model::{JointConfig, KinematicModel};

#[derive(Debug, Clone, Copy)]
pub struct IkOptions {
    pub max_iterations: usize,
    /// Damping factor λ.
    pub damping: f64,
    /// Meters of position error equivalent to one radian of orientation error.
    pub orientation_weight: f64,
    pub position_tolerance: f64,
    pub orientation_tolerance: f64,
    /// Upper bound on any single joint update (rad).
    pub max_step: f64,
}

impl Default for IkOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            damping: 0.05,
            orientation_weight: 0.2,
            position_tolerance: 1e-5,
            orientation_tolerance: 1e-4,
            max_step: 0.3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IkSolution {
    pub q: JointConfig,
    pub position_error: f64,
    pub orientation_error: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Solves for the joints that place frame `ee_joint` at `target`.
///
/// Only joints whose subtree contains `ee_joint` move; every other entry of
/// `seed` is returned unchanged.
pub fn solve_ik(
    model: &KinematicModel,
    ee_joint: usize,
    target: &RigidTransform,
    seed: &JointConfig,
    opts: &IkOptions,
) -> Result<IkSolution> {
    model.check_len(seed)?;
    if ee_joint >= model.dof() {
        return Err(Error::InvalidParameter(format!("end-effector joint {ee_joint} does not exist")));
    }
    let chain: Vec<usize> = (0..model.dof()).filter(|&j| model.in_subtree(j, ee_joint)).collect();
    let joints = model.joints();
    let mut q = seed.clamped(model).0;

    let errors = |q: &[f64]| -> (Vec<RigidTransform>, Vector3<f64>, Vector3<f64>) {
        let frames = fk_unchecked(model, q);
        let ee = frames[ee_joint];
        let ep = target.translation - ee.translation;
        let ew = (target.rotation * ee.rotation.inverse()).scaled_axis();
        (frames, ep, ew)
    };

    let (mut frames, mut ep, mut ew) = errors(&q);
    let cost = |ep: &Vector3<f64>, ew: &Vector3<f64>| ep.norm_squared() + (opts.orientation_weight * ew.norm()).powi(2);
    let mut best = (q.clone(), ep.norm(), ew.norm(), cost(&ep, &ew));
    let mut iterations = 0;
    let mut lambda = opts.damping;

    while iterations < opts.max_iterations {
        if ep.norm() <= opts.position_tolerance && ew.norm() <= opts.orientation_tolerance {
            break;
        }
        iterations += 1;
        let ee_pos = frames[ee_joint].translation;
        let mut jac = DMatrix::<f64>::zeros(6, chain.len());
        for (c, &j) in chain.iter().enumerate() {
            let z = frames[j].transform_vector(&joints[j].axis);
            let lin = z.cross(&(ee_pos - frames[j].translation));
            for r in 0..3 {
                jac[(r, c)] = lin[r];
                jac[(r + 3, c)] = opts.orientation_weight * z[r];
            }
        }
        let err = DVector::from_vec(vec![
            ep.x,
            ep.y,
            ep.z,
            opts.orientation_weight * ew.x,
            opts.orientation_weight * ew.y,
            opts.orientation_weight * ew.z,
        ]);
        let jjt = &jac * jac.transpose() + DMatrix::<f64>::identity(6, 6) * (lambda * lambda);
        let Some(y) = jjt.lu().solve(&err) else {
            break;
        };
        let mut dq = jac.transpose() * y;
        let peak = dq.amax();
        if peak > opts.max_step {
            dq *= opts.max_step / peak;
        }
        let mut trial = q.clone();
        for (c, &j) in chain.iter().enumerate() {
            trial[j] = (trial[j] + dq[c]).clamp(joints[j].lower, joints[j].upper);
        }
        let (f, p, w) = errors(&trial);
        let c = cost(&p, &w);
        if c < best.3 {
            q = trial;
            frames = f;
            ep = p;
            ew = w;
            best = (q.clone(), ep.norm(), ew.norm(), c);
            lambda = (lambda * 0.5).max(opts.damping * 0.1);
        } else {
            lambda *= 4.0;
            if lambda > 1e3 {
                break;
            }
        }
    }

    let converged = best.1 <= opts.position_tolerance && best.2 <= opts.orientation_tolerance;
    Ok(IkSolution {
        q: JointConfig(best.0),
        position_error: best.1,
        orientation_error: best.2,
        iterations,
        converged,
    })
}
