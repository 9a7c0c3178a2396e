//! Slow, independent reference computations for the test suites.
//!
//! Nothing here shares code with `phantom-core`: transforms are plain 4×4
//! arrays built from first principles, distances come from exhaustive grids
//! and derivatives from central differences.

pub type Mat4 = [[f64; 4]; 4];

pub fn identity() -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn matmul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

/// Homogeneous matrix of a unit quaternion `[w, x, y, z]` and a translation.
pub fn from_quat_pos(q: [f64; 4], p: [f64; 3]) -> Mat4 {
    let [w, x, y, z] = q;
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y), p[0]],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x), p[1]],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y), p[2]],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

/// Rodrigues rotation `I + sin(t) K + (1 - cos(t)) K^2` about a unit axis.
pub fn axis_angle(axis: [f64; 3], angle: f64) -> Mat4 {
    let [x, y, z] = axis;
    let k = [[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]];
    let mut k2 = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k2[i][j] = (0..3).map(|m| k[i][m] * k[m][j]).sum();
        }
    }
    let (s, c) = angle.sin_cos();
    let mut r = identity();
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] += s * k[i][j] + (1.0 - c) * k2[i][j];
        }
    }
    r
}

/// Joint description for [`tree_fk`].
#[derive(Debug, Clone, PartialEq)]
pub struct TreeJoint {
    pub parent: Option<usize>,
    pub origin_quat: [f64; 4],
    pub origin_pos: [f64; 3],
    pub axis: [f64; 3],
}

/// Pose of every joint frame: walk each joint's ancestor chain to the root
/// and multiply `origin * rotation` factors from the root down.
pub fn tree_fk(joints: &[TreeJoint], q: &[f64]) -> Vec<Mat4> {
    assert_eq!(joints.len(), q.len());
    (0..joints.len())
        .map(|i| {
            let mut chain = vec![i];
            let mut cur = joints[i].parent;
            while let Some(p) = cur {
                assert!(chain.len() <= joints.len(), "cycle in tree");
                chain.push(p);
                cur = joints[p].parent;
            }
            chain.iter().rev().fold(identity(), |acc, &j| {
                let local = matmul(
                    &from_quat_pos(joints[j].origin_quat, joints[j].origin_pos),
                    &axis_angle(joints[j].axis, q[j]),
                );
                matmul(&acc, &local)
            })
        })
        .collect()
}

pub fn max_abs_diff(a: &Mat4, b: &Mat4) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

/// Points per axis of each grid stage.
pub const GRID: usize = 1000;

fn lerp3(a: &[f64; 3], b: &[f64; 3], s: f64) -> [f64; 3] {
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]), a[2] + s * (b[2] - a[2])]
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]) * (a[k] - b[k])).sum()
}

fn grid_min(p0: &[f64; 3], p1: &[f64; 3], q0: &[f64; 3], q1: &[f64; 3], s: (f64, f64), t: (f64, f64)) -> (f64, f64, f64) {
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let step = |r: (f64, f64), i: usize| r.0 + (r.1 - r.0) * i as f64 / (GRID - 1) as f64;
    for i in 0..GRID {
        let si = step(s, i);
        let a = lerp3(p0, p1, si);
        for j in 0..GRID {
            let tj = step(t, j);
            let d = dist2(&a, &lerp3(q0, q1, tj));
            if d < best.0 {
                best = (d, si, tj);
            }
        }
    }
    best
}

/// Distance between segments `p0p1` and `q0q1` by exhaustive search over a
/// `GRID x GRID` lattice of segment parameters, followed by a second lattice
/// of the same size spanning one coarse cell on each side of the best point.
/// The squared distance is convex in the parameters, so the true minimum
/// lies inside the refined window.
pub fn segment_distance_grid(p0: [f64; 3], p1: [f64; 3], q0: [f64; 3], q1: [f64; 3]) -> f64 {
    let h = 1.0 / (GRID - 1) as f64;
    let (_, s, t) = grid_min(&p0, &p1, &q0, &q1, (0.0, 1.0), (0.0, 1.0));
    let window = |c: f64| ((c - h).max(0.0), (c + h).min(1.0));
    let (d2, _, _) = grid_min(&p0, &p1, &q0, &q1, window(s), window(t));
    d2.sqrt()
}

/// Central difference `(f(x + h) - f(x - h)) / 2h`.
pub fn central_difference(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Largest [`relative_error`] between `analytic[k]` and the central
/// difference of `loss_at(k, delta)`, the loss with parameter `k` offset by
/// `delta`.
pub fn max_gradient_error(analytic: &[f64], mut loss_at: impl FnMut(usize, f64) -> f64, h: f64, floor: f64) -> f64 {
    (0..analytic.len())
        .map(|k| {
            let fd = central_difference(|d| loss_at(k, d), 0.0, h);
            relative_error(analytic[k], fd, floor)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_turn_about_z() {
        let r = axis_angle([0.0, 0.0, 1.0], std::f64::consts::FRAC_PI_2);
        assert!((r[0][1] + 1.0).abs() < 1e-15 && (r[1][0] - 1.0).abs() < 1e-15);
        let h = std::f64::consts::FRAC_PI_4;
        let q = from_quat_pos([h.cos(), 0.0, 0.0, h.sin()], [0.0; 3]);
        assert!(max_abs_diff(&q, &r) < 1e-15);
    }

    #[test]
    fn gradient_check_of_a_quadratic() {
        let x = [0.3, -1.2];
        let grad = [2.0 * x[0], 6.0 * x[1]];
        let err = max_gradient_error(&grad, |k, d| {
            let mut y = x;
            y[k] += d;
            y[0] * y[0] + 3.0 * y[1] * y[1]
        }, 1e-5, 1e-6);
        assert!(err < 1e-9);
    }

    #[test]
    fn grid_finds_parallel_gap() {
        let d = segment_distance_grid([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [1.0, 2.0, 0.0]);
        assert!((d - 2.0).abs() < 1e-12);
        let d = segment_distance_grid([-1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, -1.0, 0.5], [0.0, 1.0, 0.5]);
        assert!((d - 0.5).abs() < 1e-9);
    }
}
