//! Loss functions and their gradients.

use ndarray::{Array2, ArrayView2, Zip};

/// Probabilities are clipped this far away from 0 and 1 inside the logarithm.
pub const BCE_CLIP: f64 = 1e-7;

fn clip(p: f64) -> f64 {
    p.clamp(BCE_CLIP, 1.0 - BCE_CLIP)
}

/// Mean binary cross-entropy over the `m` outputs of one sample.
pub fn bce(probs: &[f64], labels: &[bool]) -> f64 {
    assert_eq!(probs.len(), labels.len(), "probs and labels differ in length");
    let m = probs.len() as f64;
    probs
        .iter()
        .zip(labels)
        .map(|(&p, &t)| {
            let p = clip(p);
            if t {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / m
}

/// Batch BCE (mean over samples of the per-sample mean) and its gradient with
/// respect to the sigmoid pre-activation `z`, where `probs = sigmoid(z)`.
///
/// Inside the clip band the fused derivative is `(p - t) / (m B)`; outside it
/// the clipped loss is flat and the gradient is zero.
pub fn bce_batch_with_grad(probs: ArrayView2<f64>, targets: ArrayView2<f64>) -> (f64, Array2<f64>) {
    let (b, m) = probs.dim();
    let scale = 1.0 / (b * m) as f64;
    let mut total = 0.0;
    let mut grad = Array2::zeros((b, m));
    Zip::from(&mut grad).and(probs).and(targets).for_each(|g, &p, &t| {
        let pc = clip(p);
        total += -(t * pc.ln() + (1.0 - t) * (1.0 - pc).ln());
        *g = if p > BCE_CLIP && p < 1.0 - BCE_CLIP { (p - t) * scale } else { 0.0 };
    });
    (total * scale, grad)
}

/// Mean squared error over the entries of one vector.
pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "vectors differ in length");
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}
