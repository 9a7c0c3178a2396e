use ndarray::{Array1, Array2, Zip};

use super::mlp::{Gradients, Mlp};

/// Adam with bias-corrected first and second moments.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &Mlp, learning_rate: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            learning_rate,
            beta1,
            beta2,
            epsilon: 1e-8,
            step: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, net: &mut Mlp, grads: &Gradients) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);
        for (l, layer) in net.layers_mut().iter_mut().enumerate() {
            update_tensor2(&mut layer.weights, &grads.weights[l], &mut self.m.weights[l], &mut self.v.weights[l], b1, b2, lr, eps, c1, c2);
            update_tensor1(&mut layer.bias, &grads.bias[l], &mut self.m.bias[l], &mut self.v.bias[l], b1, b2, lr, eps, c1, c2);
        }
    }
}

#[inline]
fn adam_step(p: &mut f64, g: f64, m: &mut f64, v: &mut f64, b1: f64, b2: f64, lr: f64, eps: f64, c1: f64, c2: f64) {
    *m = b1 * *m + (1.0 - b1) * g;
    *v = b2 * *v + (1.0 - b2) * g * g;
    let mh = *m / c1;
    let vh = *v / c2;
    *p -= lr * mh / (vh.sqrt() + eps);
}

#[allow(clippy::too_many_arguments)]
fn update_tensor2(p: &mut Array2<f64>, g: &Array2<f64>, m: &mut Array2<f64>, v: &mut Array2<f64>, b1: f64, b2: f64, lr: f64, eps: f64, c1: f64, c2: f64) {
    Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| adam_step(p, g, m, v, b1, b2, lr, eps, c1, c2));
}

#[allow(clippy::too_many_arguments)]
fn update_tensor1(p: &mut Array1<f64>, g: &Array1<f64>, m: &mut Array1<f64>, v: &mut Array1<f64>, b1: f64, b2: f64, lr: f64, eps: f64, c1: f64, c2: f64) {
    Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| adam_step(p, g, m, v, b1, b2, lr, eps, c1, c2));
}
