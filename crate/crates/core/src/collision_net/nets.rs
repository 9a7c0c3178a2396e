//! The prediction (CPN) and correction (CCN) networks.
//!
//! Both take joint angles normalized onto `[-1, 1]` by the joint limits. The
//! CPN ends in one sigmoid per link. The CCN ends in `tanh`, scaled back onto
//! `[lower, upper]`, so every correction respects the joint limits.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{JointConfig, KinematicModel};
use crate::nn::{loss, Activation, Gradients, LayerDoc, Mlp, NetworkDoc, NETWORK_FORMAT_VERSION};

/// Hidden widths of the prediction network.
pub const CPN_HIDDEN: [usize; 2] = [128, 128];
/// Hidden widths of the correction network.
pub const CCN_HIDDEN: [usize; 2] = [256, 256];

/// Affine map between joint angles and `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointNormalizer {
    pub mid: Array1<f64>,
    pub half: Array1<f64>,
    lower: Array1<f64>,
    upper: Array1<f64>,
}

impl JointNormalizer {
    pub fn from_model(model: &KinematicModel) -> Self {
        Self::from_limits(&model.lower_limits(), &model.upper_limits()).expect("model limits are validated")
    }

    pub fn from_limits(lower: &[f64], upper: &[f64]) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::dim("joint limits", lower.len(), upper.len()));
        }
        if lower.iter().zip(upper).any(|(l, u)| !(u > l)) {
            return Err(Error::Network("joint limits must satisfy lower < upper".into()));
        }
        Ok(Self {
            mid: lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect(),
            half: lower.iter().zip(upper).map(|(l, u)| 0.5 * (u - l)).collect(),
            lower: Array1::from(lower.to_vec()),
            upper: Array1::from(upper.to_vec()),
        })
    }

    pub fn dim(&self) -> usize {
        self.mid.len()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.lower.to_vec()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.upper.to_vec()
    }

    pub fn normalize(&self, q: ArrayView2<f64>) -> Array2<f64> {
        (&q - &self.mid) / &self.half
    }

    /// Inverse of [`normalize`](Self::normalize), clamped so that rounding at
    /// a saturated output never leaves the limits.
    pub fn denormalize(&self, u: ArrayView2<f64>) -> Array2<f64> {
        let mut q = &u * &self.half + &self.mid;
        for mut row in q.rows_mut() {
            for ((v, l), h) in row.iter_mut().zip(&self.lower).zip(&self.upper) {
                *v = v.clamp(*l, *h);
            }
        }
        q
    }
}

fn as_row(q: &JointConfig) -> Array2<f64> {
    Array2::from_shape_vec((1, q.len()), q.0.clone()).expect("row shape")
}

/// Self-collision prediction network: one collision probability per link.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpn {
    pub net: Mlp,
    pub norm: JointNormalizer,
}

impl Cpn {
    /// `dof -> 128 -> 128 -> links` with rectified hidden layers.
    pub fn new<R: Rng + ?Sized>(model: &KinematicModel, rng: &mut R) -> Self {
        Self::with_hidden(model, &CPN_HIDDEN, rng)
    }

    pub fn with_hidden<R: Rng + ?Sized>(model: &KinematicModel, hidden: &[usize], rng: &mut R) -> Self {
        let sizes = layer_sizes(model.dof(), hidden, model.link_count());
        Self {
            net: Mlp::random(&sizes, Activation::Relu, Activation::Sigmoid, rng),
            norm: JointNormalizer::from_model(model),
        }
    }

    pub fn from_parts(net: Mlp, norm: JointNormalizer) -> Result<Self> {
        if net.output_activation() != Activation::Sigmoid {
            return Err(Error::Network("prediction network must end in a sigmoid".into()));
        }
        if net.input_dim() != norm.dim() {
            return Err(Error::dim("prediction network input", norm.dim(), net.input_dim()));
        }
        Ok(Self { net, norm })
    }

    pub fn dof(&self) -> usize {
        self.norm.dim()
    }

    pub fn link_count(&self) -> usize {
        self.net.output_dim()
    }

    /// Collision probability per link, each in (0, 1).
    pub fn forward(&self, q: &JointConfig) -> Result<Vec<f64>> {
        if q.len() != self.dof() {
            return Err(Error::dim("prediction network input", self.dof(), q.len()));
        }
        let u: Vec<f64> = q
            .0
            .iter()
            .zip(self.norm.mid.iter().zip(&self.norm.half))
            .map(|(v, (m, h))| (v - m) / h)
            .collect();
        self.net.forward_one(&u)
    }

    /// Batched probabilities; rows are configurations.
    pub fn forward_batch(&self, q: ArrayView2<f64>) -> Result<Array2<f64>> {
        if q.ncols() != self.dof() {
            return Err(Error::dim("prediction network input", self.dof(), q.ncols()));
        }
        self.net.forward(self.norm.normalize(q).view())
    }

    /// BCE loss of a batch and the parameter gradients.
    pub fn loss_and_grad(&self, q: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<(f64, Gradients)> {
        let cache = self.net.forward_cached(self.norm.normalize(q).view())?;
        let (l, d_z) = loss::bce_batch_with_grad(cache.output().view(), targets);
        let (g, _) = self.net.backward_from_pre(&cache, d_z);
        Ok((l, g))
    }

    /// Gradient of `sum_b sum_i w * p_i(q_b)` with respect to `q`, where `w`
    /// weights every probability equally. Returns the probabilities too.
    pub(crate) fn probability_input_grad(&self, q: ArrayView2<f64>, weight: f64) -> Result<(Array2<f64>, Array2<f64>)> {
        let cache = self.net.forward_cached(self.norm.normalize(q).view())?;
        let probs = cache.output().clone();
        let d_out = Array2::from_elem(probs.raw_dim(), weight);
        let (_, d_u) = self.net.backward(&cache, &d_out);
        Ok((probs, d_u / &self.norm.half))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_doc(path.as_ref(), &CollisionNetDoc::new(NetKind::Cpn, &self.net, &self.norm))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let doc = read_doc(path.as_ref())?;
        let (net, norm) = doc.into_parts(NetKind::Cpn)?;
        Self::from_parts(net, norm)
    }
}

/// Configuration correction network: maps a configuration to a nearby one
/// that the prediction network scores as safe.
#[derive(Debug, Clone, PartialEq)]
pub struct Ccn {
    pub net: Mlp,
    pub norm: JointNormalizer,
}

impl Ccn {
    /// `dof -> 256 -> 256 -> dof`, rectified hidden layers, tanh output.
    pub fn new<R: Rng + ?Sized>(model: &KinematicModel, rng: &mut R) -> Self {
        Self::with_hidden(model, &CCN_HIDDEN, rng)
    }

    pub fn with_hidden<R: Rng + ?Sized>(model: &KinematicModel, hidden: &[usize], rng: &mut R) -> Self {
        let sizes = layer_sizes(model.dof(), hidden, model.dof());
        Self {
            net: Mlp::random(&sizes, Activation::Relu, Activation::Tanh, rng),
            norm: JointNormalizer::from_model(model),
        }
    }

    pub fn from_parts(net: Mlp, norm: JointNormalizer) -> Result<Self> {
        if net.output_activation() != Activation::Tanh {
            return Err(Error::Network("correction network must end in tanh".into()));
        }
        if net.input_dim() != norm.dim() || net.output_dim() != norm.dim() {
            return Err(Error::dim("correction network width", norm.dim(), net.output_dim()));
        }
        Ok(Self { net, norm })
    }

    pub fn dof(&self) -> usize {
        self.norm.dim()
    }

    /// Corrected configuration, always inside the joint limits.
    pub fn forward(&self, q: &JointConfig) -> Result<JointConfig> {
        if q.len() != self.dof() {
            return Err(Error::dim("correction network input", self.dof(), q.len()));
        }
        let out = self.forward_batch(as_row(q).view())?;
        Ok(JointConfig(out.row(0).to_vec()))
    }

    pub fn forward_batch(&self, q: ArrayView2<f64>) -> Result<Array2<f64>> {
        if q.ncols() != self.dof() {
            return Err(Error::dim("correction network input", self.dof(), q.ncols()));
        }
        let a = self.net.forward(self.norm.normalize(q).view())?;
        Ok(self.norm.denormalize(a.view()))
    }

    /// Composite loss of a batch and the parameter gradients, with the
    /// prediction network held fixed.
    pub fn loss_and_grad(&self, q: ArrayView2<f64>, cpn: &Cpn, alpha: f64, beta: f64) -> Result<(LossParts, Gradients)> {
        let (b, n) = q.dim();
        let m = cpn.link_count();
        let cache = self.net.forward_cached(self.norm.normalize(q).view())?;
        let q_hat = self.norm.denormalize(cache.output().view());
        let diff = &q_hat - &q;
        let mse = diff.iter().map(|d| d * d).sum::<f64>() / (b * n) as f64;
        let (probs, d_col) = cpn.probability_input_grad(q_hat.view(), beta / (b * m) as f64)?;
        let collision = probs.sum() / (b * m) as f64;
        // dL/dq_hat, then through q_hat = mid + half * a
        let d_qhat = diff * (2.0 * alpha / (b * n) as f64) + d_col;
        let d_a = d_qhat * &self.norm.half;
        let (g, _) = self.net.backward(&cache, &d_a);
        Ok((LossParts::new(mse, collision, alpha, beta), g))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_doc(path.as_ref(), &CollisionNetDoc::new(NetKind::Ccn, &self.net, &self.norm))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let doc = read_doc(path.as_ref())?;
        let (net, norm) = doc.into_parts(NetKind::Ccn)?;
        Self::from_parts(net, norm)
    }
}

fn layer_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    std::iter::once(input)
        .chain(hidden.iter().copied())
        .chain(std::iter::once(output))
        .collect()
}

/// Components of the composite correction loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub mse: f64,
    pub collision: f64,
    pub total: f64,
}

impl LossParts {
    pub fn new(mse: f64, collision: f64, alpha: f64, beta: f64) -> Self {
        Self {
            mse,
            collision,
            total: alpha * mse + beta * collision,
        }
    }
}

/// Mean BCE between one sample's link probabilities and labels.
pub fn cpn_loss(probs: &[f64], labels: &[bool]) -> f64 {
    loss::bce(probs, labels)
}

/// `alpha * MSE(q_hat, q) + beta * mean_i p_i(q_hat)` for one sample.
pub fn ccn_loss(q: &JointConfig, q_hat: &JointConfig, cpn: &Cpn, alpha: f64, beta: f64) -> Result<LossParts> {
    if q.len() != q_hat.len() {
        return Err(Error::dim("corrected configuration", q.len(), q_hat.len()));
    }
    let mse = loss::mse(&q.0, &q_hat.0);
    let probs = cpn.forward(q_hat)?;
    let collision = probs.iter().sum::<f64>() / probs.len() as f64;
    Ok(LossParts::new(mse, collision, alpha, beta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetKind {
    Cpn,
    Ccn,
}

/// Persisted form of either network: the dense layers plus the joint limits
/// used for input normalization (and output squashing for the CCN).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionNetDoc {
    pub format_version: u32,
    pub kind: NetKind,
    pub joint_lower: Vec<f64>,
    pub joint_upper: Vec<f64>,
    pub layers: Vec<LayerDoc>,
}

impl CollisionNetDoc {
    fn new(kind: NetKind, net: &Mlp, norm: &JointNormalizer) -> Self {
        let doc = net.to_doc();
        Self {
            format_version: doc.format_version,
            kind,
            joint_lower: norm.lower(),
            joint_upper: norm.upper(),
            layers: doc.layers,
        }
    }

    fn into_parts(self, expected: NetKind) -> Result<(Mlp, JointNormalizer)> {
        if self.kind != expected {
            return Err(Error::Network(format!("expected a {expected:?} document, found {:?}", self.kind)));
        }
        let net = Mlp::from_doc(&NetworkDoc {
            format_version: self.format_version,
            layers: self.layers,
        })?;
        let norm = JointNormalizer::from_limits(&self.joint_lower, &self.joint_upper)?;
        Ok((net, norm))
    }
}

fn write_doc(path: &Path, doc: &CollisionNetDoc) -> Result<()> {
    let text = serde_json::to_string(doc)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_doc(path: &Path) -> Result<CollisionNetDoc> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: CollisionNetDoc = serde_json::from_str(&text)?;
    if doc.format_version != NETWORK_FORMAT_VERSION {
        return Err(Error::Network(format!("unsupported format_version {}", doc.format_version)));
    }
    Ok(doc)
}

/// Per-link accuracy of thresholded predictions on the rows `idx`.
pub fn link_accuracy(cpn: &Cpn, configs: ArrayView2<f64>, labels: ArrayView2<f64>, threshold: f64) -> Result<Vec<f64>> {
    let probs = cpn.forward_batch(configs)?;
    let n = probs.nrows() as f64;
    let hits = ndarray::Zip::from(&probs)
        .and(&labels)
        .map_collect(|&p, &t| if (p >= threshold) == (t > 0.5) { 1.0 } else { 0.0 });
    Ok(hits.sum_axis(Axis(0)).iter().map(|h| h / n).collect())
}
