use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fully connected layer, `a = act(x W^T + b)` with `W` of shape (out, in).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Intermediate values kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `inputs[l]` is the input to layer l; `inputs[0]` is the network input.
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }
}

/// Parameter gradients, same layout as the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub bias: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
            bias: net.layers.iter().map(|l| Array1::zeros(l.bias.len())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.bias.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Flattened in [`Mlp::parameters`] order.
    pub fn flatten(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
            .collect()
    }
}

impl Mlp {
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Network("network has no layers".into()));
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].outputs() != w[1].inputs() {
                return Err(Error::Network(format!(
                    "layer {} outputs {} but layer {} expects {}",
                    i,
                    w[0].outputs(),
                    i + 1,
                    w[1].inputs()
                )));
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(Error::Network(format!("layer {i} bias length {} != rows {}", l.bias.len(), l.outputs())));
            }
            if !(l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite())) {
                return Err(Error::Network(format!("layer {i} has non-finite parameters")));
            }
        }
        Ok(Self { layers })
    }

    /// Random initialization: He-uniform before rectified layers, Glorot-uniform
    /// elsewhere; biases start at zero.
    pub fn random<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|l| {
                let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
                let act = if l + 1 == n { output } else { hidden };
                let limit = match act {
                    Activation::Relu => (6.0 / fan_in as f64).sqrt(),
                    _ => (6.0 / (fan_in + fan_out) as f64).sqrt(),
                };
                let dist = Uniform::new_inclusive(-limit, limit).expect("finite bound");
                Dense {
                    weights: Array2::from_shape_fn((fan_out, fan_in), |_| dist.sample(rng)),
                    bias: Array1::zeros(fan_out),
                    activation: act,
                }
            })
            .collect();
        Self { layers }
    }

    /// All-zero parameters.
    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Self {
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|l| Dense {
                weights: Array2::zeros((sizes[l + 1], sizes[l])),
                bias: Array1::zeros(sizes[l + 1]),
                activation: if l + 1 == n { output } else { hidden },
            })
            .collect();
        Self { layers }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").outputs()
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.outputs()))
            .collect()
    }

    pub fn output_activation(&self) -> Activation {
        self.layers.last().expect("non-empty").activation
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Every parameter: per layer, the weights row by row, then the bias.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    /// Mutable access to parameter `k` in [`Mlp::parameters`] order.
    pub fn parameter_mut(&mut self, mut k: usize) -> Option<&mut f64> {
        for l in &mut self.layers {
            if k < l.weights.len() {
                let cols = l.weights.ncols();
                return Some(&mut l.weights[(k / cols, k % cols)]);
            }
            k -= l.weights.len();
            if k < l.bias.len() {
                return Some(&mut l.bias[k]);
            }
            k -= l.bias.len();
        }
        None
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::dim("network input", self.input_dim(), x.ncols()));
        }
        Ok(())
    }

    /// Batched forward pass; rows are samples.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut a = x.to_owned();
        for l in &self.layers {
            let mut z = a.dot(&l.weights.t());
            z += &l.bias;
            z.mapv_inplace(|v| l.activation.apply(v));
            a = z;
        }
        Ok(a)
    }

    /// Single-sample forward pass.
    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::dim("network input", self.input_dim(), x.len()));
        }
        let mut a: Vec<f64> = x.to_vec();
        for l in &self.layers {
            a = l
                .weights
                .rows()
                .into_iter()
                .zip(l.bias.iter())
                .map(|(row, b)| l.activation.apply(row.iter().zip(&a).map(|(w, v)| w * v).sum::<f64>() + b))
                .collect();
        }
        Ok(a)
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<ForwardCache> {
        self.check_input(&x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for l in &self.layers {
            let mut z = a.dot(&l.weights.t());
            z += &l.bias;
            let out = z.mapv(|v| l.activation.apply(v));
            inputs.push(a);
            pre.push(z);
            a = out;
        }
        Ok(ForwardCache { inputs, pre, output: a })
    }

    /// Backpropagates `d_out = dL/d(output)`; returns parameter gradients and
    /// `dL/d(input)`.
    pub fn backward(&self, cache: &ForwardCache, d_out: &Array2<f64>) -> (Gradients, Array2<f64>) {
        let last = self.layers.len() - 1;
        let act = self.layers[last].activation;
        let mut d_z = d_out.clone();
        ndarray::Zip::from(&mut d_z)
            .and(&cache.pre[last])
            .and(&cache.output)
            .for_each(|d, &z, &a| *d *= act.derivative(z, a));
        self.backward_from_pre(cache, d_z)
    }

    /// Like [`Mlp::backward`] but starting from `dL/dz` of the output layer's
    /// pre-activation (used for fused sigmoid + cross-entropy).
    pub fn backward_from_pre(&self, cache: &ForwardCache, mut d_z: Array2<f64>) -> (Gradients, Array2<f64>) {
        let n = self.layers.len();
        let mut gw = Vec::with_capacity(n);
        let mut gb = Vec::with_capacity(n);
        for l in (0..n).rev() {
            let layer = &self.layers[l];
            gw.push(d_z.t().dot(&cache.inputs[l]));
            gb.push(d_z.sum_axis(Axis(0)));
            let d_in = d_z.dot(&layer.weights);
            if l == 0 {
                d_z = d_in;
                break;
            }
            let prev = &self.layers[l - 1];
            let mut d = d_in;
            ndarray::Zip::from(&mut d)
                .and(&cache.pre[l - 1])
                .and(&cache.inputs[l])
                .for_each(|d, &z, &a| *d *= prev.activation.derivative(z, a));
            d_z = d;
        }
        gw.reverse();
        gb.reverse();
        (Gradients { weights: gw, bias: gb }, d_z)
    }

    pub fn to_doc(&self) -> NetworkDoc {
        NetworkDoc {
            format_version: NETWORK_FORMAT_VERSION,
            layers: self
                .layers
                .iter()
                .map(|l| LayerDoc {
                    rows: l.outputs(),
                    cols: l.inputs(),
                    weights: l.weights.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                    activation: l.activation,
                })
                .collect(),
        }
    }

    pub fn from_doc(doc: &NetworkDoc) -> Result<Self> {
        if doc.format_version != NETWORK_FORMAT_VERSION {
            return Err(Error::Network(format!(
                "unsupported format_version {} (expected {NETWORK_FORMAT_VERSION})",
                doc.format_version
            )));
        }
        let layers = doc
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let weights = Array2::from_shape_vec((l.rows, l.cols), l.weights.clone())
                    .map_err(|_| Error::Network(format!("layer {i}: weights length does not match rows x cols")))?;
                Ok(Dense {
                    weights,
                    bias: Array1::from_vec(l.bias.clone()),
                    activation: l.activation,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers)
    }
}

pub const NETWORK_FORMAT_VERSION: u32 = 1;

/// Persisted weights: row-major `weights` of shape (rows = outputs, cols = inputs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDoc {
    pub format_version: u32,
    pub layers: Vec<LayerDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDoc {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}
