//! Small dense network engine with cached forward traces and manual backprop.
//!
//! Layers compute `y = act(W x + b)` with `W` stored row-major as
//! `(outputs, inputs)`. Everything is `f64`; the networks used here have a
//! few hundred parameters at most, so all passes are per-sample.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub type Vector = Vec<f64>;

/// Upper bound of the capped ReLU.
pub const RELU2_CAP: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `W x`
    pub fn mul_vec(&self, x: &[f64]) -> Vector {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(w, v)| w * v).sum())
            .collect()
    }

    /// `Wᵀ y`
    pub fn mul_vec_transposed(&self, y: &[f64]) -> Vector {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &yr) in y.iter().enumerate() {
            for (o, w) in out.iter_mut().zip(self.row(r)) {
                *o += w * yr;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    Identity,
    Relu,
    /// ReLU capped at [`RELU2_CAP`].
    Relu2,
    Softmax,
}

impl ActivationKind {
    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Identity => "identity",
            ActivationKind::Relu => "relu",
            ActivationKind::Relu2 => "relu2",
            ActivationKind::Softmax => "softmax",
        }
    }

    pub fn apply(self, pre: &[f64]) -> Vector {
        match self {
            ActivationKind::Identity => pre.to_vec(),
            ActivationKind::Relu => pre.iter().map(|&z| z.max(0.0)).collect(),
            ActivationKind::Relu2 => pre.iter().map(|&z| z.clamp(0.0, RELU2_CAP)).collect(),
            ActivationKind::Softmax => softmax(pre),
        }
    }

    /// Maps a gradient w.r.t. the activation output onto the pre-activation.
    /// Kinks (0 for both ReLUs, and the cap for Relu2) get gradient 0.
    fn backprop(self, pre: &[f64], post: &[f64], grad_post: &[f64]) -> Vector {
        match self {
            ActivationKind::Identity => grad_post.to_vec(),
            ActivationKind::Relu => pre
                .iter()
                .zip(grad_post)
                .map(|(&z, &g)| if z > 0.0 { g } else { 0.0 })
                .collect(),
            ActivationKind::Relu2 => pre
                .iter()
                .zip(grad_post)
                .map(|(&z, &g)| if z > 0.0 && z < RELU2_CAP { g } else { 0.0 })
                .collect(),
            ActivationKind::Softmax => {
                let dot: f64 = post.iter().zip(grad_post).map(|(p, g)| p * g).sum();
                post.iter()
                    .zip(grad_post)
                    .map(|(&p, &g)| p * (g - dot))
                    .collect()
            }
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(ActivationKind::Identity),
            "relu" => Ok(ActivationKind::Relu),
            "relu2" => Ok(ActivationKind::Relu2),
            "softmax" => Ok(ActivationKind::Softmax),
            other => Err(Error::InvalidArgument(format!(
                "unknown activation '{other}'"
            ))),
        }
    }
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vector {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vector = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub biases: Vector,
    pub activation: ActivationKind,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize, activation: ActivationKind) -> Self {
        Layer {
            weights: Matrix::zeros(outputs, inputs),
            biases: vec![0.0; outputs],
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.rows() * self.weights.cols() + self.biases.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    input_dim: usize,
}

impl Mlp {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidNetwork("network has no layers".into()));
        }
        if input_dim == 0 {
            return Err(Error::InvalidNetwork("input dimension is zero".into()));
        }
        let mut expected = input_dim;
        let last = layers.len() - 1;
        for (k, layer) in layers.iter().enumerate() {
            if layer.output_dim() == 0 {
                return Err(Error::InvalidNetwork(format!("layer {k} has no units")));
            }
            if layer.input_dim() != expected {
                return Err(Error::InvalidNetwork(format!(
                    "layer {k} takes {} inputs but receives {expected}",
                    layer.input_dim()
                )));
            }
            if layer.biases.len() != layer.output_dim() {
                return Err(Error::InvalidNetwork(format!(
                    "layer {k} has {} biases for {} units",
                    layer.biases.len(),
                    layer.output_dim()
                )));
            }
            if layer.activation == ActivationKind::Softmax && k != last {
                return Err(Error::InvalidNetwork(format!(
                    "softmax only allowed on the final layer, found on layer {k}"
                )));
            }
            expected = layer.output_dim();
        }
        Ok(Mlp { layers, input_dim })
    }

    /// Zero-initialized network with the given layer widths (`sizes[0]` is the
    /// input dimension) and one activation per layer.
    pub fn zeros(sizes: &[usize], activations: &[ActivationKind]) -> Result<Self> {
        if sizes.len() < 2 || activations.len() != sizes.len() - 1 {
            return Err(Error::InvalidNetwork(format!(
                "{} sizes need {} activations, got {}",
                sizes.len(),
                sizes.len().saturating_sub(1),
                activations.len()
            )));
        }
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| Layer::zeros(w[0], w[1], act))
            .collect();
        Mlp::new(sizes[0], layers)
    }

    /// 4-10-10-2 policy network: capped ReLU hidden layers, softmax output.
    pub fn actor() -> Self {
        use ActivationKind::*;
        Mlp::zeros(&[4, 10, 10, 2], &[Relu2, Relu2, Softmax]).expect("valid actor shape")
    }

    /// 4-10-10-1 value network with ReLU hidden layers and a linear output.
    pub fn critic() -> Self {
        use ActivationKind::*;
        Mlp::zeros(&[4, 10, 10, 1], &[Relu, Relu, Identity]).expect("valid critic shape")
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(Layer::output_dim).unwrap_or(0)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim)
            .chain(self.layers.iter().map(Layer::output_dim))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Per layer: weights row-major, then biases.
    pub fn flatten(&self) -> Vector {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend_from_slice(layer.weights.data());
            out.extend_from_slice(&layer.biases);
        }
        out
    }

    pub fn unflatten(&mut self, params: &[f64]) -> Result<()> {
        let expected = self.param_count();
        if params.len() != expected {
            return Err(Error::ParamLength {
                expected,
                actual: params.len(),
            });
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let n = layer.weights.data().len();
            layer
                .weights
                .data_mut()
                .copy_from_slice(&params[offset..offset + n]);
            offset += n;
            let m = layer.biases.len();
            layer.biases.copy_from_slice(&params[offset..offset + m]);
            offset += m;
        }
        Ok(())
    }

    pub fn min_param(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.data().iter().chain(&l.biases))
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .flat_map(|l| l.weights.data().iter().chain(&l.biases))
            .all(|v| v.is_finite())
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vector, ForwardTrace)> {
        if input.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                layer: 0,
                expected: self.input_dim,
                actual: input.len(),
            });
        }
        if let Some(i) = input.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "input entry {i} is not finite"
            )));
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        let mut x = input.to_vec();
        for layer in &self.layers {
            let mut z = layer.weights.mul_vec(&x);
            for (zi, b) in z.iter_mut().zip(&layer.biases) {
                *zi += b;
            }
            let y = layer.activation.apply(&z);
            pre.push(z);
            post.push(y.clone());
            x = y;
        }
        Ok((
            x,
            ForwardTrace {
                input: input.to_vec(),
                pre,
                post,
            },
        ))
    }

    /// Output only; skips keeping the trace around.
    pub fn predict(&self, input: &[f64]) -> Result<Vector> {
        self.forward(input).map(|(out, _)| out)
    }

    /// Backpropagates `output_grad` (gradient w.r.t. the final post-activation
    /// output) through a trace produced by [`Mlp::forward`] on this network.
    pub fn backward(&self, trace: &ForwardTrace, output_grad: &[f64]) -> Result<ParamGrads> {
        let n = self.layers.len();
        if trace.pre.len() != n || trace.post.len() != n {
            return Err(Error::TraceMismatch(format!(
                "trace has {} layers, network has {n}",
                trace.pre.len()
            )));
        }
        if trace.input.len() != self.input_dim {
            return Err(Error::TraceMismatch(format!(
                "trace input has length {}, network expects {}",
                trace.input.len(),
                self.input_dim
            )));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if trace.pre[k].len() != layer.output_dim() || trace.post[k].len() != layer.output_dim()
            {
                return Err(Error::TraceMismatch(format!(
                    "layer {k} has {} units, trace records {}",
                    layer.output_dim(),
                    trace.pre[k].len()
                )));
            }
        }
        if output_grad.len() != self.output_dim() {
            return Err(Error::TraceMismatch(format!(
                "output gradient has length {}, network outputs {}",
                output_grad.len(),
                self.output_dim()
            )));
        }

        let mut layers = vec![
            LayerGrads {
                weights: Matrix::zeros(0, 0),
                biases: Vec::new(),
            };
            n
        ];
        let mut grad = output_grad.to_vec();
        for k in (0..n).rev() {
            let layer = &self.layers[k];
            let dz = layer
                .activation
                .backprop(&trace.pre[k], &trace.post[k], &grad);
            let x = if k == 0 {
                &trace.input
            } else {
                &trace.post[k - 1]
            };
            let mut gw = Matrix::zeros(layer.output_dim(), layer.input_dim());
            for (r, &d) in dz.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (c, &xc) in x.iter().enumerate() {
                    gw.set(r, c, d * xc);
                }
            }
            grad = layer.weights.mul_vec_transposed(&dz);
            layers[k] = LayerGrads {
                weights: gw,
                biases: dz,
            };
        }
        Ok(ParamGrads {
            layers,
            input: grad,
        })
    }
}

/// Cached per-layer values from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub input: Vector,
    pub pre: Vec<Vector>,
    pub post: Vec<Vector>,
}

impl ForwardTrace {
    pub fn len(&self) -> usize {
        self.post.len()
    }

    pub fn is_empty(&self) -> bool {
        self.post.is_empty()
    }

    pub fn output(&self) -> &[f64] {
        self.post.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Matrix,
    pub biases: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub layers: Vec<LayerGrads>,
    /// Gradient w.r.t. the network input.
    pub input: Vector,
}

impl ParamGrads {
    /// Same ordering as [`Mlp::flatten`].
    pub fn flatten(&self) -> Vector {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weights.data());
            out.extend_from_slice(&l.biases);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::Rng;
    use ActivationKind::*;

    fn random_net(rng: &mut Rng, sizes: &[usize], acts: &[ActivationKind]) -> Mlp {
        let mut net = Mlp::zeros(sizes, acts).unwrap();
        let params: Vec<f64> = (0..net.param_count())
            .map(|_| rng.uniform(-1.0, 1.0))
            .collect();
        net.unflatten(&params).unwrap();
        net
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let layer = Layer {
            weights: Matrix::identity(2),
            biases: vec![0.0, 0.0],
            activation: Identity,
        };
        let net = Mlp::new(2, vec![layer]).unwrap();
        let (out, trace) = net.forward(&[0.3, 0.7]).unwrap();
        assert_eq!(out, vec![0.3, 0.7]);
        assert_eq!(trace.len(), 1);
    }

    #[test]
    fn relu2_caps_at_two() {
        assert_eq!(Relu2.apply(&[-1.0, 0.5, 3.0]), vec![0.0, 0.5, 2.0]);
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        let p = softmax(&[1000.0, -1000.0, 3.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forward_rejects_wrong_input_length() {
        let net = Mlp::actor();
        match net.forward(&[0.0; 3]) {
            Err(Error::DimensionMismatch {
                layer: 0,
                expected: 4,
                actual: 3,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn construction_validates_shape() {
        assert!(Mlp::new(4, vec![]).is_err());
        assert!(Mlp::zeros(&[4], &[]).is_err());
        assert!(Mlp::zeros(&[4, 3, 2], &[Softmax, Identity]).is_err());
        let bad = vec![Layer::zeros(4, 3, Relu), Layer::zeros(2, 1, Identity)];
        assert!(Mlp::new(4, bad).is_err());
    }

    #[test]
    fn identity_net_bias_gradient_is_residual() {
        let layer = Layer {
            weights: Matrix::identity(2),
            biases: vec![0.1, -0.2],
            activation: Identity,
        };
        let net = Mlp::new(2, vec![layer]).unwrap();
        let target = [1.0, 1.0];
        let (out, trace) = net.forward(&[0.3, 0.7]).unwrap();
        let residual: Vec<f64> = out.iter().zip(target).map(|(o, t)| o - t).collect();
        let grads = net.backward(&trace, &residual).unwrap();
        assert_eq!(grads.layers[0].biases, residual);
    }

    #[test]
    fn saturated_relu2_blocks_gradient() {
        let layer = Layer {
            weights: Matrix::from_vec(1, 1, vec![1.0]).unwrap(),
            biases: vec![0.0],
            activation: Relu2,
        };
        let net = Mlp::new(1, vec![layer]).unwrap();
        let (_, trace) = net.forward(&[3.0]).unwrap();
        let g = net.backward(&trace, &[1.0]).unwrap();
        assert_eq!(g.layers[0].biases, vec![0.0]);
        assert_eq!(g.input, vec![0.0]);
        // kinks at 0 and at the cap resolve to zero
        let (_, trace) = net.forward(&[2.0]).unwrap();
        assert_eq!(net.backward(&trace, &[1.0]).unwrap().input, vec![0.0]);
        let (_, trace) = net.forward(&[0.0]).unwrap();
        assert_eq!(net.backward(&trace, &[1.0]).unwrap().input, vec![0.0]);
    }

    #[test]
    fn actor_param_count() {
        assert_eq!(Mlp::actor().param_count(), 182);
        assert_eq!(Mlp::actor().sizes(), vec![4, 10, 10, 2]);
    }

    #[test]
    fn flatten_roundtrip_is_exact() {
        let mut rng = Rng::new(3);
        let net = random_net(&mut rng, &[4, 10, 10, 2], &[Relu2, Relu2, Softmax]);
        let flat = net.flatten();
        let mut copy = Mlp::actor();
        copy.unflatten(&flat).unwrap();
        assert_eq!(copy, net);
        assert!(matches!(
            copy.unflatten(&flat[1..]),
            Err(Error::ParamLength {
                expected: 182,
                actual: 181
            })
        ));
    }

    #[test]
    fn backward_rejects_foreign_trace() {
        let actor = Mlp::actor();
        let critic = Mlp::zeros(&[4, 10, 1], &[Relu, Identity]).unwrap();
        let (_, trace) = critic.forward(&[0.5; 4]).unwrap();
        assert!(matches!(
            actor.backward(&trace, &[1.0, 0.0]),
            Err(Error::TraceMismatch(_))
        ));
    }

    #[test]
    fn forward_is_deterministic_and_replayable() {
        let mut rng = Rng::new(11);
        let net = random_net(&mut rng, &[4, 10, 10, 2], &[Relu2, Relu2, Softmax]);
        let x = [0.1, 0.9, 0.4, 0.6];
        let (a, ta) = net.forward(&x).unwrap();
        let (b, tb) = net.forward(&ta.input).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
    }
}
