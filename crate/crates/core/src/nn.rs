//! Minimal dense feed-forward network with manual backpropagation and Adam.
//!
//! Weights are stored row-major (`out_dim x in_dim`) per layer. Everything is
//! generic over [`Scalar`] so the same code runs in `f32` or `f64`.

use thiserror::Error;

use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("{what}: expected dimension {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("layer {layer} input dim {input} does not match previous output dim {previous}")]
    BrokenChain {
        layer: usize,
        previous: usize,
        input: usize,
    },
    #[error("network has no layers")]
    Empty,
    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },
}

pub type Result<T> = std::result::Result<T, NnError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu => {
                if x > T::zero() {
                    x
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation and the activation value.
    #[inline]
    fn derivative<T: Scalar>(self, pre: T, post: T) -> T {
        match self {
            Activation::Relu => {
                if pre > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - post * post,
            Activation::Identity => T::one(),
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Identity => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    in_dim: usize,
    out_dim: usize,
    /// Row-major `out_dim x in_dim`.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub activation: Activation,
}

impl<T: Scalar> DenseLayer<T> {
    /// Layer from explicit parameters; `weights` is row-major `out_dim x in_dim`.
    pub fn from_parts(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<T>,
        bias: Vec<T>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.len() != in_dim * out_dim {
            return Err(NnError::DimensionMismatch {
                what: "weight matrix",
                expected: in_dim * out_dim,
                actual: weights.len(),
            });
        }
        if bias.len() != out_dim {
            return Err(NnError::DimensionMismatch {
                what: "bias vector",
                expected: out_dim,
                actual: bias.len(),
            });
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut Rng) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| T::of(rng.uniform_in(-limit, limit)))
            .collect();
        Self {
            in_dim,
            out_dim,
            weights,
            bias: vec![T::zero(); out_dim],
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    #[inline]
    fn pre_activation(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            out.push(self.bias[o] + dot(row, x));
        }
    }
}

/// Dot product with four independent accumulators.
#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .fold(T::zero(), |s, (x, y)| s + *x * *y);
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Intermediate values of one forward pass, needed by [`DenseNet::backward`].
#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    /// Input to each layer; `inputs[0]` is the network input.
    inputs: Vec<Vec<T>>,
    pre: Vec<Vec<T>>,
    output: Vec<T>,
}

impl<T> ForwardTrace<T> {
    pub fn output(&self) -> &[T] {
        &self.output
    }
}

/// Parameter-shaped container, used for gradients and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(net: &DenseNet<T>) -> Self {
        Self {
            weights: net
                .layers
                .iter()
                .map(|l| vec![T::zero(); l.weights.len()])
                .collect(),
            biases: net
                .layers
                .iter()
                .map(|l| vec![T::zero(); l.bias.len()])
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += *y);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += *y);
        }
    }

    pub fn scale(&mut self, factor: T) {
        self.weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .flat_map(|v| v.iter_mut())
            .for_each(|x| *x *= factor);
    }

    /// All entries in layer order: weights then bias for each layer.
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    /// Index of the first layer holding a non-finite entry.
    pub fn first_non_finite_layer(&self) -> Option<usize> {
        self.weights
            .iter()
            .zip(&self.biases)
            .position(|(w, b)| w.iter().chain(b).any(|x| !x.is_finite()))
    }

    fn same_shape(&self, net: &DenseNet<T>) -> bool {
        self.weights.len() == net.layers.len()
            && self.biases.len() == net.layers.len()
            && net.layers.iter().enumerate().all(|(k, l)| {
                self.weights[k].len() == l.weights.len() && self.biases[k].len() == l.bias.len()
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet<T> {
    layers: Vec<DenseLayer<T>>,
}

impl<T: Scalar> DenseNet<T> {
    pub fn from_layers(layers: Vec<DenseLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(NnError::Empty);
        }
        for k in 1..layers.len() {
            if layers[k].in_dim != layers[k - 1].out_dim {
                return Err(NnError::BrokenChain {
                    layer: k,
                    previous: layers[k - 1].out_dim,
                    input: layers[k].in_dim,
                });
            }
        }
        Ok(Self { layers })
    }

    /// Multilayer perceptron `input -> hidden.. -> output` with ReLU hidden
    /// units and an identity output layer.
    pub fn mlp(input: usize, hidden: &[usize], output: usize, seed: u64) -> Self {
        Self::with_activations(
            input,
            hidden,
            output,
            Activation::Relu,
            Activation::Identity,
            seed,
        )
    }

    pub fn with_activations(
        input: usize,
        hidden: &[usize],
        output: usize,
        hidden_act: Activation,
        output_act: Activation,
        seed: u64,
    ) -> Self {
        let mut rng = Rng::new(seed);
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(input);
        dims.extend_from_slice(hidden);
        dims.push(output);
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let act = if k == last { output_act } else { hidden_act };
                DenseLayer::glorot(w[0], w[1], act, &mut rng)
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer<T>] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Parameters in the same order as [`Gradients::flatten`].
    pub fn params_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(NnError::DimensionMismatch {
                what: "flat parameter vector",
                expected: self.param_count(),
                actual: params.len(),
            });
        }
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(NnError::DimensionMismatch {
                what: "network input",
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut pre = Vec::new();
        for layer in &self.layers {
            layer.pre_activation(&cur, &mut pre);
            cur.clear();
            cur.extend(pre.iter().map(|&p| layer.activation.apply(p)));
        }
        Ok(cur)
    }

    pub fn forward_trace(&self, x: &[T]) -> Result<ForwardTrace<T>> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pres = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for layer in &self.layers {
            let mut pre = Vec::with_capacity(layer.out_dim);
            layer.pre_activation(&cur, &mut pre);
            let next = pre.iter().map(|&p| layer.activation.apply(p)).collect();
            inputs.push(std::mem::replace(&mut cur, next));
            pres.push(pre);
        }
        Ok(ForwardTrace {
            inputs,
            pre: pres,
            output: cur,
        })
    }

    /// Backpropagates `d_output` (gradient of some loss w.r.t. the network
    /// output) and returns parameter gradients plus the input gradient.
    pub fn backward(
        &self,
        trace: &ForwardTrace<T>,
        d_output: &[T],
    ) -> Result<(Gradients<T>, Vec<T>)> {
        if d_output.len() != self.output_dim() {
            return Err(NnError::DimensionMismatch {
                what: "output gradient",
                expected: self.output_dim(),
                actual: d_output.len(),
            });
        }
        let mut grads = Gradients::zeros_like(self);
        let mut delta_post = d_output.to_vec();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let post: &[T] = if k + 1 < self.layers.len() {
                &trace.inputs[k + 1]
            } else {
                &trace.output
            };
            let delta: Vec<T> = (0..layer.out_dim)
                .map(|o| delta_post[o] * layer.activation.derivative(trace.pre[k][o], post[o]))
                .collect();
            let input = &trace.inputs[k];
            let gw = &mut grads.weights[k];
            for o in 0..layer.out_dim {
                let row = &mut gw[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (g, xi) in row.iter_mut().zip(input) {
                    *g = delta[o] * *xi;
                }
            }
            grads.biases[k].copy_from_slice(&delta);
            let mut d_in = vec![T::zero(); layer.in_dim];
            for o in 0..layer.out_dim {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (d, w) in d_in.iter_mut().zip(row) {
                    *d += delta[o] * *w;
                }
            }
            delta_post = d_in;
        }
        Ok((grads, delta_post))
    }

    /// Squared error `||forward(x) - target||^2` and its exact parameter gradients.
    pub fn backward_mse(&self, x: &[T], target: &[T]) -> Result<(T, Gradients<T>)> {
        if target.len() != self.output_dim() {
            return Err(NnError::DimensionMismatch {
                what: "regression target",
                expected: self.output_dim(),
                actual: target.len(),
            });
        }
        let trace = self.forward_trace(x)?;
        let residual: Vec<T> = trace
            .output
            .iter()
            .zip(target)
            .map(|(y, t)| *y - *t)
            .collect();
        let loss = residual.iter().fold(T::zero(), |acc, r| acc + *r * *r);
        let two = T::one() + T::one();
        let d_out: Vec<T> = residual.iter().map(|r| two * *r).collect();
        let (grads, _) = self.backward(&trace, &d_out)?;
        Ok((loss, grads))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Scalar> AdamConfig<T> {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr: T::of(lr),
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig<T>,
    pub m: Gradients<T>,
    pub v: Gradients<T>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(net: &DenseNet<T>, config: AdamConfig<T>) -> Self {
        Self {
            config,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
            step: 0,
        }
    }
}

/// Moments decaying under long runs of zero gradient would otherwise go
/// subnormal and slow every later step down by an order of magnitude.
#[inline]
fn flush<T: Scalar>(x: T) -> T {
    if x.abs() < T::min_positive_value() {
        T::zero()
    } else {
        x
    }
}

/// Bias-corrected Adam update of `net` in place.
pub fn adam_step<T: Scalar>(
    net: &mut DenseNet<T>,
    grads: &Gradients<T>,
    state: &mut AdamState<T>,
) -> Result<()> {
    if !grads.same_shape(net) || !state.m.same_shape(net) {
        return Err(NnError::DimensionMismatch {
            what: "gradient parameter count",
            expected: net.param_count(),
            actual: grads.flatten().len(),
        });
    }
    if let Some(layer) = grads.first_non_finite_layer() {
        return Err(NnError::NonFiniteGradient { layer });
    }
    state.step += 1;
    let AdamConfig {
        lr,
        beta1,
        beta2,
        eps,
    } = state.config;
    let t = i32::try_from(state.step).unwrap_or(i32::MAX);
    let c1 = T::one() - beta1.powi(t);
    let c2 = T::one() - beta2.powi(t);
    let (one_b1, one_b2) = (T::one() - beta1, T::one() - beta2);
    let step = lr / c1;
    let inv_sqrt_c2 = T::one() / c2.sqrt();
    let update = |p: &mut [T], g: &[T], m: &mut [T], v: &mut [T]| {
        for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = flush(beta1 * *m + one_b1 * g);
            *v = flush(beta2 * *v + one_b2 * g * g);
            *p -= step * *m / (v.sqrt() * inv_sqrt_c2 + eps);
        }
    };
    for (k, layer) in net.layers.iter_mut().enumerate() {
        update(
            &mut layer.weights,
            &grads.weights[k],
            &mut state.m.weights[k],
            &mut state.v.weights[k],
        );
        update(
            &mut layer.bias,
            &grads.biases[k],
            &mut state.m.biases[k],
            &mut state.v.biases[k],
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn identity_net(dim: usize) -> DenseNet<f64> {
        let mut w = vec![0.0; dim * dim];
        for i in 0..dim {
            w[i * dim + i] = 1.0;
        }
        let layer =
            DenseLayer::from_parts(dim, dim, w, vec![0.0; dim], Activation::Identity).unwrap();
        DenseNet::from_layers(vec![layer]).unwrap()
    }

    /// Plain nested-loop forward pass used as an oracle.
    fn oracle_forward(net: &DenseNet<f64>, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        for l in net.layers() {
            let mut next = vec![0.0; l.out_dim()];
            for o in 0..l.out_dim() {
                let mut s = 0.0;
                for i in 0..l.in_dim() {
                    s += l.weights[o * l.in_dim() + i] * cur[i];
                }
                s += l.bias[o];
                next[o] = match l.activation {
                    Activation::Relu => s.max(0.0),
                    Activation::Tanh => s.tanh(),
                    Activation::Identity => s,
                };
            }
            cur = next;
        }
        cur
    }

    fn central_difference(net: &DenseNet<f64>, x: &[f64], target: &[f64], h: f64) -> Vec<f64> {
        let params = net.params_flat();
        let mut probe = net.clone();
        let loss = |n: &DenseNet<f64>| -> f64 {
            n.forward(x)
                .unwrap()
                .iter()
                .zip(target)
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        };
        (0..params.len())
            .map(|i| {
                let mut p = params.clone();
                p[i] += h;
                probe.set_params_flat(&p).unwrap();
                let up = loss(&probe);
                p[i] -= 2.0 * h;
                probe.set_params_flat(&p).unwrap();
                let down = loss(&probe);
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn identity_forward() {
        let net = identity_net(2);
        assert_eq!(net.forward(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn relu_clamps_negative() {
        let layer = DenseLayer::from_parts(1, 1, vec![-1.0], vec![0.0], Activation::Relu).unwrap();
        let net = DenseNet::from_layers(vec![layer]).unwrap();
        assert_eq!(net.forward(&[3.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn forward_matches_nested_loop_oracle() {
        let net = DenseNet::<f64>::mlp(3, &[5], 2, 7);
        let x = [0.3, -1.2, 0.8];
        let got = net.forward(&x).unwrap();
        let want = oracle_forward(&net, &x);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-12);
        }
    }

    #[test]
    fn forward_rejects_wrong_input_dim() {
        let net = DenseNet::<f64>::mlp(3, &[4], 2, 1);
        let err = net.forward(&[1.0]).unwrap_err();
        assert_eq!(
            err,
            NnError::DimensionMismatch {
                what: "network input",
                expected: 3,
                actual: 1
            }
        );
    }

    #[test]
    fn broken_chain_rejected() {
        let a = DenseLayer::<f64>::from_parts(2, 3, vec![0.0; 6], vec![0.0; 3], Activation::Relu)
            .unwrap();
        let b = DenseLayer::<f64>::from_parts(4, 1, vec![0.0; 4], vec![0.0], Activation::Identity)
            .unwrap();
        assert!(matches!(
            DenseNet::from_layers(vec![a, b]),
            Err(NnError::BrokenChain { layer: 1, .. })
        ));
    }

    #[test]
    fn mse_at_target_is_zero() {
        let net = DenseNet::<f64>::mlp(2, &[8], 3, 3);
        let x = [0.5, -0.5];
        let target = net.forward(&x).unwrap();
        let (loss, grads) = net.backward_mse(&x, &target).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.flatten().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn mse_identity_scalar() {
        let net = identity_net(1);
        let (loss, grads) = net.backward_mse(&[1.0], &[0.0]).unwrap();
        assert_eq!(loss, 1.0);
        assert_eq!(grads.weights[0][0], 2.0);
        assert_eq!(grads.biases[0][0], 2.0);
    }

    #[test]
    fn mse_rejects_wrong_target_dim() {
        let net = identity_net(2);
        assert!(net.backward_mse(&[1.0, 1.0], &[0.0]).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let net = DenseNet::<f64>::with_activations(
            3,
            &[6, 5],
            2,
            Activation::Tanh,
            Activation::Identity,
            11,
        );
        let x = [0.2, -0.7, 1.1];
        let target = [0.4, -0.3];
        let (_, grads) = net.backward_mse(&x, &target).unwrap();
        let fd = central_difference(&net, &x, &target, 1e-5);
        for (a, n) in grads.flatten().iter().zip(&fd) {
            assert!(
                (a - n).abs() <= 1e-4 * n.abs().max(a.abs()) + 1e-7,
                "{a} vs {n}"
            );
        }
    }

    #[test]
    fn f32_gradients_agree_with_f64() {
        let net64 = DenseNet::<f64>::mlp(2, &[4], 2, 5);
        let net32 = DenseNet::<f32>::mlp(2, &[4], 2, 5);
        let (l64, g64) = net64.backward_mse(&[0.1, 0.9], &[1.0, -1.0]).unwrap();
        let (l32, g32) = net32.backward_mse(&[0.1, 0.9], &[1.0, -1.0]).unwrap();
        assert!((l64 - l32 as f64).abs() < 1e-4);
        for (a, b) in g64.flatten().iter().zip(g32.flatten()) {
            assert!((a - b as f64).abs() < 1e-4);
        }
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut net = DenseNet::<f64>::mlp(2, &[4], 2, 9);
        let before = net.clone();
        let mut state = AdamState::new(&net, AdamConfig::with_lr(1e-3));
        let zeros = Gradients::zeros_like(&net);
        for _ in 0..3 {
            adam_step(&mut net, &zeros, &mut state).unwrap();
        }
        assert_eq!(net, before);
        assert_eq!(state.step, 3);
    }

    #[test]
    fn adam_first_step_scalar() {
        let layer = DenseLayer::<f64>::from_parts(1, 1, vec![0.0], vec![0.0], Activation::Identity)
            .unwrap();
        let mut net = DenseNet::from_layers(vec![layer]).unwrap();
        let mut state = AdamState::new(&net, AdamConfig::with_lr(0.1));
        let mut g = Gradients::zeros_like(&net);
        g.weights[0][0] = 1.0;
        adam_step(&mut net, &g, &mut state).unwrap();
        // m_hat = 1, v_hat = 1 -> w = -0.1 / (1 + eps)
        assert!((net.layers()[0].weights[0] + 0.1).abs() < 1e-8);
        assert_eq!(net.layers()[0].bias[0], 0.0);
    }

    #[test]
    fn adam_decreases_convex_quadratic() {
        let mut net = DenseNet::<f64>::mlp(2, &[], 1, 4);
        let mut state = AdamState::new(&net, AdamConfig::with_lr(0.01));
        let x = [1.0, 2.0];
        let target = [3.0];
        let (l0, g0) = net.backward_mse(&x, &target).unwrap();
        adam_step(&mut net, &g0, &mut state).unwrap();
        let (l1, g1) = net.backward_mse(&x, &target).unwrap();
        adam_step(&mut net, &g1, &mut state).unwrap();
        let (l2, _) = net.backward_mse(&x, &target).unwrap();
        assert!(l1 < l0 && l2 < l1);
    }

    #[test]
    fn adam_rejects_non_finite_gradient_naming_layer() {
        let mut net = DenseNet::<f64>::mlp(2, &[3], 1, 4);
        let mut state = AdamState::new(&net, AdamConfig::with_lr(0.01));
        let mut g = Gradients::zeros_like(&net);
        g.biases[1][0] = f64::NAN;
        assert_eq!(
            adam_step(&mut net, &g, &mut state),
            Err(NnError::NonFiniteGradient { layer: 1 })
        );
        assert_eq!(state.step, 0);
    }

    #[test]
    fn doubling_final_identity_weights_doubles_output() {
        let mut net = DenseNet::<f64>::mlp(3, &[5], 2, 21);
        let x = [0.1, 0.2, -0.3];
        let before = net.forward(&x).unwrap();
        let last = net.layers_mut().last_mut().unwrap();
        last.weights.iter_mut().for_each(|w| *w *= 2.0);
        let after = net.forward(&x).unwrap();
        for (a, b) in after.iter().zip(&before) {
            assert!((a - 2.0 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_init() {
        let a = DenseNet::<f64>::mlp(4, &[64, 64], 8, 123);
        let b = DenseNet::<f64>::mlp(4, &[64, 64], 8, 123);
        let bits = |n: &DenseNet<f64>| {
            n.params_flat()
                .iter()
                .map(|p| p.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&DenseNet::<f64>::mlp(4, &[64, 64], 8, 124)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn gradient_check_random_triples(
            seed in any::<u64>(),
            hidden in 1usize..6,
            x in proptest::collection::vec(-2.0f64..2.0, 3),
            target in proptest::collection::vec(-2.0f64..2.0, 2),
        ) {
            let net = DenseNet::<f64>::with_activations(3, &[hidden, hidden], 2, Activation::Tanh, Activation::Identity, seed);
            let (_, grads) = net.backward_mse(&x, &target).unwrap();
            let fd = central_difference(&net, &x, &target, 1e-5);
            for (a, n) in grads.flatten().iter().zip(&fd) {
                prop_assert!((a - n).abs() <= 1e-4 * n.abs().max(a.abs()) + 1e-7, "{} vs {}", a, n);
            }
        }

        #[test]
        fn forward_is_finite(seed in any::<u64>(), x in proptest::collection::vec(-1e3f64..1e3, 4)) {
            let net = DenseNet::<f64>::mlp(4, &[16, 16], 3, seed);
            prop_assert!(net.forward(&x).unwrap().iter().all(|v| v.is_finite()));
        }
    }
}
