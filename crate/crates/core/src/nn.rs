//! Fully connected network with ReLU hidden layers and a linear output,
//! trained by backpropagation and Adam.
//!
//! Weights of a layer are stored input-major: row `k` holds the weights from
//! input unit `k` to every output unit. Batches are row-major `batch × width`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("expected input of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("a network needs at least an input and an output layer, all non-empty")]
    InvalidLayers,
    #[error("loss is not finite")]
    NonFiniteLoss,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `inputs × outputs`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Weight from input `k` to output `j`.
    pub fn weight(&self, k: usize, j: usize) -> f64 {
        self.weights[k * self.outputs + j]
    }

    fn forward(&self, input: &[f64], batch: usize, out: &mut Vec<f64>) {
        out.clear();
        out.resize(batch * self.outputs, 0.0);
        for (x, o) in input
            .chunks_exact(self.inputs)
            .zip(out.chunks_exact_mut(self.outputs))
        {
            o.copy_from_slice(&self.bias);
            for (&xk, w) in x.iter().zip(self.weights.chunks_exact(self.outputs)) {
                if xk != 0.0 {
                    axpy(o, xk, w);
                }
            }
        }
    }
}

/// `y += a * x`
#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Dot product with four independent partial sums (keeps the reduction
/// vectorisable and its rounding fixed).
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Parameter-shaped buffers: one `(weights, bias)` pair per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

impl Mlp {
    /// Glorot-uniform weights in `±√(6 / (fan_in + fan_out))`, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self, NnError> {
        let mut net = Self::zeros(sizes)?;
        for l in net.layers.iter_mut() {
            let limit = libm::sqrt(6.0 / (l.inputs + l.outputs) as f64);
            for w in l.weights.iter_mut() {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self, NnError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(NnError::InvalidLayers);
        }
        Ok(Self {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::InvalidLayers);
        }
        for l in &layers {
            if l.inputs == 0
                || l.outputs == 0
                || l.weights.len() != l.inputs * l.outputs
                || l.bias.len() != l.outputs
            {
                return Err(NnError::InvalidLayers);
            }
        }
        if layers.windows(2).any(|w| w[0].outputs != w[1].inputs) {
            return Err(NnError::InvalidLayers);
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    /// Unit counts from input to output.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Copy every parameter from `other`, which must have the same shape.
    pub fn copy_from(&mut self, other: &Mlp) {
        debug_assert_eq!(self.sizes(), other.sizes());
        for (dst, src) in self.layers.iter_mut().zip(&other.layers) {
            dst.weights.copy_from_slice(&src.weights);
            dst.bias.copy_from_slice(&src.bias);
        }
    }

    /// Forward pass of a `batch × input_dim` block; returns `batch × output_dim`.
    pub fn forward_batch(&self, xs: &[f64], batch: usize) -> Result<Vec<f64>, NnError> {
        let expected = batch * self.input_dim();
        if xs.len() != expected {
            return Err(NnError::DimensionMismatch {
                expected,
                got: xs.len(),
            });
        }
        let mut cur = xs.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            l.forward(&cur, batch, &mut next);
            if i < last {
                relu(&mut next);
            }
            core::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        self.forward_batch(x, 1)
    }

    /// Mean squared error between `Q(s_b, a_b)` and `targets[b]` over the
    /// batch, with the gradient of that loss written into `grads`.
    pub fn selected_mse_grad(
        &self,
        xs: &[f64],
        actions: &[usize],
        targets: &[f64],
        grads: &mut Gradients,
    ) -> Result<f64, NnError> {
        let batch = targets.len();
        debug_assert_eq!(actions.len(), batch);
        let expected = batch * self.input_dim();
        if xs.len() != expected {
            return Err(NnError::DimensionMismatch {
                expected,
                got: xs.len(),
            });
        }

        // Activations per layer boundary; acts[0] is the input.
        let last = self.layers.len() - 1;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        acts.push(xs.to_vec());
        for (i, l) in self.layers.iter().enumerate() {
            let mut out = Vec::new();
            l.forward(&acts[i], batch, &mut out);
            if i < last {
                relu(&mut out);
            }
            acts.push(out);
        }

        let n_out = self.output_dim();
        let q = &acts[last + 1];
        let mut delta = vec![0.0; batch * n_out];
        let mut loss = 0.0;
        for b in 0..batch {
            let err = q[b * n_out + actions[b]] - targets[b];
            loss += err * err;
            delta[b * n_out + actions[b]] = 2.0 * err / batch as f64;
        }
        loss /= batch as f64;
        if !loss.is_finite() {
            return Err(NnError::NonFiniteLoss);
        }

        for (i, l) in self.layers.iter().enumerate().rev() {
            let (gw, gb) = &mut grads.layers[i];
            gw.fill(0.0);
            gb.fill(0.0);
            let input = &acts[i];
            for (x, d) in input
                .chunks_exact(l.inputs)
                .zip(delta.chunks_exact(l.outputs))
            {
                axpy(gb, 1.0, d);
                for (&xk, gw_row) in x.iter().zip(gw.chunks_exact_mut(l.outputs)) {
                    if xk != 0.0 {
                        axpy(gw_row, xk, d);
                    }
                }
            }
            if i == 0 {
                break;
            }
            // Propagate through the weights and the ReLU of the layer below.
            let mut below = vec![0.0; batch * l.inputs];
            for ((d, x), out) in delta
                .chunks_exact(l.outputs)
                .zip(input.chunks_exact(l.inputs))
                .zip(below.chunks_exact_mut(l.inputs))
            {
                for (k, w_row) in l.weights.chunks_exact(l.outputs).enumerate() {
                    if x[k] > 0.0 {
                        out[k] = dot(w_row, d);
                    }
                }
            }
            delta = below;
        }
        Ok(loss)
    }

    /// Loss only, for gradient checks.
    pub fn selected_mse(&self, xs: &[f64], actions: &[usize], targets: &[f64]) -> Result<f64, NnError> {
        let batch = targets.len();
        let q = self.forward_batch(xs, batch)?;
        let n_out = self.output_dim();
        let mut loss = 0.0;
        for b in 0..batch {
            let err = q[b * n_out + actions[b]] - targets[b];
            loss += err * err;
        }
        Ok(loss / batch as f64)
    }
}

fn relu(v: &mut [f64]) {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - libm::pow(b1, self.t as f64);
        let c2 = 1.0 - libm::pow(b2, self.t as f64);
        let step = self.lr / c1;
        let inv_c2 = 1.0 / c2;
        let eps = self.eps;
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= step * *m / (libm::sqrt(*v * inv_c2) + eps);
            }
        };
        for (((layer, (gw, gb)), (mw, mb)), (vw, vb)) in net
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(self.m.layers.iter_mut())
            .zip(self.v.layers.iter_mut())
        {
            update(&mut layer.weights, gw, mw, vw);
            update(&mut layer.bias, gb, mb, vb);
        }
    }
}
