//! One-hidden-layer perceptrons with exact gradients, shared by actors and
//! critics, plus the Adam optimizer that trains them.
//!
//! Parameters live in one flat vector laid out as
//! `[W1 (hidden × input, row-major) | b1 (hidden) | W2 (hidden) | b2]`
//! so the optimizer can treat them uniformly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest hidden layer supported; the forward pass keeps activations on the
/// stack.
pub const MAX_HIDDEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Abs,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Abs => z.abs(),
            Activation::Identity => z,
        }
    }

    /// Derivative given the pre-activation `z` and the output `y`.
    /// The abs subgradient at exactly zero is 0.
    #[inline]
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Abs => {
                if z > 0.0 {
                    1.0
                } else if z < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Scalar-output network `out(W2·tanh(W1·x + b1) + b2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_activation: Activation,
    pub params: Vec<f64>,
}

/// Parameter and input gradients from [`Mlp::backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

impl Mlp {
    pub fn param_count(input_dim: usize, hidden_dim: usize) -> usize {
        hidden_dim * input_dim + 2 * hidden_dim + 1
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize, output_activation: Activation) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 || hidden_dim > MAX_HIDDEN {
            return Err(Error::InvalidArgument(format!(
                "network shape {input_dim}x{hidden_dim} unsupported (hidden must be 1..={MAX_HIDDEN})"
            )));
        }
        Ok(Self {
            input_dim,
            hidden_dim,
            output_activation,
            params: vec![0.0; Self::param_count(input_dim, hidden_dim)],
        })
    }

    /// Every parameter drawn uniformly from `[-range, range]`.
    pub fn random<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_dim: usize,
        output_activation: Activation,
        range: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(input_dim, hidden_dim, output_activation)?;
        if range > 0.0 {
            for p in &mut net.params {
                *p = rng.gen_range(-range..=range);
            }
        }
        Ok(net)
    }

    fn b1_offset(&self) -> usize {
        self.hidden_dim * self.input_dim
    }

    fn w2_offset(&self) -> usize {
        self.b1_offset() + self.hidden_dim
    }

    fn b2_offset(&self) -> usize {
        self.w2_offset() + self.hidden_dim
    }

    pub fn w1(&self) -> &[f64] {
        &self.params[..self.b1_offset()]
    }

    pub fn b1(&self) -> &[f64] {
        &self.params[self.b1_offset()..self.w2_offset()]
    }

    pub fn w2(&self) -> &[f64] {
        &self.params[self.w2_offset()..self.b2_offset()]
    }

    pub fn w2_mut(&mut self) -> &mut [f64] {
        let (a, b) = (self.w2_offset(), self.b2_offset());
        &mut self.params[a..b]
    }

    pub fn b2(&self) -> f64 {
        self.params[self.b2_offset()]
    }

    pub fn set_b2(&mut self, value: f64) {
        let i = self.b2_offset();
        self.params[i] = value;
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, got: input.len() });
        }
        Ok(())
    }

    /// Hidden activations into `hidden`, returns the output pre-activation.
    #[inline]
    fn hidden_pass(&self, input: &[f64], hidden: &mut [f64; MAX_HIDDEN]) -> f64 {
        let (n_in, n_h) = (self.input_dim, self.hidden_dim);
        let w1 = &self.params[..n_h * n_in];
        let b1 = &self.params[n_h * n_in..n_h * n_in + n_h];
        let w2 = &self.params[n_h * n_in + n_h..n_h * n_in + 2 * n_h];
        let mut z_out = self.params[n_h * n_in + 2 * n_h];
        for j in 0..n_h {
            let row = &w1[j * n_in..(j + 1) * n_in];
            let z = row.iter().zip(input).fold(b1[j], |acc, (w, x)| acc + w * x);
            let h = z.tanh();
            hidden[j] = h;
            z_out += w2[j] * h;
        }
        z_out
    }

    pub fn forward(&self, input: &[f64]) -> Result<f64> {
        self.check_input(input)?;
        let mut hidden = [0.0; MAX_HIDDEN];
        let z = self.hidden_pass(input, &mut hidden);
        Ok(self.output_activation.apply(z))
    }

    /// Gradients of `upstream · forward(input)`, accumulated into the
    /// provided buffers (which are overwritten, not added to). Returns the
    /// forward output.
    pub fn backward_into(
        &self,
        input: &[f64],
        upstream: f64,
        param_grads: &mut [f64],
        input_grad: &mut [f64],
    ) -> Result<f64> {
        self.check_input(input)?;
        if param_grads.len() != self.params.len() {
            return Err(Error::DimensionMismatch { expected: self.params.len(), got: param_grads.len() });
        }
        if input_grad.len() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, got: input_grad.len() });
        }
        let (n_in, n_h) = (self.input_dim, self.hidden_dim);
        let mut hidden = [0.0; MAX_HIDDEN];
        let z = self.hidden_pass(input, &mut hidden);
        let y = self.output_activation.apply(z);
        let dz = upstream * self.output_activation.derivative(z, y);

        let w2_off = n_h * n_in + n_h;
        input_grad.iter_mut().for_each(|g| *g = 0.0);
        for j in 0..n_h {
            let h = hidden[j];
            let w2 = self.params[w2_off + j];
            param_grads[w2_off + j] = dz * h;
            let dh = dz * w2 * (1.0 - h * h);
            param_grads[n_h * n_in + j] = dh;
            for i in 0..n_in {
                param_grads[j * n_in + i] = dh * input[i];
                input_grad[i] += dh * self.params[j * n_in + i];
            }
        }
        param_grads[w2_off + n_h] = dz;
        Ok(y)
    }

    pub fn backward(&self, input: &[f64], upstream: f64) -> Result<Gradients> {
        let mut grads = Gradients {
            params: vec![0.0; self.params.len()],
            input: vec![0.0; self.input_dim],
        };
        self.backward_into(input, upstream, &mut grads.params, &mut grads.input)?;
        Ok(grads)
    }

    /// `d forward / d input` without parameter gradients.
    pub fn input_gradient(&self, input: &[f64], out: &mut [f64]) -> Result<f64> {
        self.check_input(input)?;
        let (n_in, n_h) = (self.input_dim, self.hidden_dim);
        let mut hidden = [0.0; MAX_HIDDEN];
        let z = self.hidden_pass(input, &mut hidden);
        let y = self.output_activation.apply(z);
        let dz = self.output_activation.derivative(z, y);
        let w2_off = n_h * n_in + n_h;
        out.iter_mut().for_each(|g| *g = 0.0);
        for j in 0..n_h {
            let h = hidden[j];
            let dh = dz * self.params[w2_off + j] * (1.0 - h * h);
            for i in 0..n_in {
                out[i] += dh * self.params[j * n_in + i];
            }
        }
        Ok(y)
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

/// Moment estimates for [`adam_step`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam update applied in place. Parameters and moments are
/// untouched when any gradient is non-finite.
pub fn adam_step(params: &mut [f64], grads: &[f64], opt: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != grads.len() || opt.m.len() != params.len() {
        return Err(Error::DimensionMismatch { expected: params.len(), got: grads.len() });
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    opt.step_count += 1;
    let t = opt.step_count as f64;
    let (b1, b2) = (opt.beta1, opt.beta2);
    let c1 = 1.0 - b1.powf(t);
    let c2 = 1.0 - b2.powf(t);
    for i in 0..params.len() {
        let g = grads[i];
        opt.m[i] = b1 * opt.m[i] + (1.0 - b1) * g;
        opt.v[i] = b2 * opt.v[i] + (1.0 - b2) * g * g;
        let m_hat = opt.m[i] / c1;
        let v_hat = opt.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + opt.epsilon);
    }
    Ok(())
}
