use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

pub const DEFAULT_LEAKY_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    LeakyRelu(f64),
    Identity,
}

impl Activation {
    pub fn leaky() -> Self {
        Activation::LeakyRelu(DEFAULT_LEAKY_ALPHA)
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu(alpha) => {
                if x > 0.0 {
                    x
                } else {
                    alpha * x
                }
            }
            Activation::Identity => x,
        }
    }

    /// Derivative with respect to the pre-activation.
    #[inline]
    pub fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::LeakyRelu(alpha) => {
                if pre > 0.0 {
                    1.0
                } else {
                    alpha
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::LeakyRelu(alpha) => write!(f, "leaky-relu({alpha})"),
            Activation::Identity => f.write_str("identity"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "identity" {
            return Ok(Activation::Identity);
        }
        let alpha = s
            .strip_prefix("leaky-relu(")
            .and_then(|rest| rest.strip_suffix(')'))
            .and_then(|a| a.parse::<f64>().ok())
            .ok_or_else(|| Error::Checkpoint(format!("unknown activation tag '{s}'")))?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Checkpoint(format!("leaky-relu slope {alpha} outside (0, 1)")));
        }
        Ok(Activation::LeakyRelu(alpha))
    }
}

/// Fully connected layer, `y = act(W x + b)` with `W` stored row-major
/// as `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        DenseLayer { in_dim, out_dim, weights: vec![0.0; in_dim * out_dim], bias: vec![0.0; out_dim], activation }
    }

    /// He-style uniform init, `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`, zero bias.
    pub fn he_uniform<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        let bound = (6.0 / in_dim as f64).sqrt();
        let weights = (0..in_dim * out_dim).map(|_| rng.random_range(-bound..bound)).collect();
        DenseLayer { in_dim, out_dim, weights, bias: vec![0.0; out_dim], activation }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.in_dim * self.out_dim || self.bias.len() != self.out_dim {
            return Err(Error::ShapeMismatch(format!(
                "layer {}x{} holds {} weights and {} biases",
                self.out_dim,
                self.in_dim,
                self.weights.len(),
                self.bias.len()
            )));
        }
        if self.weights.iter().chain(self.bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint("non-finite layer parameter".into()));
        }
        Ok(())
    }

    /// Writes pre-activations and activations for input `x`.
    fn forward_into(&self, x: &[f64], pre: &mut Vec<f64>, out: &mut Vec<f64>) {
        debug_assert_eq!(x.len(), self.in_dim);
        pre.clear();
        out.clear();
        for (row, b) in self.weights.chunks_exact(self.in_dim).zip(self.bias.iter()) {
            let z = row.iter().zip(x.iter()).fold(*b, |acc, (w, xi)| acc + w * xi);
            pre.push(z);
            out.push(self.activation.apply(z));
        }
    }
}

/// Gradient buffers shaped like one [`DenseLayer`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerGrad {
    pub fn zeros_like(layer: &DenseLayer) -> Self {
        LayerGrad { weights: vec![0.0; layer.weights.len()], bias: vec![0.0; layer.bias.len()] }
    }
}

/// A stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone, Default)]
pub struct MlpTrace {
    /// `inputs[i]` is the input to layer `i`; the last entry is the network output.
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl MlpTrace {
    pub fn output(&self) -> &[f64] {
        self.inputs.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Mlp {
    /// Hidden layers get `hidden` activation, the last layer is identity.
    pub fn build<R: Rng + ?Sized>(
        dims: &[usize],
        hidden: Activation,
        last: Activation,
        mut init: impl FnMut(usize, usize, Activation, &mut R) -> DenseLayer,
        rng: &mut R,
    ) -> Self {
        let count = dims.len() - 1;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i + 1 == count { last } else { hidden };
                init(w[0], w[1], act, rng)
            })
            .collect();
        Mlp { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    /// `[in, hidden..., out]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.out_dim));
        dims
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut pre = Vec::new();
        let mut out = Vec::new();
        for layer in &self.layers {
            layer.forward_into(&cur, &mut pre, &mut out);
            std::mem::swap(&mut cur, &mut out);
        }
        cur
    }

    pub fn forward_trace(&self, x: &[f64]) -> MlpTrace {
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        let mut pres = Vec::with_capacity(self.layers.len());
        inputs.push(x.to_vec());
        for layer in &self.layers {
            let mut pre = Vec::with_capacity(layer.out_dim);
            let mut out = Vec::with_capacity(layer.out_dim);
            layer.forward_into(inputs.last().unwrap(), &mut pre, &mut out);
            pres.push(pre);
            inputs.push(out);
        }
        MlpTrace { inputs, pre: pres }
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the network input.
    pub fn backward(&self, trace: &MlpTrace, grad_out: &[f64], grads: &mut [LayerGrad]) -> Vec<f64> {
        let mut delta = grad_out.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            for (d, z) in delta.iter_mut().zip(trace.pre[i].iter()) {
                *d *= layer.activation.derivative(*z);
            }
            let input = &trace.inputs[i];
            let g = &mut grads[i];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                g.bias[o] += d;
                let row = &mut g.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (gw, xi) in row.iter_mut().zip(input.iter()) {
                    *gw += d * xi;
                }
            }
            let mut next = vec![0.0; layer.in_dim];
            for (row, d) in layer.weights.chunks_exact(layer.in_dim).zip(delta.iter()) {
                if *d == 0.0 {
                    continue;
                }
                for (n, w) in next.iter_mut().zip(row.iter()) {
                    *n += d * w;
                }
            }
            delta = next;
        }
        delta
    }

    pub fn zero_grads(&self) -> Vec<LayerGrad> {
        self.layers.iter().map(LayerGrad::zeros_like).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn leaky_relu_derivative_per_element() {
        let act = Activation::LeakyRelu(0.01);
        assert_eq!(act.apply(2.0), 2.0);
        assert_eq!(act.apply(-2.0), -0.02);
        assert_eq!(act.derivative(0.5), 1.0);
        assert_eq!(act.derivative(-0.5), 0.01);
        assert_eq!(Activation::Identity.derivative(-3.0), 1.0);
    }

    #[test]
    fn activation_tags_round_trip() {
        for act in [Activation::Identity, Activation::LeakyRelu(0.01), Activation::LeakyRelu(0.2)] {
            assert_eq!(act.to_string().parse::<Activation>().unwrap(), act);
        }
        assert!("leaky-relu(1.5)".parse::<Activation>().is_err());
        assert!("tanh".parse::<Activation>().is_err());
    }

    #[test]
    fn backward_matches_finite_differences_on_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mlp = Mlp::build(&[3, 4, 2], Activation::leaky(), Activation::Identity, DenseLayer::he_uniform, &mut rng);
        let x = [0.3, -0.7, 0.2];
        // Scalar objective: sum of outputs.
        let trace = mlp.forward_trace(&x);
        let mut grads = mlp.zero_grads();
        let gx = mlp.backward(&trace, &[1.0, 1.0], &mut grads);
        let h = 1e-6;
        for i in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (mlp.forward(&xp).iter().sum::<f64>() - mlp.forward(&xm).iter().sum::<f64>()) / (2.0 * h);
            assert!((fd - gx[i]).abs() < 1e-7, "{fd} vs {}", gx[i]);
        }
    }

    #[test]
    fn trace_output_matches_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mlp =
            Mlp::build(&[5, 6, 6, 2], Activation::leaky(), Activation::Identity, DenseLayer::he_uniform, &mut rng);
        let x = [0.1, 0.2, -0.3, 0.4, -0.5];
        assert_eq!(mlp.forward(&x), mlp.forward_trace(&x).output());
        assert_eq!(mlp.dims(), vec![5, 6, 6, 2]);
    }
}
