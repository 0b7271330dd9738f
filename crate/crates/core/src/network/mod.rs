//! Feedforward network model, persistence and pointwise evaluation.
//!
//! A network with `l` hidden layers maps `x^0 = x` through
//! `x^k = phi(W_k x^{k-1} + b_k)` for `k = 1..l` and ends with the affine
//! output `W_{l+1} x^l + b_{l+1}`.

mod format;
mod random;

pub use format::{
    load_network, network_from_json, network_to_json, read_binary, save_network,
    save_network_binary, save_network_json, write_binary, BINARY_MAGIC, BINARY_VERSION,
};
pub use random::generate_random;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{power_iteration_op, DenseMatrix};

/// Slope-restricted scalar activation applied elementwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// Derivative at `x`. ReLU uses 0 at the kink.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-x).exp());
                s * (1.0 - s)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::InvalidNetwork(format!(
                "unknown activation {other:?}"
            ))),
        }
    }
}

/// One affine map `W x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weights: DenseMatrix,
    pub bias: Option<Vec<f64>>,
}

impl Layer {
    pub fn new(weights: DenseMatrix) -> Self {
        Self {
            weights,
            bias: None,
        }
    }

    pub fn with_bias(weights: DenseMatrix, bias: Vec<f64>) -> Self {
        Self {
            weights,
            bias: Some(bias),
        }
    }
}

/// Validated feedforward network. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    activation: Activation,
}

impl Network {
    /// Checks the dimension chain, bias lengths and finiteness.
    pub fn new(layers: Vec<Layer>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidNetwork(
                "a network needs at least one weight matrix".into(),
            ));
        }
        for (k, layer) in layers.iter().enumerate() {
            let w = &layer.weights;
            if w.rows() == 0 || w.cols() == 0 {
                return Err(Error::InvalidNetwork(format!(
                    "layer {} has an empty {}x{} weight matrix",
                    k + 1,
                    w.rows(),
                    w.cols()
                )));
            }
            if !w.is_finite() {
                return Err(Error::InvalidNetwork(format!(
                    "layer {} has non-finite weights",
                    k + 1
                )));
            }
            if k > 0 {
                let expected = layers[k - 1].weights.rows();
                if w.cols() != expected {
                    return Err(Error::DimensionChain {
                        layer: k + 1,
                        expected,
                        found: w.cols(),
                    });
                }
            }
            if let Some(b) = &layer.bias {
                if b.len() != w.rows() {
                    return Err(Error::InvalidNetwork(format!(
                        "layer {} bias has length {}, expected {}",
                        k + 1,
                        b.len(),
                        w.rows()
                    )));
                }
                if b.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidNetwork(format!(
                        "layer {} has non-finite bias",
                        k + 1
                    )));
                }
            }
        }
        Ok(Self { layers, activation })
    }

    /// Convenience constructor from bare weights, without biases.
    pub fn from_weights(weights: Vec<DenseMatrix>, activation: Activation) -> Result<Self> {
        Self::new(weights.into_iter().map(Layer::new).collect(), activation)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    /// Weight matrix `W_{k+1}` (0-based index into the layer list).
    pub fn weight(&self, index: usize) -> &DenseMatrix {
        &self.layers[index].weights
    }

    pub fn weights(&self) -> impl Iterator<Item = &DenseMatrix> {
        self.layers.iter().map(|l| &l.weights)
    }

    /// Number of weight matrices, `l + 1`.
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Number of hidden (activated) layers, `l`.
    pub fn hidden_layers(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weights.rows()
    }

    /// Dimension chain `n_0, n_1, ..., n_{l+1}`.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.weights.rows()))
            .collect()
    }

    pub fn has_biases(&self) -> bool {
        self.layers.iter().any(|l| l.bias.is_some())
    }

    /// Replaces every bias; `None` strips them.
    pub fn with_biases(&self, biases: Option<Vec<Vec<f64>>>) -> Result<Self> {
        let layers = match biases {
            None => self
                .layers
                .iter()
                .map(|l| Layer::new(l.weights.clone()))
                .collect(),
            Some(bs) => {
                if bs.len() != self.layers.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "{} bias vectors for {} layers",
                        bs.len(),
                        self.layers.len()
                    )));
                }
                self.layers
                    .iter()
                    .zip(bs)
                    .map(|(l, b)| Layer::with_bias(l.weights.clone(), b))
                    .collect()
            }
        };
        Self::new(layers, self.activation)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "input has length {}, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::DimensionMismatch(
                "input has non-finite entries".into(),
            ));
        }
        Ok(())
    }

    /// Evaluates the network at `x`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut h = x.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = layer.weights.matvec(&h);
            if let Some(b) = &layer.bias {
                z.iter_mut().zip(b).for_each(|(zi, bi)| *zi += bi);
            }
            if k < last {
                z.iter_mut().for_each(|zi| *zi = self.activation.apply(*zi));
            }
            h = z;
        }
        Ok(h)
    }

    /// Activation derivatives `phi'(W_k x^{k-1} + b_k)` for each hidden layer.
    fn slopes(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut h = x.to_vec();
        let mut out = Vec::with_capacity(self.hidden_layers());
        for layer in &self.layers[..self.hidden_layers()] {
            let mut z = layer.weights.matvec(&h);
            if let Some(b) = &layer.bias {
                z.iter_mut().zip(b).for_each(|(zi, bi)| *zi += bi);
            }
            out.push(z.iter().map(|&v| self.activation.derivative(v)).collect());
            z.iter_mut().for_each(|zi| *zi = self.activation.apply(*zi));
            h = z;
        }
        out
    }

    /// Largest singular value of the Jacobian at `x`, by power iteration on
    /// `J^T J` (or `J J^T`, whichever is smaller) through matrix-vector
    /// products. The Rayleigh quotient never exceeds the true value, so the
    /// result is always a valid lower bound on the Lipschitz constant.
    pub fn jacobian_sigma(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let slopes = self.slopes(x);
        let n_in = self.input_dim();
        let n_out = self.output_dim();
        let max_width = self.dims().into_iter().max().unwrap_or(0);
        let mut buf_a = vec![0.0; max_width];
        let mut buf_b = vec![0.0; max_width];

        let est = if n_in <= n_out {
            power_iteration_op(
                n_in,
                |v, out| {
                    self.jvp(&slopes, v, &mut buf_a, &mut buf_b);
                    let y = buf_a[..n_out].to_vec();
                    self.vjp(&slopes, &y, &mut buf_a, &mut buf_b);
                    out.copy_from_slice(&buf_a[..n_in]);
                },
                None,
                JACOBIAN_TOL,
                JACOBIAN_MAX_ITER,
            )
        } else {
            power_iteration_op(
                n_out,
                |v, out| {
                    self.vjp(&slopes, v, &mut buf_a, &mut buf_b);
                    let y = buf_a[..n_in].to_vec();
                    self.jvp(&slopes, &y, &mut buf_a, &mut buf_b);
                    out.copy_from_slice(&buf_a[..n_out]);
                },
                None,
                JACOBIAN_TOL,
                JACOBIAN_MAX_ITER,
            )
        };
        let sigma = match est {
            Ok(e) => e.sigma,
            Err(Error::NotConverged { sigma, .. }) => sigma,
            Err(e) => return Err(e),
        };
        Ok(sigma.max(0.0).sqrt())
    }

    /// `J v` into `a[..n_out]`.
    fn jvp(&self, slopes: &[Vec<f64>], v: &[f64], a: &mut [f64], b: &mut [f64]) {
        a[..v.len()].copy_from_slice(v);
        for (k, layer) in self.layers.iter().enumerate() {
            let w = &layer.weights;
            w.matvec_into(&a[..w.cols()], &mut b[..w.rows()]);
            if let Some(d) = slopes.get(k) {
                b[..w.rows()]
                    .iter_mut()
                    .zip(d)
                    .for_each(|(bi, di)| *bi *= di);
            }
            a[..w.rows()].copy_from_slice(&b[..w.rows()]);
        }
    }

    /// `J^T y` into `a[..n_in]`.
    fn vjp(&self, slopes: &[Vec<f64>], y: &[f64], a: &mut [f64], b: &mut [f64]) {
        a[..y.len()].copy_from_slice(y);
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let w = &layer.weights;
            if let Some(d) = slopes.get(k) {
                a[..w.rows()]
                    .iter_mut()
                    .zip(d)
                    .for_each(|(ai, di)| *ai *= di);
            }
            w.matvec_transposed_into(&a[..w.rows()], &mut b[..w.cols()]);
            a[..w.cols()].copy_from_slice(&b[..w.cols()]);
        }
    }
}

const JACOBIAN_TOL: f64 = 1e-8;
const JACOBIAN_MAX_ITER: usize = 2_000;

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_net(act: Activation) -> Network {
        Network::from_weights(
            vec![
                DenseMatrix::from_rows(&[[2.0]]).unwrap(),
                DenseMatrix::from_rows(&[[3.0]]).unwrap(),
            ],
            act,
        )
        .unwrap()
    }

    #[test]
    fn chain_validation_names_layer() {
        let err = Network::from_weights(
            vec![DenseMatrix::zeros(3, 2), DenseMatrix::zeros(4, 4)],
            Activation::Relu,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionChain {
                layer: 2,
                expected: 3,
                found: 4
            }
        ));
    }

    #[test]
    fn rejects_empty_and_bad_bias() {
        assert!(Network::from_weights(vec![], Activation::Tanh).is_err());
        let bad = Network::new(
            vec![Layer::with_bias(DenseMatrix::identity(2), vec![0.0])],
            Activation::Tanh,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn forward_examples() {
        let id = Network::from_weights(
            vec![DenseMatrix::identity(2), DenseMatrix::identity(2)],
            Activation::Tanh,
        )
        .unwrap();
        assert_eq!(id.forward(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);

        let relu = Network::from_weights(
            vec![DenseMatrix::identity(1), DenseMatrix::identity(1)],
            Activation::Relu,
        )
        .unwrap();
        assert_eq!(relu.forward(&[-1.0]).unwrap(), vec![0.0]);

        let out = scalar_net(Activation::Tanh).forward(&[0.1]).unwrap();
        assert_eq!(out, vec![3.0 * 0.2f64.tanh()]);
    }

    #[test]
    fn forward_applies_biases() {
        let net = Network::new(
            vec![
                Layer::with_bias(DenseMatrix::identity(1), vec![1.0]),
                Layer::with_bias(DenseMatrix::identity(1), vec![-0.5]),
            ],
            Activation::Relu,
        )
        .unwrap();
        assert_eq!(net.forward(&[-0.25]).unwrap(), vec![0.25]);
    }

    #[test]
    fn forward_dimension_mismatch() {
        let net = scalar_net(Activation::Tanh);
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(net.jacobian_sigma(&[]).is_err());
    }

    #[test]
    fn jacobian_examples() {
        let lin = Network::from_weights(
            vec![DenseMatrix::from_rows(&[[2.0, 0.0], [0.0, 1.0]]).unwrap()],
            Activation::Tanh,
        )
        .unwrap();
        for x in [[0.0, 0.0], [3.0, -7.0]] {
            assert!((lin.jacobian_sigma(&x).unwrap() - 2.0).abs() < 1e-9);
        }

        let net = scalar_net(Activation::Tanh);
        assert!((net.jacobian_sigma(&[0.0]).unwrap() - 6.0).abs() < 1e-12);
        assert!(net.jacobian_sigma(&[50.0]).unwrap() < 1e-12);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        // 2 -> 3 -> 2 tanh network; compare against the dense Jacobian built
        // from central differences.
        let net = Network::new(
            vec![
                Layer::with_bias(
                    DenseMatrix::from_rows(&[[0.5, -1.0], [1.5, 0.25], [-0.75, 0.8]]).unwrap(),
                    vec![0.1, -0.2, 0.3],
                ),
                Layer::new(DenseMatrix::from_rows(&[[1.0, 0.5, -1.0], [0.2, -0.3, 0.9]]).unwrap()),
            ],
            Activation::Tanh,
        )
        .unwrap();
        let x = [0.3, -0.4];
        let h = 1e-6;
        let mut jac = DenseMatrix::zeros(2, 2);
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let fp = net.forward(&xp).unwrap();
            let fm = net.forward(&xm).unwrap();
            for i in 0..2 {
                jac.set(i, j, (fp[i] - fm[i]) / (2.0 * h));
            }
        }
        // 2x2 singular value from the closed form of J^T J.
        let jtj = jac.transpose().matmul(&jac).unwrap();
        let (a, b, d) = (jtj.get(0, 0), jtj.get(0, 1), jtj.get(1, 1));
        let top = 0.5 * (a + d) + (0.25 * (a - d).powi(2) + b * b).sqrt();
        let expected = top.sqrt();
        let got = net.jacobian_sigma(&x).unwrap();
        assert!((got - expected).abs() < 1e-7, "{got} vs {expected}");
    }

    #[test]
    fn relu_kink_uses_zero_slope() {
        let net = scalar_net(Activation::Relu);
        assert_eq!(net.jacobian_sigma(&[0.0]).unwrap(), 0.0);
        assert!((net.jacobian_sigma(&[0.5]).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_slope_peaks_at_origin() {
        assert_eq!(Activation::Sigmoid.derivative(0.0), 0.25);
        assert!(Activation::Sigmoid.derivative(3.0) < 0.25);
    }

    #[test]
    fn dims_and_counts() {
        let net = Network::from_weights(
            vec![
                DenseMatrix::zeros(4, 3),
                DenseMatrix::zeros(5, 4),
                DenseMatrix::zeros(2, 5),
            ],
            Activation::Sigmoid,
        )
        .unwrap();
        assert_eq!(net.dims(), vec![3, 4, 5, 2]);
        assert_eq!(net.hidden_layers(), 2);
        assert_eq!(net.num_layers(), 3);
    }
}
