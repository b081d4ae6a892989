use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Matrix, Parameters};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Linear => x,
        }
    }

    /// Derivative at the pre-activation `x`; relu'(0) = 0.
    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

/// Uniform Glorot initialisation, `±√(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.random_range(-limit..=limit)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized by construction")
}

/// Fully connected layer `activation(x·W + b)` applied row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Matrix,
    pub activation: Activation,
}

/// Intermediate values a dense backward pass needs.
#[derive(Debug, Clone)]
pub struct DenseCache {
    input: Matrix,
    pre: Matrix,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            weights: Matrix::zeros(inputs, outputs),
            bias: Matrix::zeros(1, outputs),
            activation,
        }
    }

    pub fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        Self {
            weights: glorot_uniform(inputs, outputs, rng),
            bias: Matrix::zeros(1, outputs),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, DenseCache)> {
        if x.cols() != self.inputs() {
            return Err(Error::Shape {
                op: "dense_forward",
                detail: format!("input has {} columns, layer expects {}", x.cols(), self.inputs()),
            });
        }
        let mut pre = x.matmul(&self.weights)?;
        pre.add_row_broadcast(&self.bias)?;
        let out = pre.map(|v| self.activation.apply(v));
        out.check_finite("dense_forward")?;
        Ok((
            out,
            DenseCache {
                input: x.clone(),
                pre,
            },
        ))
    }

    /// Returns parameter gradients (as a layer of the same shape) and the
    /// gradient with respect to the input.
    pub fn backward(&self, cache: &DenseCache, upstream: &Matrix) -> Result<(DenseLayer, Matrix)> {
        let delta = upstream.zip_map(&cache.pre, |g, p| g * self.activation.derivative(p))?;
        let grad = DenseLayer {
            weights: cache.input.t_matmul(&delta)?,
            bias: delta.column_sums(),
            activation: self.activation,
        };
        let dx = delta.matmul_t(&self.weights)?;
        Ok((grad, dx))
    }
}

impl Parameters for DenseLayer {
    fn tensors(&self) -> Vec<(String, &Matrix)> {
        vec![("weight".into(), &self.weights), ("bias".into(), &self.bias)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.weights, &mut self.bias]
    }
}

/// Graph convolution `relu(S·H·W + b)` where `S` is the symmetrically
/// normalised adjacency with self loops.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphConvLayer {
    pub weights: Matrix,
    pub bias: Matrix,
}

#[derive(Debug, Clone)]
pub struct GraphConvCache {
    support: Matrix,
    aggregated: Matrix,
    pre: Matrix,
}

impl GraphConvLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Matrix::zeros(inputs, outputs),
            bias: Matrix::zeros(1, outputs),
        }
    }

    pub fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Self {
            weights: glorot_uniform(inputs, outputs, rng),
            bias: Matrix::zeros(1, outputs),
        }
    }

    pub fn forward(&self, h: &Matrix, support: &Matrix) -> Result<(Matrix, GraphConvCache)> {
        if support.rows() != h.rows() || support.cols() != h.rows() {
            return Err(Error::Shape {
                op: "graphconv_forward",
                detail: format!(
                    "adjacency is {}x{} for {} nodes",
                    support.rows(),
                    support.cols(),
                    h.rows()
                ),
            });
        }
        if h.cols() != self.weights.rows() {
            return Err(Error::Shape {
                op: "graphconv_forward",
                detail: format!("features have {} columns, layer expects {}", h.cols(), self.weights.rows()),
            });
        }
        let aggregated = support.matmul(h)?;
        let mut pre = aggregated.matmul(&self.weights)?;
        pre.add_row_broadcast(&self.bias)?;
        let out = pre.map(|v| v.max(0.0));
        out.check_finite("graphconv_forward")?;
        Ok((
            out,
            GraphConvCache {
                support: support.clone(),
                aggregated,
                pre,
            },
        ))
    }

    pub fn backward(&self, cache: &GraphConvCache, upstream: &Matrix) -> Result<(GraphConvLayer, Matrix)> {
        let delta = upstream.zip_map(&cache.pre, |g, p| if p > 0.0 { g } else { 0.0 })?;
        let grad = GraphConvLayer {
            weights: cache.aggregated.t_matmul(&delta)?,
            bias: delta.column_sums(),
        };
        let d_aggregated = delta.matmul_t(&self.weights)?;
        let dh = cache.support.t_matmul(&d_aggregated)?;
        Ok((grad, dh))
    }
}

impl Parameters for GraphConvLayer {
    fn tensors(&self) -> Vec<(String, &Matrix)> {
        vec![("weight".into(), &self.weights), ("bias".into(), &self.bias)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.weights, &mut self.bias]
    }
}
