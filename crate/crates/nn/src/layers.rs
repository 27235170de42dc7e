use rand::Rng;

use crate::error::{NnError, Result};
use crate::matrix::{orthogonal_init, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output.
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `y = act(W x + b)`, `W` is `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(NnError::DimensionMismatch {
                what: "dense bias",
                expected: weights.rows(),
                got: bias.len(),
            });
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn orthogonal<R: Rng + ?Sized>(
        inputs: usize,
        outputs: usize,
        gain: f64,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let weights = orthogonal_init(outputs, inputs, gain, rng)?;
        Self::new(weights, vec![0.0; outputs], activation)
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        self.weights.mul_vec_add(x, &mut out);
        for v in &mut out {
            *v = self.activation.apply(*v);
        }
        out
    }

    /// Accumulates parameter gradients and returns `∂L/∂x`.
    pub fn backward(
        &self,
        x: &[f64],
        y: &[f64],
        d_y: &[f64],
        grad_w: &mut [f64],
        grad_b: &mut [f64],
    ) -> Vec<f64> {
        let d_z: Vec<f64> = y
            .iter()
            .zip(d_y)
            .map(|(&yv, &g)| g * self.activation.derivative_from_output(yv))
            .collect();
        for (gb, dz) in grad_b.iter_mut().zip(&d_z) {
            *gb += dz;
        }
        Matrix::outer_add(self.outputs(), self.inputs(), &d_z, x, grad_w);
        let mut d_x = vec![0.0; self.inputs()];
        self.weights.mul_t_vec_add(&d_z, &mut d_x);
        d_x
    }
}

/// Elman cell `h' = tanh(W_x x + W_h h + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentCell {
    pub input_weights: Matrix,
    pub hidden_weights: Matrix,
    pub bias: Vec<f64>,
}

impl RecurrentCell {
    pub fn new(input_weights: Matrix, hidden_weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        let h = hidden_weights.rows();
        if hidden_weights.cols() != h {
            return Err(NnError::InvalidDimensions(format!(
                "hidden weights must be square, got {}x{}",
                h,
                hidden_weights.cols()
            )));
        }
        if input_weights.rows() != h || bias.len() != h {
            return Err(NnError::DimensionMismatch {
                what: "recurrent input weights / bias",
                expected: h,
                got: input_weights.rows().min(bias.len()),
            });
        }
        Ok(Self {
            input_weights,
            hidden_weights,
            bias,
        })
    }

    pub fn orthogonal<R: Rng + ?Sized>(
        inputs: usize,
        hidden: usize,
        gain: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let input_weights = orthogonal_init(hidden, inputs, gain, rng)?;
        let hidden_weights = orthogonal_init(hidden, hidden, gain, rng)?;
        Self::new(input_weights, hidden_weights, vec![0.0; hidden])
    }

    pub fn hidden_size(&self) -> usize {
        self.bias.len()
    }

    pub fn inputs(&self) -> usize {
        self.input_weights.cols()
    }

    pub fn step(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let mut z = self.bias.clone();
        self.input_weights.mul_vec_add(x, &mut z);
        self.hidden_weights.mul_vec_add(h, &mut z);
        for v in &mut z {
            *v = v.tanh();
        }
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_derivative_at_zero_passes_gradient_through() {
        let layer = DenseLayer::new(
            Matrix::from_vec(1, 1, vec![1.0]).unwrap(),
            vec![0.0],
            Activation::Tanh,
        )
        .unwrap();
        let x = [0.0];
        let y = layer.forward(&x);
        let (mut gw, mut gb) = (vec![0.0], vec![0.0]);
        let dx = layer.backward(&x, &y, &[0.7], &mut gw, &mut gb);
        assert_eq!(dx, vec![0.7]);
        assert_eq!(gb, vec![0.7]);
    }

    #[test]
    fn relu_blocks_negative_side() {
        let layer = DenseLayer::new(
            Matrix::from_vec(2, 1, vec![1.0, -1.0]).unwrap(),
            vec![0.0, 0.0],
            Activation::Relu,
        )
        .unwrap();
        let y = layer.forward(&[2.0]);
        assert_eq!(y, vec![2.0, 0.0]);
        let (mut gw, mut gb) = (vec![0.0; 2], vec![0.0; 2]);
        let dx = layer.backward(&[2.0], &y, &[1.0, 1.0], &mut gw, &mut gb);
        assert_eq!(dx, vec![1.0]);
        assert_eq!(gb, vec![1.0, 0.0]);
    }

    #[test]
    fn non_square_hidden_weights_are_rejected() {
        let r = RecurrentCell::new(Matrix::zeros(2, 3), Matrix::zeros(2, 3), vec![0.0; 2]);
        assert!(r.is_err());
    }
}
