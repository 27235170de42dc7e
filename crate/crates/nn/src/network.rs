use rand::Rng;

use crate::checkpoint::NamedArray;
use crate::error::{NnError, Result};
use crate::layers::{Activation, DenseLayer, RecurrentCell};
use crate::matrix::Matrix;

/// Shape of a [`SequenceNet`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetSpec {
    pub inputs: usize,
    pub width: usize,
    pub outputs: usize,
    /// With `false` the trunk is a feed-forward tanh layer and the carried
    /// state is empty.
    pub recurrent: bool,
    pub head_gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Trunk {
    Recurrent(RecurrentCell),
    Dense(DenseLayer),
}

/// A tanh trunk (recurrent or dense) followed by a linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceNet {
    spec: NetSpec,
    trunk: Trunk,
    head: DenseLayer,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct SequenceCache {
    pub inputs: Vec<Vec<f64>>,
    pub initial_state: Vec<f64>,
    /// Trunk activations after each step.
    pub hiddens: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
}

impl SequenceCache {
    /// Carried state after the final step.
    pub fn final_state(&self, recurrent: bool) -> Vec<f64> {
        if !recurrent {
            return Vec::new();
        }
        self.hiddens
            .last()
            .cloned()
            .unwrap_or_else(|| self.initial_state.clone())
    }
}

/// Gradient buffers parallel to [`SequenceNet::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<f64>>);

impl Gradients {
    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for v in self.0.iter_mut().flatten() {
            *v *= k;
        }
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Rescales so the global norm is at most `max_norm`; returns the norm
    /// before clipping.
    pub fn clip_norm(&mut self, max_norm: f64) -> f64 {
        let n = self.norm();
        if n > max_norm && n > 0.0 {
            self.scale(max_norm / n);
        }
        n
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }
}

impl SequenceNet {
    pub fn new<R: Rng + ?Sized>(spec: NetSpec, rng: &mut R) -> Result<Self> {
        if spec.inputs == 0 || spec.width == 0 || spec.outputs == 0 {
            return Err(NnError::InvalidDimensions(format!(
                "network dimensions must be positive, got {}/{}/{}",
                spec.inputs, spec.width, spec.outputs
            )));
        }
        let trunk = if spec.recurrent {
            Trunk::Recurrent(RecurrentCell::orthogonal(spec.inputs, spec.width, 1.0, rng)?)
        } else {
            Trunk::Dense(DenseLayer::orthogonal(
                spec.inputs,
                spec.width,
                1.0,
                Activation::Tanh,
                rng,
            )?)
        };
        let head = DenseLayer::orthogonal(
            spec.width,
            spec.outputs,
            spec.head_gain,
            Activation::Identity,
            rng,
        )?;
        Ok(Self { spec, trunk, head })
    }

    pub fn spec(&self) -> NetSpec {
        self.spec
    }

    /// Length of the carried state (zero for feed-forward nets).
    pub fn state_size(&self) -> usize {
        if self.spec.recurrent {
            self.spec.width
        } else {
            0
        }
    }

    pub fn initial_state(&self) -> Vec<f64> {
        vec![0.0; self.state_size()]
    }

    fn trunk_step(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        match &self.trunk {
            Trunk::Recurrent(cell) => cell.step(x, h),
            Trunk::Dense(layer) => layer.forward(x),
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.inputs {
            return Err(NnError::DimensionMismatch {
                what: "network input",
                expected: self.spec.inputs,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn check_state(&self, h: &[f64]) -> Result<()> {
        if h.len() != self.state_size() {
            return Err(NnError::DimensionMismatch {
                what: "network state",
                expected: self.state_size(),
                got: h.len(),
            });
        }
        Ok(())
    }

    /// One step; returns `(output, next_state)`.
    pub fn step(&self, x: &[f64], h: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_input(x)?;
        self.check_state(h)?;
        let z = self.trunk_step(x, h);
        let out = self.head.forward(&z);
        let next = if self.spec.recurrent { z } else { Vec::new() };
        Ok((out, next))
    }

    pub fn forward(&self, inputs: &[Vec<f64>], h0: &[f64]) -> Result<SequenceCache> {
        self.check_state(h0)?;
        let mut hiddens = Vec::with_capacity(inputs.len());
        let mut outputs = Vec::with_capacity(inputs.len());
        let mut h = h0.to_vec();
        for x in inputs {
            self.check_input(x)?;
            let z = self.trunk_step(x, &h);
            outputs.push(self.head.forward(&z));
            if self.spec.recurrent {
                h.clone_from(&z);
            }
            hiddens.push(z);
        }
        Ok(SequenceCache {
            inputs: inputs.to_vec(),
            initial_state: h0.to_vec(),
            hiddens,
            outputs,
        })
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients(self.params().iter().map(|p| vec![0.0; p.len()]).collect())
    }

    /// Backpropagation through time for a loss whose gradient with respect
    /// to each step's output is `d_outputs[t]`.
    pub fn backward(&self, cache: &SequenceCache, d_outputs: &[Vec<f64>]) -> Result<Gradients> {
        let n = cache.outputs.len();
        if d_outputs.len() != n {
            return Err(NnError::DimensionMismatch {
                what: "output gradient steps",
                expected: n,
                got: d_outputs.len(),
            });
        }
        let mut grads = self.zero_gradients();
        let split = grads.0.len() - 2;
        let (trunk_grads, head_grads) = grads.0.split_at_mut(split);
        let (head_w, head_b) = head_grads.split_at_mut(1);
        let width = self.spec.width;
        let mut d_h_next = vec![0.0; width];
        for t in (0..n).rev() {
            let z = &cache.hiddens[t];
            let mut d_z =
                self.head
                    .backward(z, &cache.outputs[t], &d_outputs[t], &mut head_w[0], &mut head_b[0]);
            match &self.trunk {
                Trunk::Recurrent(cell) => {
                    for (dz, dn) in d_z.iter_mut().zip(&d_h_next) {
                        *dz += dn;
                    }
                    let d_a: Vec<f64> =
                        z.iter().zip(&d_z).map(|(&h, &g)| g * (1.0 - h * h)).collect();
                    let h_prev = if t == 0 {
                        &cache.initial_state
                    } else {
                        &cache.hiddens[t - 1]
                    };
                    let (gx, rest) = trunk_grads.split_at_mut(1);
                    let (gh, gb) = rest.split_at_mut(1);
                    Matrix::outer_add(width, cell.inputs(), &d_a, &cache.inputs[t], &mut gx[0]);
                    Matrix::outer_add(width, width, &d_a, h_prev, &mut gh[0]);
                    for (b, a) in gb[0].iter_mut().zip(&d_a) {
                        *b += a;
                    }
                    d_h_next.iter_mut().for_each(|v| *v = 0.0);
                    cell.hidden_weights.mul_t_vec_add(&d_a, &mut d_h_next);
                }
                Trunk::Dense(layer) => {
                    let (gw, gb) = trunk_grads.split_at_mut(1);
                    layer.backward(&cache.inputs[t], z, &d_z, &mut gw[0], &mut gb[0]);
                }
            }
        }
        Ok(grads)
    }

    pub fn param_names(&self) -> Vec<&'static str> {
        match self.trunk {
            Trunk::Recurrent(_) => vec!["trunk.wx", "trunk.wh", "trunk.b", "head.w", "head.b"],
            Trunk::Dense(_) => vec!["trunk.w", "trunk.b", "head.w", "head.b"],
        }
    }

    pub fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = match &self.trunk {
            Trunk::Recurrent(c) => vec![
                c.input_weights.data(),
                c.hidden_weights.data(),
                &c.bias,
            ],
            Trunk::Dense(l) => vec![l.weights.data(), &l.bias],
        };
        out.push(self.head.weights.data());
        out.push(&self.head.bias);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = match &mut self.trunk {
            Trunk::Recurrent(c) => vec![
                c.input_weights.data_mut(),
                c.hidden_weights.data_mut(),
                &mut c.bias,
            ],
            Trunk::Dense(l) => vec![l.weights.data_mut(), &mut l.bias],
        };
        out.push(self.head.weights.data_mut());
        out.push(&mut self.head.bias);
        out
    }

    fn param_shapes(&self) -> Vec<[usize; 2]> {
        let (i, w, o) = (self.spec.inputs, self.spec.width, self.spec.outputs);
        let mut shapes = match self.trunk {
            Trunk::Recurrent(_) => vec![[w, i], [w, w], [w, 1]],
            Trunk::Dense(_) => vec![[w, i], [w, 1]],
        };
        shapes.extend([[o, w], [o, 1]]);
        shapes
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn to_named_arrays(&self, prefix: &str) -> Vec<NamedArray> {
        self.param_names()
            .into_iter()
            .zip(self.param_shapes())
            .zip(self.params())
            .map(|((name, shape), data)| NamedArray {
                name: format!("{prefix}{name}"),
                shape,
                data: data.to_vec(),
            })
            .collect()
    }

    /// Overwrites parameters from arrays produced by [`Self::to_named_arrays`]
    /// with the same prefix.
    pub fn load_named_arrays(&mut self, prefix: &str, arrays: &[NamedArray]) -> Result<()> {
        let names = self.param_names();
        let shapes = self.param_shapes();
        let mut values = Vec::with_capacity(names.len());
        for (name, shape) in names.iter().zip(&shapes) {
            let full = format!("{prefix}{name}");
            let arr = arrays
                .iter()
                .find(|a| a.name == full)
                .ok_or_else(|| NnError::Checkpoint(format!("missing array {full}")))?;
            if arr.shape != *shape || arr.data.len() != shape[0] * shape[1] {
                return Err(NnError::Checkpoint(format!(
                    "array {full} has shape {:?}, expected {:?}",
                    arr.shape, shape
                )));
            }
            if arr.data.iter().any(|v| !v.is_finite()) {
                return Err(NnError::NonFinite("checkpoint parameter"));
            }
            values.push(arr.data.clone());
        }
        for (dst, src) in self.params_mut().into_iter().zip(values) {
            dst.copy_from_slice(&src);
        }
        Ok(())
    }
}
