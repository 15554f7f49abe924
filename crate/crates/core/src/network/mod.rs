//! The PINN approximator: a fully connected tanh network with a linear output.

mod adam;
mod batch;
mod snapshot;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use batch::{chunked_gradient, has_axis, OutputAdjoint, CHUNK_POINTS};
pub use batch::{forward_batch, BatchTrace};
pub use snapshot::{decode_snapshot, encode_snapshot, read_snapshot, write_snapshot, SNAPSHOT_VERSION};

use ndarray::{ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Axis, Directions, Jet, NodeId, Tape};
use crate::error::{usage, Error, Result};

/// Hidden width used in all experiments.
pub const HIDDEN_WIDTH: usize = 20;
/// Number of hidden layers used in all experiments.
pub const HIDDEN_LAYERS: usize = 7;

/// Layer sizes `[input_dim, 20 x 7, 1]`.
pub fn pinn_layer_sizes(input_dim: usize) -> Vec<usize> {
    let mut sizes = vec![input_dim];
    sizes.extend(std::iter::repeat_n(HIDDEN_WIDTH, HIDDEN_LAYERS));
    sizes.push(1);
    sizes
}

/// Input axes for a network of the given input dimension: `x`, `(x, t)` or
/// `(x, y, t)`.
pub fn input_axes(input_dim: usize) -> Result<&'static [Axis]> {
    match input_dim {
        1 => Ok(&[Axis::X]),
        2 => Ok(&[Axis::X, Axis::T]),
        3 => Ok(&[Axis::X, Axis::Y, Axis::T]),
        d => usage(format!("unsupported input dimension {d}")),
    }
}

/// Weights and biases of every layer.
///
/// Layer `l` is stored flat: the `out x in` weight matrix in row-major order
/// followed by the `out` biases. Gradients and optimizer moments reuse the
/// same container.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layer_sizes: Vec<usize>,
    layers: Vec<Vec<f64>>,
}

impl MlpParams {
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let layers = layer_sizes.windows(2).map(|w| vec![0.0; w[0] * w[1] + w[1]]).collect();
        Ok(MlpParams {
            layer_sizes: layer_sizes.to_vec(),
            layers,
        })
    }

    pub fn from_layers(layer_sizes: &[usize], layers: Vec<Vec<f64>>) -> Result<Self> {
        let shell = Self::zeros(layer_sizes)?;
        if layers.len() != shell.layers.len() || layers.iter().zip(&shell.layers).any(|(a, b)| a.len() != b.len()) {
            return usage("layer buffers do not match layer sizes");
        }
        if layers.iter().flatten().any(|v| !v.is_finite()) {
            return usage("parameters must be finite");
        }
        Ok(MlpParams {
            layer_sizes: layer_sizes.to_vec(),
            layers,
        })
    }

    pub fn zeros_like(&self) -> Self {
        MlpParams {
            layer_sizes: self.layer_sizes.clone(),
            layers: self.layers.iter().map(|l| vec![0.0; l.len()]).collect(),
        }
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn layer(&self, l: usize) -> &[f64] {
        &self.layers[l]
    }

    pub fn layer_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.layers[l]
    }

    pub fn weights(&self, l: usize) -> ArrayView2<'_, f64> {
        let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        ArrayView2::from_shape((fan_out, fan_in), &self.layers[l][..fan_in * fan_out])
            .expect("layer buffer sized at construction")
    }

    pub fn bias(&self, l: usize) -> ArrayView1<'_, f64> {
        let n = self.layer_sizes[l] * self.layer_sizes[l + 1];
        ArrayView1::from(&self.layers[l][n..])
    }

    pub fn weight(&self, l: usize, row: usize, col: usize) -> f64 {
        self.layers[l][row * self.layer_sizes[l] + col]
    }

    /// Iterate every scalar in storage order.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flatten()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flatten()
    }

    /// Flat copy in storage order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.iter().copied().collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return usage("flat parameter vector has the wrong length");
        }
        for (dst, &src) in self.iter_mut().zip(flat) {
            *dst = src;
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &MlpParams) -> bool {
        self.layer_sizes == other.layer_sizes
    }

    /// `self += k * other`.
    pub fn axpy(&mut self, k: f64, other: &MlpParams) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += k * b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        for a in self.iter_mut() {
            *a *= k;
        }
    }

    pub fn dot(&self, other: &MlpParams) -> f64 {
        self.iter().zip(other.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    /// Index of the first layer holding a non-finite entry.
    pub fn first_non_finite_layer(&self) -> Option<usize> {
        self.layers.iter().position(|l| l.iter().any(|v| !v.is_finite()))
    }
}

fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return usage("layer_sizes needs at least an input and an output entry");
    }
    if layer_sizes.contains(&0) {
        return usage("layer sizes must be positive");
    }
    if *layer_sizes.last().unwrap() != 1 {
        return usage("the output layer must have width 1");
    }
    input_axes(layer_sizes[0])?;
    Ok(())
}

/// Xavier/Glorot-uniform weights, zero biases.
pub fn init_params(layer_sizes: &[usize], seed: u64) -> Result<MlpParams> {
    let mut params = MlpParams::zeros(layer_sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for l in 0..params.num_layers() {
        let (fan_in, fan_out) = (layer_sizes[l], layer_sizes[l + 1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for w in &mut params.layers[l][..fan_in * fan_out] {
            *w = rng.gen_range(-bound..=bound);
        }
    }
    Ok(params)
}

fn check_point(params: &MlpParams, point: &[f64]) -> Result<()> {
    if point.len() != params.input_dim() {
        return usage(format!(
            "point has dimension {} but the network expects {}",
            point.len(),
            params.input_dim()
        ));
    }
    if point.iter().any(|v| !v.is_finite()) {
        return usage(format!("non-finite input point {point:?}"));
    }
    Ok(())
}

/// Evaluate the network at one point, carrying the requested input
/// derivatives.
pub fn forward(params: &MlpParams, point: &[f64], dirs: Directions) -> Result<Jet> {
    check_point(params, point)?;
    let axes = input_axes(params.input_dim())?;
    let mut act: Vec<Jet> = point
        .iter()
        .zip(axes)
        .map(|(&v, &axis)| Jet::seed(v, axis, dirs).unwrap_or(Jet::constant(v, dirs)))
        .collect();
    let last = params.num_layers() - 1;
    for l in 0..params.num_layers() {
        let w = params.weights(l);
        let b = params.bias(l);
        let mut next = Vec::with_capacity(w.nrows());
        for (row, &bias) in w.rows().into_iter().zip(b.iter()) {
            let mut z = Jet::constant(bias, dirs);
            for (&wij, a) in row.iter().zip(&act) {
                z = z + a.scale(wij);
            }
            next.push(if l == last { z } else { z.tanh() });
        }
        act = next;
    }
    Ok(act[0])
}

/// Plain real-valued forward pass with no derivative channels.
pub fn forward_value(params: &MlpParams, point: &[f64]) -> Result<f64> {
    check_point(params, point)?;
    let mut act = point.to_vec();
    let last = params.num_layers() - 1;
    for l in 0..params.num_layers() {
        let w = params.weights(l);
        let b = params.bias(l);
        act = w
            .rows()
            .into_iter()
            .zip(b.iter())
            .map(|(row, &bias)| {
                let z = bias + row.iter().zip(&act).map(|(w, a)| w * a).sum::<f64>();
                if l == last {
                    z
                } else {
                    z.tanh()
                }
            })
            .collect();
    }
    Ok(act[0])
}

/// Record a forward pass on `tape`. Returns the parameter node ids in
/// storage order and the output node.
pub fn forward_on_tape(tape: &mut Tape, params: &MlpParams, point: &[f64]) -> Result<(Vec<NodeId>, NodeId)> {
    check_point(params, point)?;
    let axes = input_axes(params.input_dim())?;
    let param_nodes: Vec<NodeId> = params.iter().map(|&v| tape.param(v)).collect();
    let mut act: Vec<NodeId> = point.iter().zip(axes).map(|(&v, &axis)| tape.input(v, axis)).collect();
    let mut offset = 0;
    let last = params.num_layers() - 1;
    for l in 0..params.num_layers() {
        let (fan_in, fan_out) = (params.layer_sizes[l], params.layer_sizes[l + 1]);
        let mut next = Vec::with_capacity(fan_out);
        for row in 0..fan_out {
            let mut z = param_nodes[offset + fan_in * fan_out + row];
            for (col, &a) in act.iter().enumerate() {
                let prod = tape.mul(param_nodes[offset + row * fan_in + col], a);
                z = tape.add(z, prod);
            }
            next.push(if l == last { z } else { tape.tanh(z) });
        }
        offset += fan_in * fan_out + fan_out;
        act = next;
    }
    Ok((param_nodes, act[0]))
}

impl std::fmt::Display for MlpParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MlpParams{:?} ({} parameters)", self.layer_sizes, self.num_params())
    }
}

impl TryFrom<&[usize]> for MlpParams {
    type Error = Error;
    fn try_from(sizes: &[usize]) -> Result<Self> {
        MlpParams::zeros(sizes)
    }
}
