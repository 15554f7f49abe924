//! Batched jet propagation through the network with a layer-level reverse
//! sweep.
//!
//! Activations for a batch of `n` points are stored as one matrix of shape
//! `(channels * n, width)`: rows `[c * n, (c + 1) * n)` hold channel `c`
//! (value first, then the tracked derivative channels). Dense layers act on
//! all channels with a single matrix product, the bias enters the value
//! channel only, and tanh mixes channels through the second-order chain rule.
//! The reverse sweep is the transpose of exactly that computation, so the
//! parameter gradient of any loss of the output channels is exact.

use ndarray::{Array2, ArrayView2, Axis as NdAxis};

use super::{input_axes, MlpParams};
use crate::autodiff::{Axis, Component, Directions};
use crate::error::{usage, Result};

/// Recorded forward pass for one batch.
#[derive(Debug, Clone)]
pub struct BatchTrace {
    comps: Vec<Component>,
    n: usize,
    // Input activation of every layer.
    inputs: Vec<Array2<f64>>,
    // Pre-activation of every layer; the last one is the network output.
    pre: Vec<Array2<f64>>,
}

// Channel layout helper: for every first-order channel, the index of its
// second-order partner if one is tracked.
fn channel_pairs(comps: &[Component]) -> Vec<(usize, Option<usize>)> {
    comps
        .iter()
        .enumerate()
        .filter_map(|(i, c)| match c {
            Component::First(axis) => {
                let second = comps.iter().position(|d| *d == Component::Second(*axis));
                Some((i, second))
            }
            _ => None,
        })
        .collect()
}

/// Run the batch forward pass. `points` has one row per point.
pub fn forward_batch(params: &MlpParams, points: ArrayView2<'_, f64>, dirs: Directions) -> Result<BatchTrace> {
    let d = params.input_dim();
    if points.ncols() != d {
        return usage(format!(
            "points have dimension {} but the network expects {d}",
            points.ncols()
        ));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return usage("non-finite input point");
    }
    let axes = input_axes(d)?;
    let mut comps = vec![Component::Value];
    comps.extend(dirs.components().into_iter().filter(|c| match c {
        Component::First(a) | Component::Second(a) => axes.contains(a),
        Component::Value => false,
    }));
    let n = points.nrows();
    let nc = comps.len();

    let mut a0 = Array2::<f64>::zeros((nc * n, d));
    a0.slice_mut(ndarray::s![0..n, ..]).assign(&points);
    for (ci, c) in comps.iter().enumerate() {
        if let Component::First(axis) = c {
            let col = axes.iter().position(|a| a == axis).expect("filtered above");
            a0.slice_mut(ndarray::s![ci * n..(ci + 1) * n, col]).fill(1.0);
        }
    }

    let pairs = channel_pairs(&comps);
    let layers = params.num_layers();
    let mut inputs = Vec::with_capacity(layers);
    let mut pre = Vec::with_capacity(layers);
    let mut act = a0;
    for l in 0..layers {
        let w = params.weights(l);
        let mut z = act.dot(&w.t());
        {
            let b = params.bias(l);
            let mut value = z.slice_mut(ndarray::s![0..n, ..]);
            value += &b;
        }
        let next = if l + 1 < layers {
            Some(tanh_forward(&z, n, &pairs))
        } else {
            None
        };
        inputs.push(act);
        pre.push(z);
        match next {
            Some(y) => act = y,
            None => break,
        }
    }
    Ok(BatchTrace { comps, n, inputs, pre })
}

// tanh through a single exp; absolute error stays at the 1e-16 level and the
// saturated limits are exact.
#[inline]
fn fast_tanh(z: f64) -> f64 {
    1.0 - 2.0 / ((2.0 * z).exp() + 1.0)
}

fn tanh_forward(z: &Array2<f64>, n: usize, pairs: &[(usize, Option<usize>)]) -> Array2<f64> {
    let block = n * z.ncols();
    let zs = z.as_slice().expect("standard layout");
    let mut y = Array2::<f64>::zeros(z.raw_dim());
    let ys = y.as_slice_mut().expect("standard layout");
    let mut slope = vec![0.0; block];
    let mut curv = vec![0.0; block];
    for j in 0..block {
        let t = fast_tanh(zs[j]);
        let s = 1.0 - t * t;
        ys[j] = t;
        slope[j] = s;
        curv[j] = -2.0 * t * s;
    }
    for &(b1, b2) in pairs {
        let z1 = &zs[b1 * block..(b1 + 1) * block];
        {
            let y1 = &mut ys[b1 * block..(b1 + 1) * block];
            for j in 0..block {
                y1[j] = slope[j] * z1[j];
            }
        }
        if let Some(b2) = b2 {
            let z2 = &zs[b2 * block..(b2 + 1) * block];
            let y2 = &mut ys[b2 * block..(b2 + 1) * block];
            for j in 0..block {
                y2[j] = slope[j] * z2[j] + curv[j] * z1[j] * z1[j];
            }
        }
    }
    y
}

// Map adjoints of tanh outputs back onto its inputs.
fn tanh_backward(
    z: &Array2<f64>,
    y: &Array2<f64>,
    ybar: &Array2<f64>,
    n: usize,
    pairs: &[(usize, Option<usize>)],
) -> Array2<f64> {
    let block = n * z.ncols();
    let zs = z.as_slice().expect("standard layout");
    let ys = y.as_slice().expect("standard layout");
    let gs = ybar.as_slice().expect("standard layout");
    let mut zbar = Array2::<f64>::zeros(z.raw_dim());
    let out = zbar.as_slice_mut().expect("standard layout");
    // first three derivatives of tanh at each pre-activation
    let mut f1 = vec![0.0; block];
    let mut f2 = vec![0.0; block];
    let mut f3 = vec![0.0; block];
    for j in 0..block {
        let t = ys[j];
        let s = 1.0 - t * t;
        f1[j] = s;
        f2[j] = -2.0 * t * s;
        f3[j] = -2.0 * s * s + 4.0 * t * t * s;
        out[j] = gs[j] * s;
    }
    for &(b1, b2) in pairs {
        let r1 = b1 * block..(b1 + 1) * block;
        let z1 = &zs[r1.clone()];
        let g1 = &gs[r1.clone()];
        {
            let (value, rest) = out.split_at_mut(block);
            let o1 = &mut rest[r1.start - block..r1.end - block];
            for j in 0..block {
                value[j] += g1[j] * f2[j] * z1[j];
                o1[j] = g1[j] * f1[j];
            }
        }
        if let Some(b2) = b2 {
            let r2 = b2 * block..(b2 + 1) * block;
            let z2 = &zs[r2.clone()];
            let g2 = &gs[r2.clone()];
            for j in 0..block {
                out[j] += g2[j] * (f2[j] * z2[j] + f3[j] * z1[j] * z1[j]);
            }
            let o1 = &mut out[r1.clone()];
            for j in 0..block {
                o1[j] += g2[j] * 2.0 * f2[j] * z1[j];
            }
            let o2 = &mut out[r2];
            for j in 0..block {
                o2[j] = g2[j] * f1[j];
            }
        }
    }
    zbar
}

impl BatchTrace {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn channels(&self) -> &[Component] {
        &self.comps
    }

    fn channel(&self, c: Component) -> Option<usize> {
        self.comps.iter().position(|&k| k == c)
    }

    /// Output channel `c` for every point, or `None` if it is not tracked.
    pub fn output(&self, c: Component) -> Option<&[f64]> {
        let ci = self.channel(c)?;
        let out = self.pre.last().expect("at least one layer");
        let s = out.as_slice().expect("standard layout");
        Some(&s[ci * self.n..(ci + 1) * self.n])
    }

    /// Network values `u` at every point.
    pub fn values(&self) -> &[f64] {
        self.output(Component::Value).expect("value channel always present")
    }

    /// Like [`output`](Self::output) but an untracked derivative of an axis
    /// the network does not take as input is reported as zeros.
    pub fn output_or_zero(&self, c: Component) -> Vec<f64> {
        self.output(c).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; self.n])
    }

    /// Zeroed adjoint buffer for the output channels.
    pub fn zero_adjoint(&self) -> OutputAdjoint {
        OutputAdjoint {
            comps: self.comps.clone(),
            n: self.n,
            data: vec![0.0; self.comps.len() * self.n],
        }
    }

    /// Reverse sweep. `adjoint` holds d(loss)/d(output channel) per point.
    pub fn backward(&self, params: &MlpParams, adjoint: &OutputAdjoint) -> MlpParams {
        let n = self.n;
        let pairs = channel_pairs(&self.comps);
        let mut grads = params.zeros_like();
        let mut zbar =
            Array2::from_shape_vec((adjoint.data.len(), 1), adjoint.data.clone()).expect("adjoint sized from trace");
        for l in (0..params.num_layers()).rev() {
            let gw = zbar.t().dot(&self.inputs[l]);
            let gb = zbar.slice(ndarray::s![0..n, ..]).sum_axis(NdAxis(0));
            let buf = grads.layer_mut(l);
            let nw = gw.len();
            for (dst, src) in buf[..nw].iter_mut().zip(gw.iter()) {
                *dst = *src;
            }
            for (dst, src) in buf[nw..].iter_mut().zip(gb.iter()) {
                *dst = *src;
            }
            if l == 0 {
                break;
            }
            let abar = zbar.dot(&params.weights(l));
            zbar = tanh_backward(&self.pre[l - 1], &self.inputs[l], &abar, n, &pairs);
        }
        grads
    }
}

/// Points per chunk in [`chunked_gradient`]; keeps activations cache-resident.
pub const CHUNK_POINTS: usize = 1024;

/// Gradient of a loss that is a sum of per-point terms, evaluated chunk by
/// chunk.
///
/// `per_chunk` receives the trace of one chunk and the row range it covers,
/// fills the chunk's output adjoint and returns the chunk's loss
/// contribution. Returns the summed loss and gradient.
pub fn chunked_gradient<F>(
    params: &MlpParams,
    points: ArrayView2<'_, f64>,
    dirs: Directions,
    mut per_chunk: F,
) -> Result<(f64, MlpParams)>
where
    F: FnMut(&BatchTrace, std::ops::Range<usize>, &mut OutputAdjoint) -> Result<f64>,
{
    let mut grads = params.zeros_like();
    let mut loss = 0.0;
    let n = points.nrows();
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK_POINTS).min(n);
        let trace = forward_batch(params, points.slice(ndarray::s![start..end, ..]), dirs)?;
        let mut adj = trace.zero_adjoint();
        loss += per_chunk(&trace, start..end, &mut adj)?;
        grads.axpy(1.0, &trace.backward(params, &adj));
        start = end;
    }
    Ok((loss, grads))
}

/// Per-point adjoints of the output channels.
#[derive(Debug, Clone)]
pub struct OutputAdjoint {
    comps: Vec<Component>,
    n: usize,
    data: Vec<f64>,
}

impl OutputAdjoint {
    /// Mutable slice for channel `c`. Adjoints of untracked channels are
    /// discarded by returning `None`.
    pub fn channel_mut(&mut self, c: Component) -> Option<&mut [f64]> {
        let ci = self.comps.iter().position(|&k| k == c)?;
        Some(&mut self.data[ci * self.n..(ci + 1) * self.n])
    }

    pub fn add(&mut self, c: Component, i: usize, v: f64) {
        if let Some(ch) = self.channel_mut(c) {
            ch[i] += v;
        }
    }
}

/// Whether the network of input dimension `d` carries axis `axis`.
pub fn has_axis(d: usize, axis: Axis) -> bool {
    input_axes(d).map(|a| a.contains(&axis)).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{forward, init_params, pinn_layer_sizes};
    use ndarray::array;

    #[test]
    fn batch_matches_pointwise_jets() {
        let p = init_params(&pinn_layer_sizes(3), 5).unwrap();
        let pts = array![[0.1, -0.4, 0.3], [0.9, 0.2, 0.7], [-0.5, 0.5, 0.05]];
        let trace = forward_batch(&p, pts.view(), Directions::HEAT2D).unwrap();
        for (i, row) in pts.rows().into_iter().enumerate() {
            let j = forward(&p, row.as_slice().unwrap(), Directions::HEAT2D).unwrap();
            let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
            assert!(close(trace.values()[i], j.value));
            for c in Directions::HEAT2D.components() {
                assert!(close(trace.output(c).unwrap()[i], j.component(c).unwrap()));
            }
        }
    }

    #[test]
    fn missing_axis_reads_as_zero() {
        let p = init_params(&pinn_layer_sizes(2), 5).unwrap();
        let pts = array![[0.1, 0.3]];
        let trace = forward_batch(&p, pts.view(), Directions::HEAT2D).unwrap();
        assert!(trace.output(Component::Second(Axis::Y)).is_none());
        assert_eq!(trace.output_or_zero(Component::Second(Axis::Y)), vec![0.0]);
        assert!(!has_axis(2, Axis::Y));
    }

    #[test]
    fn dimension_mismatch() {
        let p = init_params(&pinn_layer_sizes(2), 5).unwrap();
        let pts = array![[0.1, 0.3, 0.4]];
        assert!(forward_batch(&p, pts.view(), Directions::BURGERS).is_err());
    }
}
