use ndarray::ArrayView2;

use crate::autodiff::{Component, Directions};
use crate::error::{usage, Error, Result};
use crate::network::{chunked_gradient, forward_batch, MlpParams, CHUNK_POINTS};
use crate::pde_tasks::{batch_residuals, residual_backprop, PointSet, TaskSpec};

/// PDE and data losses of one point set with their summed gradient.
#[derive(Debug, Clone)]
pub struct PinnLosses {
    pub pde: f64,
    pub data: f64,
    pub gradient: MlpParams,
}

fn non_finite(points: ArrayView2<'_, f64>, start: usize, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!(
            "network output is not finite at point {:?}",
            points.row(start + i).to_vec()
        ))),
        None => Ok(()),
    }
}

fn check_dim(params: &MlpParams, task: &TaskSpec) -> Result<()> {
    if params.input_dim() != task.equation.input_dim() {
        return usage(format!(
            "network takes {} inputs but {} needs {}",
            params.input_dim(),
            task.equation.name(),
            task.equation.input_dim()
        ));
    }
    Ok(())
}

/// `mean((E_i - offset_i)^2)` over the collocation points and its gradient.
/// `offsets` shifts each residual by a constant (zero when `None`).
pub fn pde_loss(
    params: &MlpParams,
    task: &TaskSpec,
    points: &PointSet,
    offsets: Option<&[f64]>,
) -> Result<(f64, MlpParams)> {
    check_dim(params, task)?;
    let col = points.collocation.view();
    let n = col.nrows();
    if n == 0 {
        return Ok((0.0, params.zeros_like()));
    }
    if offsets.is_some_and(|o| o.len() != n) {
        return usage("one residual offset per collocation point is required");
    }
    let scale = 1.0 / n as f64;
    chunked_gradient(params, col, task.equation.directions(), |trace, range, adj| {
        non_finite(col, range.start, trace.values())?;
        let noise = if points.noise.is_empty() {
            &[][..]
        } else {
            &points.noise[range.clone()]
        };
        let res = batch_residuals(task, trace, noise)?;
        let mut loss = 0.0;
        let weights: Vec<f64> = res
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let e = r - offsets.map_or(0.0, |o| o[range.start + i]);
                loss += e * e * scale;
                2.0 * e * scale
            })
            .collect();
        residual_backprop(task, trace, &weights, adj);
        Ok(loss)
    })
}

/// `mean((u_i - target_i)^2)` over `points` and its gradient.
pub fn data_loss(params: &MlpParams, points: ArrayView2<'_, f64>, targets: &[f64]) -> Result<(f64, MlpParams)> {
    let n = points.nrows();
    if targets.len() != n {
        return usage("one target per point is required");
    }
    if n == 0 {
        return Ok((0.0, params.zeros_like()));
    }
    let scale = 1.0 / n as f64;
    chunked_gradient(params, points, Directions::NONE, |trace, range, adj| {
        let u = trace.values();
        non_finite(points, range.start, u)?;
        let ch = adj.channel_mut(Component::Value).expect("value channel");
        let mut loss = 0.0;
        for (i, &ui) in u.iter().enumerate() {
            let e = ui - targets[range.start + i];
            loss += e * e * scale;
            ch[i] = 2.0 * e * scale;
        }
        Ok(loss)
    })
}

/// Gradient of `sum_i w_i * u_i` over `points`.
pub fn weighted_value_gradient(params: &MlpParams, points: ArrayView2<'_, f64>, weights: &[f64]) -> Result<MlpParams> {
    if weights.len() != points.nrows() {
        return usage("one weight per point is required");
    }
    let (_, g) = chunked_gradient(params, points, Directions::NONE, |trace, range, adj| {
        non_finite(points, range.start, trace.values())?;
        adj.channel_mut(Component::Value)
            .expect("value channel")
            .copy_from_slice(&weights[range]);
        Ok(0.0)
    })?;
    Ok(g)
}

/// `L_pde` on the collocation points plus `L_data` on the initial/boundary
/// points, with the gradient of their sum.
pub fn pinn_losses(params: &MlpParams, points: &PointSet, task: &TaskSpec) -> Result<PinnLosses> {
    let (pde, mut gradient) = pde_loss(params, task, points, None)?;
    let (data, g_data) = data_loss(params, points.ib_points.view(), &points.ib_targets)?;
    gradient.axpy(1.0, &g_data);
    Ok(PinnLosses { pde, data, gradient })
}

/// Network values at every row of `points`.
pub fn network_values(params: &MlpParams, points: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(points.nrows());
    let mut start = 0;
    while start < points.nrows() {
        let end = (start + CHUNK_POINTS).min(points.nrows());
        let trace = forward_batch(params, points.slice(ndarray::s![start..end, ..]), Directions::NONE)?;
        non_finite(points, start, trace.values())?;
        out.extend_from_slice(trace.values());
        start = end;
    }
    Ok(out)
}

/// PDE residual values at the collocation points, noise included.
pub fn pde_residuals(params: &MlpParams, task: &TaskSpec, points: &PointSet) -> Result<Vec<f64>> {
    check_dim(params, task)?;
    let col = points.collocation.view();
    let mut out = Vec::with_capacity(col.nrows());
    let mut start = 0;
    while start < col.nrows() {
        let end = (start + CHUNK_POINTS).min(col.nrows());
        let trace = forward_batch(
            params,
            col.slice(ndarray::s![start..end, ..]),
            task.equation.directions(),
        )?;
        non_finite(col, start, trace.values())?;
        let noise = if points.noise.is_empty() {
            &[][..]
        } else {
            &points.noise[start..end]
        };
        out.extend(batch_residuals(task, &trace, noise)?);
        start = end;
    }
    Ok(out)
}
