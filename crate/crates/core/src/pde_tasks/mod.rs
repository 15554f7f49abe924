//! Parametric PDE families: initial/boundary data, residual operators, task
//! and point sampling, and equation-noise injection.

mod points;
mod task;

pub use points::{sample_points, PointSet};
pub use task::{sample_task, Equation, IcFamily, TaskSpec, BURGERS_VISCOSITY};

use std::f64::consts::PI;

use crate::autodiff::{Axis, Component, Jet};
use crate::error::{usage, Result};
use crate::network::{BatchTrace, OutputAdjoint};

/// Tolerance for deciding that a coordinate lies on a face.
const FACE_TOL: f64 = 1e-12;

fn on(v: f64, target: f64) -> bool {
    (v - target).abs() <= FACE_TOL
}

/// Initial value of the task at spatial location `(x, y)`.
pub fn initial_value(task: &TaskSpec, x: f64, y: f64) -> f64 {
    let p = &task.params;
    match task.ic_family {
        IcFamily::BurgersSinCos => -(PI * x).sin() + p[0] * (PI * x).cos(),
        IcFamily::BurgersSinOnly => -(PI * x).sin(),
        IcFamily::HeatAmplitude => p[0] * (PI * x).sin() + p[1] * (PI * x).cos(),
        IcFamily::HeatFrequency => (p[0] * PI * x).sin() * (p[1] * PI * x).cos(),
        IcFamily::HeatFrequencyCosY => (p[0] * PI * x).sin() * (p[1] * PI * y).cos(),
    }
}

/// Dirichlet value on the spatial boundary, or `None` if `(x, y)` is not on a
/// boundary face.
pub fn boundary_value(task: &TaskSpec, x: f64, y: f64) -> Option<f64> {
    match task.equation {
        Equation::Burgers1D => (on(x, -1.0) || on(x, 1.0)).then_some(0.0),
        Equation::Heat2D => {
            if on(y, 1.0) {
                Some((PI * x).sin())
            } else if on(x, -1.0) || on(x, 1.0) || on(y, -1.0) {
                Some(0.0)
            } else {
                None
            }
        }
    }
}

/// Split a coordinate vector into `(x, y, t)` for the task's equation.
pub fn split_point(task: &TaskSpec, point: &[f64]) -> Result<(f64, f64, f64)> {
    match (task.equation, point) {
        (Equation::Burgers1D, &[x, t]) => Ok((x, 0.0, t)),
        (Equation::Heat2D, &[x, y, t]) => Ok((x, y, t)),
        _ => usage(format!(
            "point {point:?} has the wrong dimension for {:?}",
            task.equation
        )),
    }
}

/// Exact initial/boundary value at a point on the `t = 0` face or a spatial
/// boundary face. The boundary value wins at corners.
pub fn ic_bc_value(task: &TaskSpec, point: &[f64]) -> Result<f64> {
    let (x, y, t) = split_point(task, point)?;
    if let Some(v) = boundary_value(task, x, y) {
        return Ok(v);
    }
    if on(t, 0.0) {
        return Ok(initial_value(task, x, y));
    }
    usage(format!("point {point:?} is not on an initial or boundary face"))
}

fn jet_channel(jet: &Jet, c: Component) -> Result<f64> {
    jet.component(c)
        .or_else(|_| usage(format!("jet is missing {c:?} required by the residual")))
}

/// PDE residual `E` at collocation point `point_index`.
///
/// Burgers: `u_t + u u_x - nu u_xx - p eps_i`; heat: `u_xx + u_yy - u_t`.
pub fn residual(task: &TaskSpec, jet: &Jet, point_index: usize, points: &PointSet) -> Result<f64> {
    match task.equation {
        Equation::Burgers1D => {
            let u = jet.value;
            let ut = jet_channel(jet, Component::First(Axis::T))?;
            let ux = jet_channel(jet, Component::First(Axis::X))?;
            let uxx = jet_channel(jet, Component::Second(Axis::X))?;
            let forcing = noise_term(task, point_index, points)?;
            Ok(ut + u * ux - task.viscosity * uxx - forcing)
        }
        Equation::Heat2D => {
            let uxx = jet_channel(jet, Component::Second(Axis::X))?;
            let uyy = jet_channel(jet, Component::Second(Axis::Y))?;
            let ut = jet_channel(jet, Component::First(Axis::T))?;
            Ok(uxx + uyy - ut)
        }
    }
}

fn noise_term(task: &TaskSpec, i: usize, points: &PointSet) -> Result<f64> {
    if task.noise_weight == 0.0 {
        return Ok(0.0);
    }
    match points.noise.get(i) {
        Some(e) => Ok(task.noise_weight * e),
        None => usage(format!("no noise sample for collocation point {i}")),
    }
}

/// Residuals at every point of a batch trace. `noise` is the per-point
/// equation noise (ignored when the task's noise weight is 0).
pub fn batch_residuals(task: &TaskSpec, trace: &BatchTrace, noise: &[f64]) -> Result<Vec<f64>> {
    let n = trace.len();
    let need = |c| {
        trace
            .output(c)
            .ok_or_else(|| crate::Error::Usage(format!("trace is missing {c:?}")))
    };
    let p = task.noise_weight;
    if p != 0.0 && noise.len() != n {
        return usage("noise length does not match the batch");
    }
    match task.equation {
        Equation::Burgers1D => {
            let u = trace.values();
            let ut = need(Component::First(Axis::T))?;
            let ux = need(Component::First(Axis::X))?;
            let uxx = need(Component::Second(Axis::X))?;
            let nu = task.viscosity;
            Ok((0..n)
                .map(|i| {
                    let forcing = if p != 0.0 { p * noise[i] } else { 0.0 };
                    ut[i] + u[i] * ux[i] - nu * uxx[i] - forcing
                })
                .collect())
        }
        Equation::Heat2D => {
            let uxx = need(Component::Second(Axis::X))?;
            let uyy = need(Component::Second(Axis::Y))?;
            let ut = need(Component::First(Axis::T))?;
            Ok((0..n).map(|i| uxx[i] + uyy[i] - ut[i]).collect())
        }
    }
}

/// Accumulate `sum_i weight_i * dE_i/d(channels)` into `adj`.
pub fn residual_backprop(task: &TaskSpec, trace: &BatchTrace, weights: &[f64], adj: &mut OutputAdjoint) {
    let n = trace.len();
    match task.equation {
        Equation::Burgers1D => {
            let u = trace.values();
            let ux = trace.output(Component::First(Axis::X)).expect("burgers trace");
            let nu = task.viscosity;
            for i in 0..n {
                let w = weights[i];
                adj.add(Component::Value, i, w * ux[i]);
                adj.add(Component::First(Axis::X), i, w * u[i]);
                adj.add(Component::First(Axis::T), i, w);
                adj.add(Component::Second(Axis::X), i, -w * nu);
            }
        }
        Equation::Heat2D => {
            for (i, &w) in weights.iter().enumerate().take(n) {
                adj.add(Component::Second(Axis::X), i, w);
                adj.add(Component::Second(Axis::Y), i, w);
                adj.add(Component::First(Axis::T), i, -w);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Directions;

    fn burgers(theta: f64) -> TaskSpec {
        TaskSpec::new(Equation::Burgers1D, IcFamily::BurgersSinCos, vec![theta], 0.0, 0).unwrap()
    }

    #[test]
    fn burgers_ic_values() {
        assert!((ic_bc_value(&burgers(0.3), &[0.0, 0.0]).unwrap() - 0.3).abs() < 1e-15);
        assert!((ic_bc_value(&burgers(0.0), &[0.5, 0.0]).unwrap() + 1.0).abs() < 1e-15);
        // corner: boundary wins
        assert_eq!(ic_bc_value(&burgers(0.7), &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(ic_bc_value(&burgers(0.7), &[-1.0, 0.4]).unwrap(), 0.0);
    }

    #[test]
    fn heat_ic_values() {
        let amp = TaskSpec::new(Equation::Heat2D, IcFamily::HeatAmplitude, vec![1.0, 0.5], 0.0, 0).unwrap();
        assert!((ic_bc_value(&amp, &[0.5, 0.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        let freq = TaskSpec::new(Equation::Heat2D, IcFamily::HeatFrequency, vec![1.0, 1.0], 0.0, 0).unwrap();
        assert!((ic_bc_value(&freq, &[0.25, 0.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(ic_bc_value(&freq, &[0.0, 1.0, 0.3]).unwrap(), 0.0);
        assert!((ic_bc_value(&freq, &[0.5, 1.0, 0.3]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(ic_bc_value(&freq, &[0.5, -1.0, 0.3]).unwrap(), 0.0);
    }

    #[test]
    fn interior_point_is_usage_error() {
        assert!(ic_bc_value(&burgers(0.3), &[0.2, 0.5]).is_err());
        assert!(ic_bc_value(&burgers(0.3), &[0.2, 0.5, 0.1]).is_err());
    }

    #[test]
    fn residual_examples() {
        let task = burgers(0.0);
        let pts = PointSet::empty(2);
        let mut jet = Jet::constant(1.0, Directions::BURGERS);
        jet.first[Axis::X.index()] = 2.0;
        jet.second[Axis::X.index()] = 4.0;
        let e = residual(&task, &jet, 0, &pts).unwrap();
        assert!((e - 1.8).abs() < 1e-15);

        let zero = Jet::constant(0.0, Directions::BURGERS);
        assert_eq!(residual(&task, &zero, 0, &pts).unwrap(), 0.0);

        let heat = TaskSpec::new(Equation::Heat2D, IcFamily::HeatAmplitude, vec![0.1, 0.2], 0.0, 0).unwrap();
        let mut hj = Jet::constant(0.0, Directions::HEAT2D);
        hj.second[Axis::X.index()] = 3.0;
        hj.second[Axis::Y.index()] = -1.0;
        hj.first[Axis::T.index()] = 2.0;
        assert_eq!(residual(&heat, &hj, 0, &PointSet::empty(3)).unwrap(), 0.0);
    }

    #[test]
    fn residual_needs_directions() {
        let task = burgers(0.0);
        let jet = Jet::constant(0.0, Directions::new(2, 0, 0).unwrap());
        assert!(residual(&task, &jet, 0, &PointSet::empty(2)).is_err());
    }

    #[test]
    fn manufactured_burgers_field() {
        // u = x^2 t, built directly as a jet
        let task = burgers(0.0);
        let pts = PointSet::empty(2);
        for &(x, t) in &[(0.3, 0.2), (-0.7, 0.9), (0.1, 0.5)] {
            let mut j = Jet::constant(x * x * t, Directions::BURGERS);
            j.first[Axis::X.index()] = 2.0 * x * t;
            j.second[Axis::X.index()] = 2.0 * t;
            j.first[Axis::T.index()] = x * x;
            let expected = x * x + 2.0 * x.powi(3) * t * t - 0.1 * t;
            assert!((residual(&task, &j, 0, &pts).unwrap() - expected).abs() < 1e-14);
        }
    }
}
