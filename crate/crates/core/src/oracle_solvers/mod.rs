//! Finite-difference reference solutions used to score trained networks.
//!
//! Burgers is advanced with Crank–Nicolson diffusion and second-order
//! Adams–Bashforth convection; an explicit MUSCL scheme serves as an
//! independent cross-check. The heat equation uses backward Euler with a
//! five-point Laplacian solved by conjugate gradients, which keeps the
//! discrete maximum principle.

mod burgers;
mod field;
mod heat;

pub use burgers::{burgers_cn_grid, burgers_muscl_grid, solve_burgers, BURGERS_NT, BURGERS_NX};
pub use field::{decode_field, encode_field, read_field, write_field, FieldAxis, SchemeInfo, SolutionField};
pub use heat::{heat_grid, solve_heat2d, HeatProblem, HEAT_NT, HEAT_NX};

use ndarray::ArrayView2;

use crate::error::{usage, Result};
use crate::pde_tasks::{Equation, TaskSpec};

/// Evaluation grid for Burgers, in intervals along x and t.
pub const BURGERS_EVAL: (usize, usize) = (256, 100);
/// Evaluation grid for the heat equation, in intervals along x, y and t.
pub const HEAT_EVAL: (usize, usize, usize) = (64, 64, 20);

/// Mean squared difference between `predictor` and the field over every
/// grid node. The predictor receives all nodes at once, one row per node
/// in network input order.
pub fn eval_field_mse<F>(field: &SolutionField, mut predictor: F) -> Result<f64>
where
    F: FnMut(ArrayView2<'_, f64>) -> Result<Vec<f64>>,
{
    let nodes = field.input_points();
    let pred = predictor(nodes.view())?;
    if pred.len() != field.values.len() {
        return usage(format!(
            "predictor returned {} values for {} nodes",
            pred.len(),
            field.values.len()
        ));
    }
    let sum: f64 = pred.iter().zip(&field.values).map(|(p, v)| (p - v).powi(2)).sum();
    Ok(sum / pred.len() as f64)
}

/// Oracle solution at default resolution restricted to the evaluation grid.
pub fn reference_field(task: &TaskSpec) -> Result<SolutionField> {
    match task.equation {
        Equation::Burgers1D => {
            let full = solve_burgers(task, BURGERS_NX, BURGERS_NT)?;
            full.restrict(&[BURGERS_NT / BURGERS_EVAL.1, BURGERS_NX / BURGERS_EVAL.0])
        }
        Equation::Heat2D => {
            let full = solve_heat2d(task, HEAT_NX, HEAT_NX, HEAT_NT)?;
            full.restrict(&[HEAT_NT / HEAT_EVAL.2, HEAT_NX / HEAT_EVAL.1, HEAT_NX / HEAT_EVAL.0])
        }
    }
}

/// `n + 1` evenly spaced nodes on `[lo, hi]` with exact end points.
pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| {
            if i == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / n as f64
            }
        })
        .collect()
}
