use super::field::{FieldAxis, SchemeInfo, SolutionField};
use super::linspace;
use crate::error::{usage, Error, Result};
use crate::pde_tasks::{boundary_value, initial_value, Equation, TaskSpec};

/// Default intervals along x and y.
pub const HEAT_NX: usize = 128;
/// Default time intervals; a multiple of the evaluation grid's 20.
pub const HEAT_NT: usize = 260;

const CG_TOLERANCE: f64 = 1e-13;

/// A heat problem on `[-1, 1]^2 x [0, t_end]` with time-independent
/// Dirichlet data. Boundary values override the initial state on the
/// boundary nodes.
pub struct HeatProblem<'a> {
    pub ic: &'a dyn Fn(f64, f64) -> f64,
    pub boundary: &'a dyn Fn(f64, f64) -> f64,
    pub diffusivity: f64,
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub t_end: f64,
}

/// Solve the task's heat problem on `nx` by `ny` by `nt` intervals.
pub fn solve_heat2d(task: &TaskSpec, nx: usize, ny: usize, nt: usize) -> Result<SolutionField> {
    if task.equation != Equation::Heat2D {
        return usage("solve_heat2d needs a heat task");
    }
    if nx < 8 || ny < 8 || nt < 1 {
        return usage(format!("resolution {nx}x{ny}x{nt} is too coarse"));
    }
    let ic = |x: f64, y: f64| initial_value(task, x, y);
    let bc = |x: f64, y: f64| boundary_value(task, x, y).unwrap_or(0.0);
    let rows = heat_grid(&HeatProblem {
        ic: &ic,
        boundary: &bc,
        diffusivity: task.viscosity,
        nx,
        ny,
        nt,
        t_end: 1.0,
    })?;
    Ok(SolutionField {
        axes: vec![
            FieldAxis::new("t", linspace(0.0, 1.0, nt)),
            FieldAxis::new("y", linspace(-1.0, 1.0, ny)),
            FieldAxis::new("x", linspace(-1.0, 1.0, nx)),
        ],
        values: rows.concat(),
        task: task.clone(),
        scheme: SchemeInfo::new(
            "backward-euler cg",
            vec![
                ("dx", 2.0 / nx as f64),
                ("dy", 2.0 / ny as f64),
                ("dt", 1.0 / nt as f64),
            ],
        ),
    })
}

/// Backward Euler with the five-point Laplacian. Returns one row per output
/// time holding `(ny + 1) * (nx + 1)` nodes, y slow and x fast.
pub fn heat_grid(p: &HeatProblem<'_>) -> Result<Vec<Vec<f64>>> {
    let (nx, ny) = (p.nx, p.ny);
    if nx < 2 || ny < 2 || p.nt == 0 || !(p.t_end > 0.0) || !(p.diffusivity > 0.0) {
        return usage("invalid heat discretization");
    }
    let xs = linspace(-1.0, 1.0, nx);
    let ys = linspace(-1.0, 1.0, ny);
    let w = nx + 1;
    let idx = |i: usize, j: usize| j * w + i;
    let is_boundary = |i: usize, j: usize| i == 0 || j == 0 || i == nx || j == ny;

    let mut u = vec![0.0; w * (ny + 1)];
    for j in 0..=ny {
        for i in 0..=nx {
            u[idx(i, j)] = if is_boundary(i, j) {
                (p.boundary)(xs[i], ys[j])
            } else {
                (p.ic)(xs[i], ys[j])
            };
        }
    }

    let dt = p.t_end / p.nt as f64;
    let cx = p.diffusivity * dt * (nx as f64 / 2.0).powi(2);
    let cy = p.diffusivity * dt * (ny as f64 / 2.0).powi(2);
    let diag = 1.0 + 2.0 * cx + 2.0 * cy;

    // boundary contribution to the right-hand side, constant in time
    let mut lift = vec![0.0; u.len()];
    for j in 1..ny {
        for i in 1..nx {
            let mut s = 0.0;
            if i == 1 {
                s += cx * u[idx(0, j)];
            }
            if i == nx - 1 {
                s += cx * u[idx(nx, j)];
            }
            if j == 1 {
                s += cy * u[idx(i, 0)];
            }
            if j == ny - 1 {
                s += cy * u[idx(i, ny)];
            }
            lift[idx(i, j)] = s;
        }
    }

    // A v on interior nodes, treating boundary entries of v as zero
    let apply = |v: &[f64], out: &mut [f64]| {
        for j in 1..ny {
            for i in 1..nx {
                let k = idx(i, j);
                let mut s = diag * v[k];
                if i > 1 {
                    s -= cx * v[k - 1];
                }
                if i < nx - 1 {
                    s -= cx * v[k + 1];
                }
                if j > 1 {
                    s -= cy * v[k - w];
                }
                if j < ny - 1 {
                    s -= cy * v[k + w];
                }
                out[k] = s;
            }
        }
    };
    let interior: Vec<usize> = (1..ny).flat_map(|j| (1..nx).map(move |i| idx(i, j))).collect();
    let dot = |a: &[f64], b: &[f64]| interior.iter().map(|&k| a[k] * b[k]).sum::<f64>();

    let mut rows = Vec::with_capacity(p.nt + 1);
    rows.push(u.clone());
    let mut x = vec![0.0; u.len()];
    let mut r = vec![0.0; u.len()];
    let mut d = vec![0.0; u.len()];
    let mut q = vec![0.0; u.len()];
    let max_iter = 10 * interior.len() + 100;
    for step in 1..=p.nt {
        let mut b = vec![0.0; u.len()];
        for &k in &interior {
            b[k] = u[k] + lift[k];
            x[k] = u[k];
        }
        apply(&x, &mut q);
        for &k in &interior {
            r[k] = b[k] - q[k];
            d[k] = r[k];
        }
        let bnorm = dot(&b, &b).sqrt().max(1e-300);
        let mut rr = dot(&r, &r);
        let mut iters = 0;
        while rr.sqrt() > CG_TOLERANCE * bnorm {
            if iters == max_iter {
                return Err(Error::SolverFailure(format!(
                    "conjugate gradients did not converge at step {step}"
                )));
            }
            apply(&d, &mut q);
            let alpha = rr / dot(&d, &q);
            for &k in &interior {
                x[k] += alpha * d[k];
                r[k] -= alpha * q[k];
            }
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            for &k in &interior {
                d[k] = r[k] + beta * d[k];
            }
            iters += 1;
        }
        for &k in &interior {
            u[k] = x[k];
        }
        if let Some(k) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::SolverFailure(format!(
                "non-finite value at node {k}, step {step}"
            )));
        }
        rows.push(u.clone());
    }
    Ok(rows)
}
