use super::field::{FieldAxis, SchemeInfo, SolutionField};
use super::linspace;
use crate::error::{usage, Error, Result};
use crate::pde_tasks::{initial_value, Equation, TaskSpec};

/// Default spatial intervals on `[-1, 1]`.
pub const BURGERS_NX: usize = 512;
/// Default time intervals on `[0, 1]`; a multiple of the evaluation grid's
/// 100 intervals so the evaluation nodes are oracle nodes.
pub const BURGERS_NT: usize = 1000;

const DIVERGENCE_BOUND: f64 = 10.0;

/// Solve the task's viscous Burgers problem on `nx` by `nt` intervals.
pub fn solve_burgers(task: &TaskSpec, nx: usize, nt: usize) -> Result<SolutionField> {
    if task.equation != Equation::Burgers1D {
        return usage("solve_burgers needs a Burgers task");
    }
    if nx < 64 || nt < 100 {
        return usage(format!("resolution {nx}x{nt} is below the 64x100 minimum"));
    }
    let ic = |x: f64| initial_value(task, x, 0.0);
    let (rows, substeps) = cn_rows(&ic, task.viscosity, nx, nt, 1.0)?;
    let dt = 1.0 / (nt * substeps) as f64;
    Ok(SolutionField {
        axes: vec![
            FieldAxis::new("t", linspace(0.0, 1.0, nt)),
            FieldAxis::new("x", linspace(-1.0, 1.0, nx)),
        ],
        values: rows.concat(),
        task: task.clone(),
        scheme: SchemeInfo::new(
            "crank-nicolson ab2",
            vec![
                ("dx", 2.0 / nx as f64),
                ("dt", dt),
                ("substeps", substeps as f64),
                ("nu", task.viscosity),
            ],
        ),
    })
}

/// Crank–Nicolson diffusion with Adams–Bashforth convection in conservative
/// central form. Returns one row of `nx + 1` nodes per output time.
pub fn burgers_cn_grid(ic: &dyn Fn(f64) -> f64, nu: f64, nx: usize, nt: usize, t_end: f64) -> Result<Vec<Vec<f64>>> {
    Ok(cn_rows(ic, nu, nx, nt, t_end)?.0)
}

fn initial_row(ic: &dyn Fn(f64) -> f64, nx: usize) -> Vec<f64> {
    let mut u: Vec<f64> = linspace(-1.0, 1.0, nx).into_iter().map(ic).collect();
    u[0] = 0.0;
    u[nx] = 0.0;
    u
}

fn substeps_for(dt_out: f64, dt_max: f64) -> usize {
    ((dt_out / dt_max).ceil() as usize).max(1)
}

fn check_row(u: &[f64], t: f64) -> Result<()> {
    match u.iter().position(|v| !v.is_finite() || v.abs() > DIVERGENCE_BOUND) {
        Some(i) => Err(Error::SolverFailure(format!(
            "Burgers solution diverged at node {i}, t = {t}"
        ))),
        None => Ok(()),
    }
}

fn cn_rows(ic: &dyn Fn(f64) -> f64, nu: f64, nx: usize, nt: usize, t_end: f64) -> Result<(Vec<Vec<f64>>, usize)> {
    if nx < 4 || nt == 0 || !(nu > 0.0) || !(t_end > 0.0) {
        return usage("invalid Burgers discretization");
    }
    let dx = 2.0 / nx as f64;
    let mut u = initial_row(ic, nx);
    let umax = u.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
    let dt_out = t_end / nt as f64;
    // Burgers obeys a maximum principle, so the initial peak bounds the speed
    let m = substeps_for(dt_out, 0.5 * dx / umax);
    let h = dt_out / m as f64;
    let r = nu * h / (dx * dx);

    // constant tridiagonal (-r/2, 1 + r, -r/2) on the interior, factored once
    let n = nx - 1;
    let (a, b) = (-0.5 * r, 1.0 + r);
    let mut cprime = vec![0.0; n];
    let mut denom = vec![0.0; n];
    cprime[0] = a / b;
    denom[0] = b;
    for i in 1..n {
        denom[i] = b - a * cprime[i - 1];
        cprime[i] = a / denom[i];
    }

    let convection = |u: &[f64], out: &mut [f64]| {
        out[0] = 0.0;
        out[nx] = 0.0;
        for i in 1..nx {
            out[i] = -(u[i + 1] * u[i + 1] - u[i - 1] * u[i - 1]) / (4.0 * dx);
        }
    };

    let mut rows = Vec::with_capacity(nt + 1);
    rows.push(u.clone());
    let mut conv = vec![0.0; nx + 1];
    let mut conv_prev = vec![0.0; nx + 1];
    convection(&u, &mut conv_prev);
    let mut rhs = vec![0.0; n];
    let mut first = true;
    for k in 1..=nt {
        for _ in 0..m {
            convection(&u, &mut conv);
            for i in 1..nx {
                let explicit = if first {
                    conv[i]
                } else {
                    1.5 * conv[i] - 0.5 * conv_prev[i]
                };
                rhs[i - 1] = u[i] + 0.5 * r * (u[i - 1] - 2.0 * u[i] + u[i + 1]) + h * explicit;
            }
            first = false;
            // forward sweep then back substitution
            rhs[0] /= denom[0];
            for i in 1..n {
                rhs[i] = (rhs[i] - a * rhs[i - 1]) / denom[i];
            }
            for i in (0..n - 1).rev() {
                rhs[i] -= cprime[i] * rhs[i + 1];
            }
            u[1..nx].copy_from_slice(&rhs);
            std::mem::swap(&mut conv, &mut conv_prev);
        }
        check_row(&u, k as f64 * dt_out)?;
        rows.push(u.clone());
    }
    Ok((rows, m))
}

/// Independent explicit scheme: MUSCL reconstruction with a van Leer
/// limiter, Godunov convective flux, central diffusion and Heun (SSP-RK2)
/// time stepping. Returns one row of `nx + 1` nodes per output time.
pub fn burgers_muscl_grid(ic: &dyn Fn(f64) -> f64, nu: f64, nx: usize, nt: usize, t_end: f64) -> Result<Vec<Vec<f64>>> {
    if nx < 4 || nt == 0 || !(nu > 0.0) || !(t_end > 0.0) {
        return usage("invalid Burgers discretization");
    }
    let dx = 2.0 / nx as f64;
    let mut u = initial_row(ic, nx);
    let umax = u.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
    let dt_out = t_end / nt as f64;
    let dt_max = (0.4 * dx / umax).min(0.4 * dx * dx / nu);
    let m = substeps_for(dt_out, dt_max);
    let h = dt_out / m as f64;

    let mut slope = vec![0.0; nx + 1];
    let mut flux = vec![0.0; nx];
    let mut stage = u.clone();
    let mut k1 = vec![0.0; nx + 1];
    let mut k2 = vec![0.0; nx + 1];

    let rate = |u: &[f64], slope: &mut [f64], flux: &mut [f64], out: &mut [f64]| {
        for i in 1..nx {
            let (dl, dr) = (u[i] - u[i - 1], u[i + 1] - u[i]);
            slope[i] = if dl * dr > 0.0 { 2.0 * dl * dr / (dl + dr) } else { 0.0 };
        }
        for j in 0..nx {
            let ul = u[j] + 0.5 * slope[j];
            let ur = u[j + 1] - 0.5 * slope[j + 1];
            flux[j] = godunov(ul, ur);
        }
        out[0] = 0.0;
        out[nx] = 0.0;
        for i in 1..nx {
            out[i] = -(flux[i] - flux[i - 1]) / dx + nu * (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (dx * dx);
        }
    };

    let mut rows = Vec::with_capacity(nt + 1);
    rows.push(u.clone());
    for k in 1..=nt {
        for _ in 0..m {
            rate(&u, &mut slope, &mut flux, &mut k1);
            for i in 0..=nx {
                stage[i] = u[i] + h * k1[i];
            }
            rate(&stage, &mut slope, &mut flux, &mut k2);
            for i in 0..=nx {
                u[i] += 0.5 * h * (k1[i] + k2[i]);
            }
        }
        check_row(&u, k as f64 * dt_out)?;
        rows.push(u.clone());
    }
    Ok(rows)
}

fn godunov(ul: f64, ur: f64) -> f64 {
    let f = |v: f64| 0.5 * v * v;
    if ul <= ur {
        if ul > 0.0 {
            f(ul)
        } else if ur < 0.0 {
            f(ur)
        } else {
            0.0
        }
    } else if ul + ur > 0.0 {
        f(ul)
    } else {
        f(ur)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_initial_state_stays_zero() {
        let rows = burgers_cn_grid(&|_| 0.0, 0.05, 64, 100, 1.0).unwrap();
        assert!(rows.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn boundaries_stay_pinned() {
        let f = solve_burgers(&TaskSpec::burgers(0.7, 0), 128, 200).unwrap();
        for k in 0..=200 {
            let row = f.time_slice(k);
            assert_eq!(row[0], 0.0);
            assert_eq!(row[128], 0.0);
        }
    }

    #[test]
    fn odd_initial_state_stays_odd() {
        let rows = burgers_cn_grid(&|x| -(PI * x).sin(), 0.05, 256, 200, 1.0).unwrap();
        for row in &rows {
            for i in 0..=256 {
                assert!((row[i] + row[256 - i]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rejects_coarse_grids_and_wrong_equation() {
        assert!(solve_burgers(&TaskSpec::burgers(0.0, 0), 32, 200).is_err());
        assert!(solve_burgers(&TaskSpec::burgers(0.0, 0), 128, 50).is_err());
        let heat = TaskSpec::new(
            Equation::Heat2D,
            crate::pde_tasks::IcFamily::HeatAmplitude,
            vec![1.0, 0.0],
            0.0,
            0,
        )
        .unwrap();
        assert!(solve_burgers(&heat, 128, 200).is_err());
    }

    #[test]
    fn godunov_flux_cases() {
        assert_eq!(godunov(1.0, 2.0), 0.5);
        assert_eq!(godunov(-2.0, -1.0), 0.5);
        assert_eq!(godunov(-1.0, 1.0), 0.0);
        assert_eq!(godunov(2.0, -1.0), 2.0);
        assert_eq!(godunov(1.0, -2.0), 2.0);
    }
}
