use std::f64::consts::PI;

use gampinn_core::oracle_solvers::{
    burgers_cn_grid, burgers_muscl_grid, encode_field, heat_grid, solve_burgers, solve_heat2d, HeatProblem,
};
use gampinn_core::pde_tasks::{Equation, IcFamily, TaskSpec};

fn max_gap_on_coarse(coarse: &[Vec<f64>], fine: &[Vec<f64>], stride: usize) -> f64 {
    coarse
        .iter()
        .zip(fine)
        .flat_map(|(c, f)| c.iter().enumerate().map(move |(i, v)| (v - f[i * stride]).abs()))
        .fold(0.0, f64::max)
}

fn burgers_ic(x: f64) -> f64 {
    -(PI * x).sin()
}

#[test]
fn burgers_spatial_order() {
    let grids: Vec<Vec<Vec<f64>>> = [128, 256, 512]
        .iter()
        .map(|&nx| burgers_cn_grid(&burgers_ic, 0.05, nx, 1000, 1.0).unwrap())
        .collect();
    let e1 = max_gap_on_coarse(&grids[0], &grids[1], 2);
    let e2 = max_gap_on_coarse(&grids[1], &grids[2], 2);
    let order = (e1 / e2).log2();
    assert!(order >= 1.8, "order {order} from gaps {e1} {e2}");
    assert!(e2 < 1e-3, "refinement 256 to 512 moved the field by {e2}");
}

#[test]
fn burgers_schemes_agree() {
    let cn = burgers_cn_grid(&burgers_ic, 0.05, 512, 1000, 1.0).unwrap();
    let muscl = burgers_muscl_grid(&burgers_ic, 0.05, 2048, 100, 1.0).unwrap();
    let gap = muscl
        .iter()
        .enumerate()
        .flat_map(|(k, row)| {
            let cn_row = &cn[k * 10];
            cn_row.iter().enumerate().map(move |(i, v)| (v - row[4 * i]).abs())
        })
        .fold(0.0, f64::max);
    assert!(gap < 1e-3, "schemes differ by {gap}");
}

#[test]
fn burgers_field_is_odd_at_zero_theta() {
    let f = solve_burgers(&TaskSpec::burgers(0.0, 0), 256, 200).unwrap();
    for k in 0..=200 {
        let row = f.time_slice(k);
        for i in 0..=256 {
            assert!((row[i] + row[256 - i]).abs() < 1e-6);
        }
    }
}

#[test]
fn oracle_files_are_reproducible() {
    let task = TaskSpec::burgers(0.4, 3);
    let a = encode_field(&solve_burgers(&task, 128, 200).unwrap());
    let b = encode_field(&solve_burgers(&task, 128, 200).unwrap());
    assert_eq!(a, b);
}

fn laplace(x: f64, y: f64) -> f64 {
    (PI * x).sin() * (PI * (y + 1.0)).sinh() / (2.0 * PI).sinh()
}

#[test]
fn heat_reaches_laplace_steady_state() {
    let top = |x: f64, y: f64| if y == 1.0 { (PI * x).sin() } else { 0.0 };
    let n = 64;
    let rows = heat_grid(&HeatProblem {
        ic: &|x, y| (PI * x).cos() * y,
        boundary: &top,
        diffusivity: 1.0,
        nx: n,
        ny: n,
        nt: 200,
        t_end: 4.0,
    })
    .unwrap();
    let last = rows.last().unwrap();
    let mut gap: f64 = 0.0;
    for j in 0..=n {
        for i in 0..=n {
            let (x, y) = (-1.0 + 2.0 * i as f64 / n as f64, -1.0 + 2.0 * j as f64 / n as f64);
            gap = gap.max((last[j * (n + 1) + i] - laplace(x, y)).abs());
        }
    }
    assert!(gap < 1e-3, "steady state off by {gap}");
    let centre = last[(3 * n / 4) * (n + 1) + 3 * n / 4];
    assert!((centre - (1.5 * PI).sinh() / (2.0 * PI).sinh()).abs() < 1e-3);
}

#[test]
fn heat_mode_decay_matches_series() {
    let (n, t_end) = (128, 0.25);
    let rows = heat_grid(&HeatProblem {
        ic: &|x, _| (PI * x).sin(),
        boundary: &|_, _| 0.0,
        diffusivity: 1.0,
        nx: n,
        ny: n,
        nt: 2000,
        t_end,
    })
    .unwrap();
    let last = rows.last().unwrap();
    // sin(pi x) times the cosine series of 1 on (-1, 1)
    let exact = |x: f64, y: f64| {
        let mut s = 0.0;
        for m in 0..200 {
            let k = (2 * m + 1) as f64 * PI / 2.0;
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * 4.0 / ((2 * m + 1) as f64 * PI) * (k * y).cos() * (-(PI * PI + k * k) * t_end).exp();
        }
        (PI * x).sin() * s
    };
    for &(i, j) in &[(96, 64), (80, 80), (100, 30), (64, 64), (40, 110)] {
        let (x, y) = (-1.0 + 2.0 * i as f64 / n as f64, -1.0 + 2.0 * j as f64 / n as f64);
        let got = last[j * (n + 1) + i];
        assert!((got - exact(x, y)).abs() < 1e-3, "({x}, {y}): {got} vs {}", exact(x, y));
    }
}

#[test]
fn heat_respects_maximum_principle() {
    for params in [vec![1.0, 0.5], vec![0.9, 0.9], vec![0.2, 1.0]] {
        let task = TaskSpec::new(Equation::Heat2D, IcFamily::HeatAmplitude, params, 0.0, 0).unwrap();
        let f = solve_heat2d(&task, 48, 48, 60).unwrap();
        let bound = f.time_slice(0).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(f.max_abs() <= bound + 1e-9);
    }
}

#[test]
fn heat_spatial_order() {
    let task = TaskSpec::new(Equation::Heat2D, IcFamily::HeatAmplitude, vec![1.0, 0.5], 0.0, 0).unwrap();
    let last = |n: usize| {
        let f = solve_heat2d(&task, n, n, 40).unwrap();
        f.time_slice(40).to_vec()
    };
    let (a, b, c) = (last(16), last(32), last(64));
    let gap = |coarse: &[f64], fine: &[f64], n: usize| {
        let mut g: f64 = 0.0;
        for j in 0..=n {
            for i in 0..=n {
                g = g.max((coarse[j * (n + 1) + i] - fine[2 * j * (2 * n + 1) + 2 * i]).abs());
            }
        }
        g
    };
    let (e1, e2) = (gap(&a, &b, 16), gap(&b, &c, 32));
    let order = (e1 / e2).log2();
    assert!(order >= 1.8, "order {order} from gaps {e1} {e2}");
}
