use gampinn_core::autodiff::{jet_apply, Axis, Component, Directions, ElementaryOp, Jet, Tape};
use gampinn_core::meta_trainer::{data_loss, pde_loss};
use gampinn_core::network::{forward, forward_on_tape, forward_value, init_params, AdamConfig, AdamState, MlpParams};
use gampinn_core::pde_tasks::{sample_points, PointSet, TaskSpec};
use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Richardson-extrapolated central differences for f' and f''.
fn fd_derivatives(f: impl Fn(f64) -> f64, x: f64) -> (f64, f64) {
    let d1 = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    let d2 = |h: f64| (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
    let h = 1e-3;
    ((4.0 * d1(h / 2.0) - d1(h)) / 3.0, (4.0 * d2(h / 2.0) - d2(h)) / 3.0)
}

fn scalar_op(op: ElementaryOp, a: f64, b: f64) -> f64 {
    match op {
        ElementaryOp::Add => a + b,
        ElementaryOp::Sub => a - b,
        ElementaryOp::Mul => a * b,
        ElementaryOp::Div => a / b,
        ElementaryOp::Neg => -a,
        ElementaryOp::Scale(k) => k * a,
        ElementaryOp::Tanh => a.tanh(),
        ElementaryOp::Sin => a.sin(),
        ElementaryOp::Cos => a.cos(),
        ElementaryOp::Exp => a.exp(),
        ElementaryOp::Powi(n) => a.powi(n),
    }
}

const OPS: [ElementaryOp; 11] = [
    ElementaryOp::Add,
    ElementaryOp::Sub,
    ElementaryOp::Mul,
    ElementaryOp::Div,
    ElementaryOp::Neg,
    ElementaryOp::Scale(-1.7),
    ElementaryOp::Tanh,
    ElementaryOp::Sin,
    ElementaryOp::Cos,
    ElementaryOp::Exp,
    ElementaryOp::Powi(3),
];

// Operands are smooth functions of x so binary ops see non-trivial jets.
fn left(x: f64) -> f64 {
    (0.5 * x).sin() + 0.3 * x
}

fn right(x: f64) -> f64 {
    x * x + 1.5
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn elementary_ops_match_finite_differences(x in -1.5f64..1.5, which in 0usize..OPS.len()) {
        let op = OPS[which];
        let dirs = Directions::new(2, 0, 0).unwrap();
        let xj = Jet::seed(x, Axis::X, dirs).unwrap();
        let a = jet_apply(ElementaryOp::Add, &[xj.scale(0.3), jet_apply(ElementaryOp::Sin, &[xj.scale(0.5)]).unwrap()]).unwrap();
        let b = jet_apply(ElementaryOp::Add, &[jet_apply(ElementaryOp::Powi(2), &[xj]).unwrap(), Jet::constant(1.5, dirs)]).unwrap();
        let args: Vec<Jet> = if op.arity() == 2 { vec![a, b] } else { vec![a] };
        let out = jet_apply(op, &args).unwrap();

        let f = |s: f64| scalar_op(op, left(s), right(s));
        let (d1, d2) = fd_derivatives(f, x);
        prop_assert!((out.value - f(x)).abs() < 1e-14 * (1.0 + f(x).abs()));
        prop_assert!((out.d1(Axis::X) - d1).abs() < 1e-7 * (1.0 + d1.abs()), "{op:?}: {} vs {d1}", out.d1(Axis::X));
        prop_assert!((out.d2(Axis::X) - d2).abs() < 1e-5 * (1.0 + d2.abs()), "{op:?}: {} vs {d2}", out.d2(Axis::X));
    }

    #[test]
    fn network_input_derivatives_match_finite_differences(seed in 0u64..1000, x in -1.0f64..1.0, y in -1.0f64..1.0, t in 0.0f64..1.0) {
        let p = init_params(&[3, 8, 8, 1], seed).unwrap();
        let jet = forward(&p, &[x, y, t], Directions::HEAT2D).unwrap();
        let axes = [(Axis::X, 0), (Axis::Y, 1), (Axis::T, 2)];
        for (axis, k) in axes {
            let f = |s: f64| {
                let mut pt = [x, y, t];
                pt[k] = s;
                forward_value(&p, &pt).unwrap()
            };
            let (d1, d2) = fd_derivatives(f, [x, y, t][k]);
            prop_assert!((jet.d1(axis) - d1).abs() < 1e-7, "{axis:?}");
            if axis != Axis::T {
                prop_assert!((jet.d2(axis) - d2).abs() < 1e-5, "{axis:?}");
            }
        }
    }
}

#[test]
fn single_unit_second_derivative() {
    // u = a tanh(w x + v t + b) + c
    let (w, v, b, a, c) = (1.3, -0.4, 0.2, 0.8, -0.1);
    let p = MlpParams::from_layers(&[2, 1, 1], vec![vec![w, v, b], vec![a, c]]).unwrap();
    let (x, t) = (0.35, 0.6);
    let jet = forward(&p, &[x, t], Directions::BURGERS).unwrap();
    let th = (w * x + v * t + b).tanh();
    let sech2 = 1.0 - th * th;
    assert!((jet.value - (a * th + c)).abs() < 1e-15);
    assert!((jet.d1(Axis::X) - a * w * sech2).abs() < 1e-15);
    assert!((jet.d1(Axis::T) - a * v * sech2).abs() < 1e-15);
    assert!((jet.d2(Axis::X) - a * w * w * (-2.0 * th * sech2)).abs() < 1e-15);
}

// Burgers residual loss recorded on the tape one point at a time.
fn tape_burgers_loss(p: &MlpParams, task: &TaskSpec, points: &PointSet) -> (f64, Vec<f64>) {
    let n = points.collocation.nrows();
    let mut total = 0.0;
    let mut grad = vec![0.0; p.num_params()];
    for row in points.collocation.rows() {
        let mut tape = Tape::new(Directions::BURGERS);
        let (params, u) = forward_on_tape(&mut tape, p, &row.to_vec()).unwrap();
        let uv = tape.extract(u, Component::Value).unwrap();
        let ux = tape.extract(u, Component::First(Axis::X)).unwrap();
        let ut = tape.extract(u, Component::First(Axis::T)).unwrap();
        let uxx = tape.extract(u, Component::Second(Axis::X)).unwrap();
        let conv = tape.mul(uv, ux);
        let visc = tape.scale(uxx, -task.viscosity);
        let e = tape.add(ut, conv);
        let e = tape.add(e, visc);
        let sq = tape.mul(e, e);
        let loss = tape.scale(sq, 1.0 / n as f64);
        total += tape.value(loss).value;
        for (g, d) in grad.iter_mut().zip(tape.grad_wrt_params(loss, &params).unwrap()) {
            *g += d;
        }
    }
    (total, grad)
}

#[test]
fn batched_gradient_matches_the_tape() {
    let task = TaskSpec::burgers(0.6, 0);
    let points = sample_points(&task, 40, 4, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let p = init_params(&[2, 10, 10, 10, 1], 4).unwrap();
    let (l_batch, g_batch) = pde_loss(&p, &task, &points, None).unwrap();
    let (l_tape, g_tape) = tape_burgers_loss(&p, &task, &points);
    assert!((l_batch - l_tape).abs() < 1e-12 * (1.0 + l_tape));
    let scale = g_tape.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (a, b) in g_batch.iter().zip(&g_tape) {
        assert!((a - b).abs() < 1e-10 * scale, "{a} vs {b}");
    }
}

#[test]
fn residual_gradient_matches_finite_differences() {
    let task = TaskSpec::burgers(0.3, 0);
    let points = sample_points(&task, 30, 4, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
    let p = init_params(&[2, 6, 6, 1], 11).unwrap();
    let (_, g) = pde_loss(&p, &task, &points, None).unwrap();
    let flat = p.to_flat();
    let loss_at = |v: &[f64]| {
        let mut q = p.clone();
        q.set_flat(v).unwrap();
        pde_loss(&q, &task, &points, None).unwrap().0
    };
    let g = g.to_flat();
    for i in (0..flat.len()).step_by(3) {
        let fd = fd_derivatives(
            |s| {
                let mut v = flat.clone();
                v[i] = s;
                loss_at(&v)
            },
            flat[i],
        )
        .0;
        assert!(
            (g[i] - fd).abs() < 1e-6 * (1.0 + fd.abs()),
            "param {i}: {} vs {fd}",
            g[i]
        );
    }
}

#[test]
fn adam_fits_a_sine() {
    let n = 64;
    let mut pts = Array2::zeros((n, 2));
    let mut targets = Vec::with_capacity(n);
    for i in 0..n {
        let x = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
        pts[[i, 0]] = x;
        targets.push((std::f64::consts::PI * x).sin());
    }
    let mut p = init_params(&[2, 20, 20, 1], 1).unwrap();
    let mut adam = AdamState::new(&p, AdamConfig::default());
    let (start, _) = data_loss(&p, pts.view(), &targets).unwrap();
    for _ in 0..1500 {
        let (_, g) = data_loss(&p, pts.view(), &targets).unwrap();
        adam.step(&mut p, &g).unwrap();
    }
    let (end, _) = data_loss(&p, pts.view(), &targets).unwrap();
    assert!(end * 100.0 < start, "{start} -> {end}");
}
