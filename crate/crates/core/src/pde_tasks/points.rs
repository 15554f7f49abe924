use ndarray::Array2;
use rand::Rng;

use super::{ic_bc_value, Equation, TaskSpec};
use crate::error::{usage, Result};

/// Collocation and initial/boundary points of one task.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    /// Interior points, one row per point.
    pub collocation: Array2<f64>,
    /// Points on the `t = 0` face or a spatial boundary face.
    pub ib_points: Array2<f64>,
    pub ib_targets: Vec<f64>,
    /// Equation noise per collocation point; empty when the task is clean.
    pub noise: Vec<f64>,
}

impl PointSet {
    pub fn empty(dim: usize) -> Self {
        PointSet {
            collocation: Array2::zeros((0, dim)),
            ib_points: Array2::zeros((0, dim)),
            ib_targets: Vec::new(),
            noise: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.collocation.ncols()
    }

    /// Build from explicit points, filling targets from the task.
    pub fn from_points(
        task: &TaskSpec,
        collocation: Array2<f64>,
        ib_points: Array2<f64>,
        noise: Vec<f64>,
    ) -> Result<Self> {
        let d = task.equation.input_dim();
        if collocation.ncols() != d || ib_points.ncols() != d {
            return usage("point dimension does not match the equation");
        }
        if !noise.is_empty() && noise.len() != collocation.nrows() {
            return usage("noise must be empty or have one entry per collocation point");
        }
        let ib_targets = ib_points
            .rows()
            .into_iter()
            .map(|r| ic_bc_value(task, &r.to_vec()))
            .collect::<Result<_>>()?;
        Ok(PointSet {
            collocation,
            ib_points,
            ib_targets,
            noise,
        })
    }
}

// Uniform draw from the open interval (lo, hi).
fn open<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    loop {
        let v = rng.gen_range(lo..hi);
        if v > lo {
            return v;
        }
    }
}

/// Sample `n_collocation` interior points and `n_ib` initial/boundary points.
///
/// Initial/boundary points are spread evenly over the faces (the `t = 0`
/// face and each spatial boundary face) with the initial face taking the
/// rounding surplus, so it always receives at least one point.
pub fn sample_points<R: Rng + ?Sized>(
    task: &TaskSpec,
    n_collocation: usize,
    n_ib: usize,
    rng: &mut R,
) -> Result<PointSet> {
    if n_collocation == 0 || n_ib == 0 {
        return usage("point counts must be at least 1");
    }
    let d = task.equation.input_dim();
    let mut col = Array2::zeros((n_collocation, d));
    for mut row in col.rows_mut() {
        for k in 0..d - 1 {
            row[k] = open(rng, -1.0, 1.0);
        }
        row[d - 1] = open(rng, 0.0, 1.0);
    }

    // spatial faces: (coordinate index, fixed value)
    let faces: Vec<(usize, f64)> = match task.equation {
        Equation::Burgers1D => vec![(0, -1.0), (0, 1.0)],
        Equation::Heat2D => vec![(0, -1.0), (0, 1.0), (1, -1.0), (1, 1.0)],
    };
    let n_faces = faces.len() + 1;
    let n_initial = n_ib.div_ceil(n_faces).max(1);
    let mut ib = Array2::zeros((n_ib, d));
    for (i, mut row) in ib.rows_mut().into_iter().enumerate() {
        for k in 0..d - 1 {
            row[k] = rng.gen_range(-1.0..=1.0);
        }
        if i < n_initial {
            row[d - 1] = 0.0;
        } else {
            let (axis, value) = faces[(i - n_initial) % faces.len()];
            row[axis] = value;
            row[d - 1] = rng.gen_range(0.0..=1.0);
        }
    }

    let noise = if task.noise_weight > 0.0 {
        (0..n_collocation).map(|_| rng.gen_range(-1.0..=1.0)).collect()
    } else {
        Vec::new()
    };
    PointSet::from_points(task, col, ib, noise)
}
