//! Generalized additive models fitted by penalized B-spline backfitting, and
//! the residual losses built from them.
//!
//! A model predicts `intercept + sum_j f_j(v_j)` where each `f_j` is a cubic
//! B-spline expansion over feature `j`. Fitting cycles through the features,
//! refitting each smooth against the partial residual of all others by
//! penalized least squares with a second-difference penalty on the
//! coefficients, and recentres every smooth to mean zero over the training
//! rows.

mod bspline;
mod loss;

pub use bspline::BSplineBasis;
pub use loss::{fit_residual_model, gam_loss, GamLoss, LossMode};

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;

use crate::error::{usage, Error, Result};

/// Cubic splines throughout.
pub const SPLINE_DEGREE: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct GamConfig {
    /// Basis functions per feature.
    pub n_basis: usize,
    /// Weight of the second-difference penalty.
    pub lambda: f64,
    /// Stop once the largest coefficient change of a cycle drops below this.
    pub tolerance: f64,
    pub max_cycles: usize,
}

impl Default for GamConfig {
    fn default() -> Self {
        GamConfig {
            n_basis: 12,
            lambda: 1e-3,
            tolerance: 1e-6,
            max_cycles: 100,
        }
    }
}

/// What a model was fitted to; checked by [`gam_loss`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitTarget {
    Generic,
    SignedResiduals,
    SquaredResiduals,
}

/// One additive component `f_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Smooth {
    /// `None` when the feature was constant on the training rows; the smooth
    /// is then identically zero.
    pub basis: Option<BSplineBasis>,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
}

impl Smooth {
    fn zero(lambda: f64) -> Self {
        Smooth {
            basis: None,
            coefficients: Vec::new(),
            lambda,
        }
    }

    pub fn eval(&self, v: f64) -> f64 {
        match &self.basis {
            None => 0.0,
            Some(b) => {
                let (start, vals) = b.eval_nonzero(v);
                vals.iter().zip(&self.coefficients[start..]).map(|(b, c)| b * c).sum()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GamModel {
    pub intercept: f64,
    pub smooths: Vec<Smooth>,
    pub target: FitTarget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GamFitReport {
    pub backfit_iterations: usize,
    pub final_change: f64,
    pub training_rmse: f64,
    /// Largest coefficient change of every cycle.
    pub change_history: Vec<f64>,
}

impl GamModel {
    /// Intercept-only model with zero smooths.
    pub fn constant(intercept: f64, n_features: usize) -> Self {
        GamModel {
            intercept,
            smooths: (0..n_features).map(|_| Smooth::zero(0.0)).collect(),
            target: FitTarget::Generic,
        }
    }

    pub fn n_features(&self) -> usize {
        self.smooths.len()
    }

    pub fn predict(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.smooths.len() {
            return usage(format!(
                "point has {} features, model has {}",
                point.len(),
                self.smooths.len()
            ));
        }
        Ok(self.intercept + self.smooths.iter().zip(point).map(|(s, &v)| s.eval(v)).sum::<f64>())
    }

    pub fn predict_rows(&self, rows: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        rows.rows().into_iter().map(|r| self.predict(&r.to_vec())).collect()
    }

    /// Text dump of knots, coefficients and penalty weights.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "gampinn-gam 1");
        let _ = writeln!(out, "target {:?}", self.target);
        let _ = writeln!(out, "intercept {:?}", self.intercept);
        for (j, s) in self.smooths.iter().enumerate() {
            let _ = write!(out, "smooth {j} lambda {:?} degree {SPLINE_DEGREE} knots", s.lambda);
            if let Some(b) = &s.basis {
                for k in b.knots() {
                    let _ = write!(out, " {k:?}");
                }
            }
            let _ = write!(out, "\ncoef {j}");
            for c in &s.coefficients {
                let _ = write!(out, " {c:?}");
            }
            out.push('\n');
        }
        out
    }
}

// Second-difference penalty D'D for m coefficients.
pub(crate) fn difference_penalty(m: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(m, m);
    if m < 3 {
        return p;
    }
    for r in 0..m - 2 {
        let d = [(r, 1.0), (r + 1, -2.0), (r + 2, 1.0)];
        for &(i, a) in &d {
            for &(j, b) in &d {
                p[(i, j)] += a * b;
            }
        }
    }
    p
}

/// Design matrix of a basis over a column of feature values.
pub(crate) fn design(basis: &BSplineBasis, values: &[f64]) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(values.len(), basis.len());
    for (i, &v) in values.iter().enumerate() {
        let (start, vals) = basis.eval_nonzero(v);
        for (k, val) in vals.into_iter().enumerate() {
            b[(i, start + k)] = val;
        }
    }
    b
}

struct SmoothSolver {
    design: DMatrix<f64>,
    factor: nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>,
}

/// Fit a GAM to `targets` over the columns of `features`.
pub fn fit(features: ArrayView2<'_, f64>, targets: &[f64], config: &GamConfig) -> Result<(GamModel, GamFitReport)> {
    let n = features.nrows();
    if n < 2 {
        return Err(Error::DegenerateFit(format!("need at least 2 rows, got {n}")));
    }
    if targets.len() != n {
        return usage("targets and features have different row counts");
    }
    if targets.iter().any(|v| !v.is_finite()) || features.iter().any(|v| !v.is_finite()) {
        return usage("GAM inputs must be finite");
    }
    if !(config.lambda >= 0.0) {
        return usage("lambda must be non-negative");
    }
    if config.lambda == 0.0 && config.n_basis > n {
        return usage(format!(
            "lambda = 0 with {} basis functions and only {n} rows",
            config.n_basis
        ));
    }

    let intercept = targets.iter().sum::<f64>() / n as f64;
    let mut smooths = Vec::with_capacity(features.ncols());
    let mut solvers = Vec::with_capacity(features.ncols());
    for col in features.columns() {
        let values: Vec<f64> = col.to_vec();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo <= 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
            smooths.push(Smooth::zero(config.lambda));
            solvers.push(None);
            continue;
        }
        let basis = BSplineBasis::uniform(lo, hi, config.n_basis, SPLINE_DEGREE)?;
        let b = design(&basis, &values);
        let gram = b.transpose() * &b + difference_penalty(basis.len()) * config.lambda;
        let factor = gram
            .cholesky()
            .ok_or_else(|| Error::DegenerateFit("penalized normal equations are not positive definite".into()))?;
        smooths.push(Smooth {
            coefficients: vec![0.0; basis.len()],
            basis: Some(basis),
            lambda: config.lambda,
        });
        solvers.push(Some(SmoothSolver { design: b, factor }));
    }

    let y = DVector::from_column_slice(targets);
    let mut fitted: Vec<DVector<f64>> = vec![DVector::zeros(n); smooths.len()];
    let mut history = Vec::new();
    let mut final_change = 0.0;
    for _ in 0..config.max_cycles {
        let mut max_change: f64 = 0.0;
        for j in 0..smooths.len() {
            let Some(solver) = &solvers[j] else { continue };
            let mut partial = y.add_scalar(-intercept);
            for (k, f) in fitted.iter().enumerate() {
                if k != j {
                    partial -= f;
                }
            }
            let rhs = solver.design.transpose() * partial;
            let mut coef = solver.factor.solve(&rhs);
            let mut f = &solver.design * &coef;
            let centre = f.mean();
            // basis functions sum to one, so a constant shift of the
            // coefficients shifts the smooth by the same constant
            coef.add_scalar_mut(-centre);
            f.add_scalar_mut(-centre);
            let change = coef
                .iter()
                .zip(&smooths[j].coefficients)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            max_change = max_change.max(change);
            smooths[j].coefficients = coef.iter().copied().collect();
            fitted[j] = f;
        }
        history.push(max_change);
        final_change = max_change;
        if max_change < config.tolerance {
            break;
        }
    }

    let mut sse = 0.0;
    for i in 0..n {
        let pred = intercept + fitted.iter().map(|f| f[i]).sum::<f64>();
        sse += (targets[i] - pred).powi(2);
    }
    let report = GamFitReport {
        backfit_iterations: history.len(),
        final_change,
        training_rmse: (sse / n as f64).sqrt(),
        change_history: history,
    };
    Ok((
        GamModel {
            intercept,
            smooths,
            target: FitTarget::Generic,
        },
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn grid(n: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, 1), |(i, _)| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
    }

    #[test]
    fn constant_targets() {
        let x = Array2::from_shape_fn((30, 2), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 10.0);
        let (m, r) = fit(x.view(), &vec![2.5; 30], &GamConfig::default()).unwrap();
        assert_eq!(m.intercept, 2.5);
        for s in &m.smooths {
            assert!(s.coefficients.iter().all(|c| c.abs() < 1e-12));
        }
        assert!(r.training_rmse < 1e-12);
    }

    #[test]
    fn linear_target_is_reproduced() {
        let x = grid(50);
        let y: Vec<f64> = x.column(0).iter().map(|v| 2.0 * v).collect();
        let cfg = GamConfig {
            lambda: 1e-8,
            ..GamConfig::default()
        };
        let (m, r) = fit(x.view(), &y, &cfg).unwrap();
        assert!(r.training_rmse < 1e-3);
        assert!((m.predict(&[0.37]).unwrap() - 0.74).abs() < 1e-3);
    }

    #[test]
    fn square_target_prediction() {
        let x = grid(100);
        let y: Vec<f64> = x.column(0).iter().map(|v| v * v).collect();
        let cfg = GamConfig {
            n_basis: 20,
            lambda: 1e-4,
            ..GamConfig::default()
        };
        let (m, _) = fit(x.view(), &y, &cfg).unwrap();
        assert!((m.predict(&[0.5]).unwrap() - 0.25).abs() < 0.01);
    }

    #[test]
    fn smooths_are_centred() {
        let x = Array2::from_shape_fn((40, 2), |(i, j)| ((i * 13 + j * 5) % 17) as f64 / 8.0 - 1.0);
        let y: Vec<f64> = x.rows().into_iter().map(|r| (3.0 * r[0]).sin() + r[1] * r[1]).collect();
        let (m, _) = fit(x.view(), &y, &GamConfig::default()).unwrap();
        for (j, s) in m.smooths.iter().enumerate() {
            let mean = x.column(j).iter().map(|&v| s.eval(v)).sum::<f64>() / 40.0;
            assert!(mean.abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_inputs() {
        let x = grid(1);
        assert!(matches!(
            fit(x.view(), &[1.0], &GamConfig::default()),
            Err(Error::DegenerateFit(_))
        ));
        let x = grid(5);
        let cfg = GamConfig {
            lambda: 0.0,
            ..GamConfig::default()
        };
        assert!(matches!(fit(x.view(), &[0.0; 5], &cfg), Err(Error::Usage(_))));
        // lambda > 0 keeps a wide basis solvable on few rows
        assert!(fit(x.view(), &[0.0, 1.0, 0.0, 1.0, 0.5], &GamConfig::default()).is_ok());
    }

    #[test]
    fn constant_feature_gets_zero_smooth() {
        let x = Array2::from_shape_fn((10, 2), |(i, j)| if j == 1 { 0.0 } else { i as f64 });
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let (m, _) = fit(x.view(), &y, &GamConfig::default()).unwrap();
        assert!(m.smooths[1].basis.is_none());
        assert_eq!(m.smooths[1].eval(3.0), 0.0);
    }

    #[test]
    fn predict_dimension_and_clamping() {
        let m = GamModel::constant(0.4, 2);
        assert_eq!(m.predict(&[5.0, -3.0]).unwrap(), 0.4);
        assert!(m.predict(&[1.0]).is_err());

        let x = grid(30);
        let y: Vec<f64> = x.column(0).iter().map(|v| v.powi(3)).collect();
        let (m, _) = fit(x.view(), &y, &GamConfig::default()).unwrap();
        assert_eq!(m.predict(&[7.0]).unwrap(), m.predict(&[1.0]).unwrap());
    }

    #[test]
    fn dump_lists_every_smooth() {
        let x = grid(20);
        let y: Vec<f64> = x.column(0).iter().map(|v| v.sin()).collect();
        let (m, _) = fit(x.view(), &y, &GamConfig::default()).unwrap();
        let d = m.dump();
        assert!(d.starts_with("gampinn-gam 1\n"));
        assert!(d.contains("smooth 0 lambda"));
        assert_eq!(d.lines().filter(|l| l.starts_with("coef 0")).count(), 1);
    }
}
