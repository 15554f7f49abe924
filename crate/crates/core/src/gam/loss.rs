use ndarray::ArrayView2;

use super::{fit, FitTarget, GamConfig, GamFitReport, GamModel};
use crate::error::{usage, Result};

/// How GAM predictions turn into a loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossMode {
    /// Fit signed residuals `r`; loss `mean((r - g)^2)` with `g` held
    /// constant, so the gradient flows through `r` only.
    #[default]
    SmoothedResidual,
    /// Fit squared residuals; loss `mean(g)`. Constant in the network
    /// parameters, so it contributes no gradient.
    LiteralMean,
}

impl LossMode {
    fn target(self) -> FitTarget {
        match self {
            LossMode::SmoothedResidual => FitTarget::SignedResiduals,
            LossMode::LiteralMean => FitTarget::SquaredResiduals,
        }
    }
}

impl std::str::FromStr for LossMode {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smoothed" | "smoothed-residual" => Ok(LossMode::SmoothedResidual),
            "literal" | "literal-mean" => Ok(LossMode::LiteralMean),
            _ => usage(format!("unknown GAM loss mode `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GamLoss {
    pub value: f64,
    /// GAM prediction at every point, treated as constants.
    pub predictions: Vec<f64>,
    /// d(loss)/d(r_i).
    pub residual_weights: Vec<f64>,
}

/// Fit the model `mode` expects to `residuals` over `points`.
pub fn fit_residual_model(
    points: ArrayView2<'_, f64>,
    residuals: &[f64],
    mode: LossMode,
    config: &GamConfig,
) -> Result<(GamModel, GamFitReport)> {
    let targets: Vec<f64> = match mode {
        LossMode::SmoothedResidual => residuals.to_vec(),
        LossMode::LiteralMean => residuals.iter().map(|r| r * r).collect(),
    };
    let (mut model, report) = fit(points, &targets, config)?;
    model.target = mode.target();
    Ok((model, report))
}

/// Loss term from a fitted model. A model with [`FitTarget::Generic`] is
/// accepted in either mode.
pub fn gam_loss(model: &GamModel, residuals: &[f64], points: ArrayView2<'_, f64>, mode: LossMode) -> Result<GamLoss> {
    if model.target != FitTarget::Generic && model.target != mode.target() {
        return usage(format!(
            "model was fitted to {:?} but the loss mode is {mode:?}",
            model.target
        ));
    }
    if residuals.len() != points.nrows() {
        return usage("residuals and points differ in length");
    }
    let k = residuals.len();
    if k == 0 {
        return usage("GAM loss needs at least one point");
    }
    let predictions = model.predict_rows(points)?;
    let kf = k as f64;
    Ok(match mode {
        LossMode::SmoothedResidual => {
            let value = residuals
                .iter()
                .zip(&predictions)
                .map(|(r, g)| (r - g).powi(2))
                .sum::<f64>()
                / kf;
            let residual_weights = residuals
                .iter()
                .zip(&predictions)
                .map(|(r, g)| 2.0 * (r - g) / kf)
                .collect();
            GamLoss {
                value,
                predictions,
                residual_weights,
            }
        }
        LossMode::LiteralMean => GamLoss {
            value: predictions.iter().sum::<f64>() / kf,
            predictions,
            residual_weights: vec![0.0; k],
        },
    })
}
