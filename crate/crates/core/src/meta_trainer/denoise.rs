use rand::Rng;

use super::finetune::{train, FineTuneConfig, FineTuneOutcome, FineTuneRecord};
use super::losses::{data_loss, network_values, pde_loss, pde_residuals};
use crate::error::{usage, Result};
use crate::gam::{fit, GamConfig};
use crate::network::MlpParams;
use crate::oracle_solvers::{SchemeInfo, SolutionField};
use crate::pde_tasks::{sample_points, IcFamily, TaskSpec};

/// Both arms of a de-noising run and their solutions on the oracle grid.
#[derive(Debug, Clone)]
pub struct DenoiseOutcome {
    /// Trained on the jittered residual as is.
    pub noisy: FineTuneOutcome,
    /// Trained on the jittered residual minus its GAM fit.
    pub corrected: FineTuneOutcome,
    pub noisy_field: SolutionField,
    pub corrected_field: SolutionField,
}

fn predicted_field(params: &MlpParams, clean: &SolutionField, name: &str) -> Result<SolutionField> {
    let values = network_values(params, clean.input_points().view())?;
    Ok(SolutionField {
        axes: clean.axes.clone(),
        values,
        task: clean.task.clone(),
        scheme: SchemeInfo::new(name, vec![]),
    })
}

/// Which network of a de-noising run a record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenoiseArm {
    Noisy,
    Corrected,
}

impl DenoiseArm {
    pub fn name(self) -> &'static str {
        match self {
            DenoiseArm::Noisy => "noisy",
            DenoiseArm::Corrected => "corrected",
        }
    }
}

/// Train two networks from `start` on the noisy Burgers task, one on the raw
/// jittered residual and one where a GAM over the collocation coordinates,
/// refitted at every logging interval, is subtracted from it. Both are
/// scored against the clean oracle field.
pub fn denoise_run<R: Rng + ?Sized>(
    task: &TaskSpec,
    start: &MlpParams,
    clean: &SolutionField,
    config: &FineTuneConfig,
    gam: &GamConfig,
    rng: &mut R,
) -> Result<DenoiseOutcome> {
    denoise_run_observed(task, start, clean, config, gam, rng, |_, _| {})
}

/// [`denoise_run`] reporting every logged record of either arm as it is
/// produced.
pub fn denoise_run_observed<R, F>(
    task: &TaskSpec,
    start: &MlpParams,
    clean: &SolutionField,
    config: &FineTuneConfig,
    gam: &GamConfig,
    rng: &mut R,
    mut on_record: F,
) -> Result<DenoiseOutcome>
where
    R: Rng + ?Sized,
    F: FnMut(DenoiseArm, &FineTuneRecord),
{
    if !(task.noise_weight > 0.0) {
        return usage("de-noising needs a positive noise weight; use fine-tuning for clean tasks");
    }
    if task.ic_family != IcFamily::BurgersSinOnly {
        return usage("de-noising runs on the sine-only Burgers family");
    }
    if config.log_every == 0 {
        return usage("logging interval must be at least 1");
    }
    let points = sample_points(task, config.n_collocation, config.n_ib, rng)?;

    let noisy = train(
        start,
        clean,
        config,
        &mut |r| on_record(DenoiseArm::Noisy, r),
        |p, _| {
            let (pde, mut g) = pde_loss(p, task, &points, None)?;
            let (data, gd) = data_loss(p, points.ib_points.view(), &points.ib_targets)?;
            g.axpy(1.0, &gd);
            Ok((pde, data, g))
        },
    )?;

    let mut smooth: Vec<f64> = Vec::new();
    let corrected = train(
        start,
        clean,
        config,
        &mut |r| on_record(DenoiseArm::Corrected, r),
        |p, epoch| {
            if epoch % config.log_every == 0 || smooth.is_empty() {
                let r = pde_residuals(p, task, &points)?;
                let (model, _) = fit(points.collocation.view(), &r, gam)?;
                smooth = model.predict_rows(points.collocation.view())?;
            }
            let (pde, mut g) = pde_loss(p, task, &points, Some(&smooth))?;
            let (data, gd) = data_loss(p, points.ib_points.view(), &points.ib_targets)?;
            g.axpy(1.0, &gd);
            Ok((pde, data, g))
        },
    )?;

    Ok(DenoiseOutcome {
        noisy_field: predicted_field(&noisy.params, clean, "pinn noisy")?,
        corrected_field: predicted_field(&corrected.params, clean, "pinn corrected")?,
        noisy,
        corrected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_params, pinn_layer_sizes};
    use crate::oracle_solvers::solve_burgers;
    use crate::pde_tasks::Equation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sin_task(p: f64) -> TaskSpec {
        TaskSpec::new(Equation::Burgers1D, IcFamily::BurgersSinOnly, vec![], p, 0).unwrap()
    }

    #[test]
    fn zero_noise_is_rejected() {
        let clean = solve_burgers(&sin_task(0.0), 64, 100).unwrap();
        let p = init_params(&pinn_layer_sizes(2), 1).unwrap();
        let cfg = FineTuneConfig::default();
        let err = denoise_run(
            &sin_task(0.0),
            &p,
            &clean,
            &cfg,
            &GamConfig::default(),
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        assert!(err.is_err());
        let wrong = TaskSpec::burgers(0.2, 0).with_noise(0.1);
        assert!(denoise_run(
            &wrong,
            &p,
            &clean,
            &cfg,
            &GamConfig::default(),
            &mut ChaCha8Rng::seed_from_u64(1)
        )
        .is_err());
    }

    #[test]
    fn short_run_produces_both_fields() {
        let clean = solve_burgers(&sin_task(0.0), 64, 100).unwrap();
        let p = init_params(&pinn_layer_sizes(2), 1).unwrap();
        let cfg = FineTuneConfig {
            epochs: 20,
            n_collocation: 64,
            n_ib: 16,
            log_every: 10,
            ..FineTuneConfig::default()
        };
        let out = denoise_run(
            &sin_task(0.05),
            &p,
            &clean,
            &cfg,
            &GamConfig::default(),
            &mut ChaCha8Rng::seed_from_u64(4),
        )
        .unwrap();
        assert_eq!(out.noisy.trace.len(), 3);
        assert_eq!(out.corrected.trace.len(), 3);
        assert_eq!(out.noisy_field.values.len(), clean.values.len());
        assert_ne!(out.noisy.params, out.corrected.params);
    }
}
