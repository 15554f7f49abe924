use rand::Rng;

use super::losses::{network_values, pinn_losses};
use crate::error::{usage, Result};
use crate::network::{AdamConfig, AdamState, MlpParams};
use crate::oracle_solvers::{eval_field_mse, SolutionField};
use crate::pde_tasks::{sample_points, TaskSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct FineTuneConfig {
    pub epochs: usize,
    pub n_collocation: usize,
    pub n_ib: usize,
    pub adam: AdamConfig,
    /// Record losses and field error every this many epochs.
    pub log_every: usize,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        FineTuneConfig {
            epochs: 2000,
            n_collocation: 10_000,
            n_ib: 100,
            adam: AdamConfig::default(),
            log_every: 50,
        }
    }
}

/// Losses and field error after `epoch` optimizer steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FineTuneRecord {
    pub epoch: usize,
    pub pde: f64,
    pub data: f64,
    pub field_mse: f64,
}

#[derive(Debug, Clone)]
pub struct FineTuneOutcome {
    pub params: MlpParams,
    pub trace: Vec<FineTuneRecord>,
}

impl FineTuneOutcome {
    /// The record logged at `epoch`, if any.
    pub fn at(&self, epoch: usize) -> Option<&FineTuneRecord> {
        self.trace.iter().find(|r| r.epoch == epoch)
    }

    pub fn last(&self) -> &FineTuneRecord {
        self.trace.last().expect("the initial state is always logged")
    }
}

pub(crate) fn field_mse(params: &MlpParams, oracle: &SolutionField) -> Result<f64> {
    eval_field_mse(oracle, |pts| network_values(params, pts))
}

/// Adam training loop shared by fine-tuning and the de-noising arms.
/// `objective(params, epoch)` returns `(L_pde, L_data, gradient)`.
pub(crate) fn train<F>(
    start: &MlpParams,
    oracle: &SolutionField,
    config: &FineTuneConfig,
    on_record: &mut dyn FnMut(&FineTuneRecord),
    mut objective: F,
) -> Result<FineTuneOutcome>
where
    F: FnMut(&MlpParams, usize) -> Result<(f64, f64, MlpParams)>,
{
    if config.log_every == 0 {
        return usage("logging interval must be at least 1");
    }
    let mut params = start.clone();
    let mut adam = AdamState::new(&params, config.adam);
    let mut trace = Vec::new();
    for epoch in 0..config.epochs {
        let (pde, data, grad) = objective(&params, epoch)?;
        if epoch % config.log_every == 0 {
            let record = FineTuneRecord {
                epoch,
                pde,
                data,
                field_mse: field_mse(&params, oracle)?,
            };
            on_record(&record);
            trace.push(record);
        }
        adam.step(&mut params, &grad)?;
    }
    let (pde, data, _) = objective(&params, config.epochs)?;
    let record = FineTuneRecord {
        epoch: config.epochs,
        pde,
        data,
        field_mse: field_mse(&params, oracle)?,
    };
    on_record(&record);
    trace.push(record);
    Ok(FineTuneOutcome { params, trace })
}

/// Standard PINN training of `task` from `start`, scored against `oracle`.
pub fn fine_tune<R: Rng + ?Sized>(
    start: &MlpParams,
    task: &TaskSpec,
    oracle: &SolutionField,
    config: &FineTuneConfig,
    rng: &mut R,
) -> Result<FineTuneOutcome> {
    fine_tune_observed(start, task, oracle, config, rng, |_| {})
}

/// [`fine_tune`] that also hands every logged record to `on_record` as soon
/// as it is produced.
pub fn fine_tune_observed<R, F>(
    start: &MlpParams,
    task: &TaskSpec,
    oracle: &SolutionField,
    config: &FineTuneConfig,
    rng: &mut R,
    mut on_record: F,
) -> Result<FineTuneOutcome>
where
    R: Rng + ?Sized,
    F: FnMut(&FineTuneRecord),
{
    if oracle.task.equation != task.equation {
        return usage("oracle field belongs to a different equation");
    }
    let points = sample_points(task, config.n_collocation, config.n_ib, rng)?;
    train(start, oracle, config, &mut on_record, |p, _| {
        let l = pinn_losses(p, &points, task)?;
        Ok((l.pde, l.data, l.gradient))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_params, pinn_layer_sizes};
    use crate::oracle_solvers::solve_burgers;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_epochs_logs_initial_state_only() {
        let task = TaskSpec::burgers(0.0, 0);
        let oracle = solve_burgers(&task, 64, 100).unwrap();
        let p = init_params(&pinn_layer_sizes(2), 1).unwrap();
        let cfg = FineTuneConfig {
            epochs: 0,
            n_collocation: 50,
            n_ib: 10,
            ..FineTuneConfig::default()
        };
        let out = fine_tune(&p, &task, &oracle, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(out.trace.len(), 1);
        assert_eq!(out.trace[0].epoch, 0);
        assert_eq!(out.params, p);
    }

    #[test]
    fn logging_cadence_and_progress() {
        let task = TaskSpec::burgers(0.2, 0);
        let oracle = solve_burgers(&task, 64, 100).unwrap();
        let p = init_params(&pinn_layer_sizes(2), 2).unwrap();
        let cfg = FineTuneConfig {
            epochs: 120,
            n_collocation: 100,
            n_ib: 40,
            log_every: 50,
            ..FineTuneConfig::default()
        };
        let out = fine_tune(&p, &task, &oracle, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let epochs: Vec<usize> = out.trace.iter().map(|r| r.epoch).collect();
        assert_eq!(epochs, vec![0, 50, 100, 120]);
        let first = out.trace[0].pde + out.trace[0].data;
        let last = out.last().pde + out.last().data;
        assert!(last < first);
    }
}
