use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::losses::{network_values, pde_loss, pinn_losses, weighted_value_gradient};
use super::{Arm, LossParts, MetaConfig, OuterMode, TaskLosses};
use crate::error::{usage, Error, Result};
use crate::gam::{fit_residual_model, gam_loss, GamConfig, LossMode};
use crate::network::{AdamConfig, AdamState, MlpParams};
use crate::pde_tasks::{sample_points, sample_task, PointSet, TaskSpec};

/// Support and query objectives of one task as seen by the meta-learner.
pub trait MetaObjective {
    /// Support loss and gradient. With `refit` false any per-step state
    /// (the GAM fit) from the previous call is reused unchanged.
    fn support(&mut self, params: &MlpParams, refit: bool) -> Result<(LossParts, MlpParams)>;
    fn query(&mut self, params: &MlpParams) -> Result<(LossParts, MlpParams)>;
}

/// Result of adapting to one task.
#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub adapted: MlpParams,
    /// This task's contribution to the meta-gradient.
    pub outer_grad: MlpParams,
    /// Support loss before adaptation.
    pub support: LossParts,
    /// Query loss after adaptation.
    pub query: LossParts,
}

/// Inner adaptation followed by the outer gradient of the query loss.
///
/// The second-order correction `-alpha * H_S g_Q` uses a central difference
/// of support gradients along `g_Q`, with any GAM fit held fixed.
pub fn task_outer_gradient<O: MetaObjective + ?Sized>(
    obj: &mut O,
    init: &MlpParams,
    config: &MetaConfig,
) -> Result<TaskOutcome> {
    let alpha = config.inner_lr;
    let mut theta = init.clone();
    let mut support = LossParts::default();
    for s in 0..config.inner_steps {
        let (parts, g) = obj.support(&theta, true)?;
        if s == 0 {
            support = parts;
        }
        theta.axpy(-alpha, &g);
    }
    let (query, gq) = obj.query(&theta)?;
    let outer_grad = match config.outer_mode {
        OuterMode::FirstOrder => gq,
        OuterMode::SecondOrder => {
            if config.inner_steps != 1 {
                return usage("second-order meta-gradients need exactly one inner step");
            }
            let mut grad = gq.clone();
            let vmax = gq.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if alpha != 0.0 && vmax > 0.0 {
                let pmax = init.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let h = 1e-5 * (1.0 + pmax) / vmax;
                let mut plus = init.clone();
                plus.axpy(h, &gq);
                let mut minus = init.clone();
                minus.axpy(-h, &gq);
                let (_, gp) = obj.support(&plus, false)?;
                let (_, gm) = obj.support(&minus, false)?;
                grad.axpy(-alpha / (2.0 * h), &gp);
                grad.axpy(alpha / (2.0 * h), &gm);
            }
            grad
        }
    };
    Ok(TaskOutcome {
        adapted: theta,
        outer_grad,
        support,
        query,
    })
}

/// Number of GAM fits made while evaluating each phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GamCalls {
    pub support: usize,
    pub query: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Support,
    Query,
}

/// PINN losses of one task: `L_pde + L_data` (or `L_pde + L_gam` on the
/// support set of the GAM arm).
pub struct PinnObjective {
    task: TaskSpec,
    support: PointSet,
    query: Option<PointSet>,
    arm: Arm,
    gam: GamConfig,
    loss_mode: LossMode,
    frozen: Option<Vec<f64>>,
    calls: GamCalls,
    phase: Phase,
}

impl PinnObjective {
    pub fn new(task: TaskSpec, support: PointSet, query: Option<PointSet>, config: &MetaConfig) -> Self {
        PinnObjective {
            task,
            support,
            query,
            arm: config.arm,
            gam: config.gam.clone(),
            loss_mode: config.loss_mode,
            frozen: None,
            calls: GamCalls::default(),
            phase: Phase::Support,
        }
    }

    pub fn gam_calls(&self) -> GamCalls {
        self.calls
    }

    // Every GAM fit goes through here so the phase accounting is complete.
    fn fit_gam(&mut self, points: &PointSet, residuals: &[f64]) -> Result<Vec<f64>> {
        match self.phase {
            Phase::Support => self.calls.support += 1,
            Phase::Query => self.calls.query += 1,
        }
        let ib = points.ib_points.view();
        let (model, _) = fit_residual_model(ib, residuals, self.loss_mode, &self.gam)?;
        Ok(gam_loss(&model, residuals, ib, self.loss_mode)?.predictions)
    }

    fn gam_support(&mut self, params: &MlpParams, refit: bool) -> Result<(LossParts, MlpParams)> {
        let support = self.support.clone();
        let (pde, mut grad) = pde_loss(params, &self.task, &support, None)?;
        let ib = support.ib_points.view();
        let u = network_values(params, ib)?;
        let r: Vec<f64> = u.iter().zip(&support.ib_targets).map(|(a, b)| a - b).collect();
        if refit || self.frozen.is_none() {
            self.frozen = Some(self.fit_gam(&support, &r)?);
        }
        let g = self.frozen.as_ref().expect("fitted above");
        let k = r.len() as f64;
        let (value, weights): (f64, Vec<f64>) = match self.loss_mode {
            LossMode::SmoothedResidual => (
                r.iter().zip(g).map(|(ri, gi)| (ri - gi).powi(2)).sum::<f64>() / k,
                r.iter().zip(g).map(|(ri, gi)| 2.0 * (ri - gi) / k).collect(),
            ),
            LossMode::LiteralMean => (g.iter().sum::<f64>() / k, vec![0.0; r.len()]),
        };
        if self.loss_mode == LossMode::SmoothedResidual {
            grad.axpy(1.0, &weighted_value_gradient(params, ib, &weights)?);
        }
        Ok((
            LossParts {
                pde,
                data: None,
                gam: Some(value),
                total: pde + value,
            },
            grad,
        ))
    }
}

fn plain_parts(params: &MlpParams, points: &PointSet, task: &TaskSpec) -> Result<(LossParts, MlpParams)> {
    let l = pinn_losses(params, points, task)?;
    Ok((
        LossParts {
            pde: l.pde,
            data: Some(l.data),
            gam: None,
            total: l.pde + l.data,
        },
        l.gradient,
    ))
}

impl MetaObjective for PinnObjective {
    fn support(&mut self, params: &MlpParams, refit: bool) -> Result<(LossParts, MlpParams)> {
        self.phase = Phase::Support;
        match self.arm {
            Arm::Random => usage("the random arm has no inner adaptation"),
            Arm::MamlPinn => plain_parts(params, &self.support, &self.task),
            Arm::GamPinn => self.gam_support(params, refit),
        }
    }

    fn query(&mut self, params: &MlpParams) -> Result<(LossParts, MlpParams)> {
        self.phase = Phase::Query;
        match &self.query {
            Some(q) => plain_parts(params, q, &self.task),
            None => usage("no query set"),
        }
    }
}

/// Adapt `init` to one task with `inner_steps` gradient steps on the support
/// set. Returns the adapted parameters and the pre-adaptation support loss.
pub fn inner_adapt(
    init: &MlpParams,
    task: &TaskSpec,
    support: &PointSet,
    config: &MetaConfig,
) -> Result<(MlpParams, LossParts)> {
    if config.arm == Arm::Random {
        return usage("the random arm has no inner adaptation");
    }
    let mut obj = PinnObjective::new(task.clone(), support.clone(), None, config);
    let mut theta = init.clone();
    let mut first = LossParts::default();
    for s in 0..config.inner_steps {
        let (parts, g) = obj.support(&theta, true)?;
        if s == 0 {
            first = parts;
        }
        theta.axpy(-config.inner_lr, &g);
    }
    Ok((theta, first))
}

/// One meta-epoch: per-task losses, the meta loss and GAM call counts.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaEpochRecord {
    pub epoch: usize,
    pub l_meta: f64,
    pub tasks: Vec<TaskLosses>,
    pub gam_calls: GamCalls,
}

/// The meta-learned initialization and its outer optimizer.
#[derive(Debug, Clone)]
pub struct MetaLearner {
    pub params: MlpParams,
    pub adam: AdamState,
    pub config: MetaConfig,
}

impl MetaLearner {
    pub fn new(params: MlpParams, config: MetaConfig) -> Result<Self> {
        config.validate()?;
        if config.arm == Arm::Random {
            return usage("the random arm is not meta-trained");
        }
        if params.input_dim() != config.family.equation().input_dim() {
            return usage("initialization does not match the equation's input dimension");
        }
        let adam = AdamState::new(
            &params,
            AdamConfig {
                learning_rate: config.outer_lr,
                ..AdamConfig::default()
            },
        );
        Ok(MetaLearner { params, adam, config })
    }

    /// Adapt to every task, average the query losses and their outer
    /// gradients in task order, and take one Adam step.
    pub fn step<R: Rng + ?Sized>(&mut self, tasks: &[TaskSpec], epoch: usize, rng: &mut R) -> Result<MetaEpochRecord> {
        if tasks.len() != self.config.n_tasks {
            return usage(format!(
                "expected {} tasks per meta-batch, got {}",
                self.config.n_tasks,
                tasks.len()
            ));
        }
        let seeds: Vec<u64> = tasks.iter().map(|_| rng.gen()).collect();
        let cfg = &self.config;
        let params = &self.params;
        let results: Vec<Result<(TaskOutcome, GamCalls)>> = tasks
            .par_iter()
            .zip(seeds.par_iter())
            .map(|(task, &seed)| {
                let mut trng = ChaCha8Rng::seed_from_u64(seed);
                let support = sample_points(task, cfg.support_nf, cfg.support_nib, &mut trng)?;
                let query = sample_points(task, cfg.query_nf, cfg.query_nib, &mut trng)?;
                let mut obj = PinnObjective::new(task.clone(), support, Some(query), cfg);
                let outcome = task_outer_gradient(&mut obj, params, cfg)?;
                Ok((outcome, obj.gam_calls()))
            })
            .collect();

        let n = tasks.len() as f64;
        let mut grad = self.params.zeros_like();
        let mut l_meta = 0.0;
        let mut losses = Vec::with_capacity(tasks.len());
        let mut calls = GamCalls::default();
        for (i, (res, task)) in results.into_iter().zip(tasks).enumerate() {
            let (outcome, c) = res?;
            grad.axpy(1.0 / n, &outcome.outer_grad);
            l_meta += outcome.query.total / n;
            calls.support += c.support;
            calls.query += c.query;
            losses.push(TaskLosses {
                epoch,
                task_index: i,
                task: task.clone(),
                support: outcome.support,
                query: outcome.query,
            });
        }
        if !l_meta.is_finite() {
            let detail: Vec<String> = losses
                .iter()
                .map(|t| {
                    format!(
                        "task {}: support {} query {}",
                        t.task_index, t.support.total, t.query.total
                    )
                })
                .collect();
            return Err(Error::NonFinite(format!(
                "meta loss at epoch {epoch} is not finite ({})",
                detail.join("; ")
            )));
        }
        self.adam.step(&mut self.params, &grad)?;
        Ok(MetaEpochRecord {
            epoch,
            l_meta,
            tasks: losses,
            gam_calls: calls,
        })
    }
}

#[derive(Debug, Clone)]
pub struct MetaTrainOutcome {
    pub params: MlpParams,
    pub trace: Vec<MetaEpochRecord>,
    /// Whether training stopped because the meta loss reached epsilon.
    pub converged: bool,
}

/// Meta-train from `init` until the meta loss reaches epsilon or the epoch
/// budget runs out. `on_epoch` sees every record as it is produced.
pub fn meta_train<R, F>(config: &MetaConfig, init: MlpParams, rng: &mut R, mut on_epoch: F) -> Result<MetaTrainOutcome>
where
    R: Rng + ?Sized,
    F: FnMut(&MetaEpochRecord),
{
    let mut learner = MetaLearner::new(init, config.clone())?;
    let pool: Option<Vec<TaskSpec>> = config
        .fixed_task_pool
        .then(|| (0..config.n_tasks).map(|_| sample_task(config.family, rng)).collect());
    let mut trace = Vec::new();
    let mut converged = false;
    for epoch in 0..config.meta_epochs {
        let tasks = match &pool {
            Some(p) => p.clone(),
            None => (0..config.n_tasks).map(|_| sample_task(config.family, rng)).collect(),
        };
        let record = learner.step(&tasks, epoch, rng)?;
        on_epoch(&record);
        let done = record.l_meta <= config.epsilon;
        trace.push(record);
        if done {
            converged = true;
            break;
        }
    }
    Ok(MetaTrainOutcome {
        params: learner.params,
        trace,
        converged,
    })
}
