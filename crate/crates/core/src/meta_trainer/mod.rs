//! Meta-training of PINN initializations (MAML with an optional GAM support
//! loss), fine-tuning on held-out tasks, and the de-noising experiment.
//!
//! Each meta-epoch samples a batch of tasks. For every task the current
//! initialization is adapted by plain gradient descent on a support set, the
//! adapted network is scored on a query set with `L_pde + L_data`, and the
//! mean query loss drives an Adam update of the initialization. The GAM arm
//! swaps the support data loss for a GAM fitted to the initial/boundary
//! residuals; query sets never see the GAM.

mod denoise;
mod finetune;
mod losses;
mod maml;

pub use denoise::{denoise_run, denoise_run_observed, DenoiseArm, DenoiseOutcome};
pub use finetune::{fine_tune, fine_tune_observed, FineTuneConfig, FineTuneOutcome, FineTuneRecord};
pub use losses::{
    data_loss, network_values, pde_loss, pde_residuals, pinn_losses, weighted_value_gradient, PinnLosses,
};
pub use maml::{
    inner_adapt, meta_train, task_outer_gradient, GamCalls, MetaEpochRecord, MetaLearner, MetaObjective,
    MetaTrainOutcome, PinnObjective, TaskOutcome,
};

use std::fmt;
use std::str::FromStr;

use crate::error::{usage, Error, Result};
use crate::gam::{GamConfig, LossMode};
use crate::pde_tasks::{IcFamily, TaskSpec};

/// Which initialization strategy a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arm {
    /// Fresh random weights, no meta-training.
    Random,
    MamlPinn,
    GamPinn,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::Random, Arm::MamlPinn, Arm::GamPinn];

    pub fn name(self) -> &'static str {
        match self {
            Arm::Random => "random",
            Arm::MamlPinn => "maml",
            Arm::GamPinn => "gampinn",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Arm::Random),
            "maml" | "mamlpinn" | "maml-pinn" => Ok(Arm::MamlPinn),
            "gam" | "gampinn" | "gam-pinn" => Ok(Arm::GamPinn),
            _ => usage(format!("unknown arm `{s}`")),
        }
    }
}

/// How the outer gradient treats the inner adaptation step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OuterMode {
    /// Query gradient at the adapted parameters, applied directly.
    #[default]
    FirstOrder,
    /// Differentiate through the single inner step.
    SecondOrder,
}

impl FromStr for OuterMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" | "first-order" | "fomaml" => Ok(OuterMode::FirstOrder),
            "second" | "second-order" => Ok(OuterMode::SecondOrder),
            _ => usage(format!("unknown outer mode `{s}`")),
        }
    }
}

impl fmt::Display for OuterMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OuterMode::FirstOrder => "first-order",
            OuterMode::SecondOrder => "second-order",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaConfig {
    pub family: IcFamily,
    pub arm: Arm,
    pub outer_mode: OuterMode,
    /// Tasks per meta-batch.
    pub n_tasks: usize,
    pub inner_steps: usize,
    pub inner_lr: f64,
    pub outer_lr: f64,
    pub meta_epochs: usize,
    pub support_nf: usize,
    pub support_nib: usize,
    pub query_nf: usize,
    pub query_nib: usize,
    /// Stop once the meta loss is at or below this.
    pub epsilon: f64,
    /// Draw one task batch up front and reuse it every epoch.
    pub fixed_task_pool: bool,
    pub gam: GamConfig,
    pub loss_mode: LossMode,
}

impl MetaConfig {
    pub fn new(family: IcFamily, arm: Arm) -> Self {
        MetaConfig {
            family,
            arm,
            outer_mode: OuterMode::FirstOrder,
            n_tasks: 5,
            inner_steps: 1,
            inner_lr: 0.005,
            outer_lr: 0.005,
            meta_epochs: 7000,
            support_nf: 20,
            support_nib: 10,
            query_nf: 20,
            query_nib: 10,
            epsilon: 1e-3,
            fixed_task_pool: false,
            gam: GamConfig::default(),
            loss_mode: LossMode::SmoothedResidual,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("tasks", self.n_tasks),
            ("inner steps", self.inner_steps),
            ("support collocation points", self.support_nf),
            ("support boundary points", self.support_nib),
            ("query collocation points", self.query_nf),
            ("query boundary points", self.query_nib),
        ];
        for (what, n) in counts {
            if n == 0 {
                return usage(format!("number of {what} must be at least 1"));
            }
        }
        // a zero inner rate is allowed: it collapses MAML to joint training
        if !(self.inner_lr >= 0.0 && self.inner_lr.is_finite()) {
            return usage("inner learning rate must be finite and non-negative");
        }
        if !(self.outer_lr > 0.0 && self.outer_lr.is_finite()) {
            return usage("outer learning rate must be positive");
        }
        if self.outer_mode == OuterMode::SecondOrder && self.inner_steps != 1 {
            return usage("second-order meta-gradients need exactly one inner step");
        }
        if self.arm == Arm::GamPinn && self.support_nib < 2 {
            return usage("the GAM arm needs at least 2 support boundary points");
        }
        Ok(())
    }
}

/// Loss components of one point set. `data` and `gam` are present only when
/// that term entered the total.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub pde: f64,
    pub data: Option<f64>,
    pub gam: Option<f64>,
    pub total: f64,
}

impl LossParts {
    pub fn is_valid(&self) -> bool {
        [Some(self.pde), self.data, self.gam, Some(self.total)]
            .into_iter()
            .flatten()
            .all(|v| v.is_finite() && v >= 0.0)
    }
}

/// Support and query losses of one task in one meta-epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskLosses {
    pub epoch: usize,
    pub task_index: usize,
    pub task: TaskSpec,
    pub support: LossParts,
    pub query: LossParts,
}

impl TaskLosses {
    pub fn support_loss(&self) -> f64 {
        self.support.total
    }

    pub fn query_loss(&self) -> f64 {
        self.query.total
    }
}
