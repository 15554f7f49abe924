//! Physics-informed neural networks for parametric PDE families, with
//! MAML-style meta-learned initializations and a GAM-smoothed residual loss.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod error;
pub mod gam;
pub mod meta_trainer;
pub mod network;
pub mod oracle_solvers;
pub mod pde_tasks;

pub use error::{Error, Result};
