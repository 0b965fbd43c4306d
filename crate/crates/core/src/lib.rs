//! Constrained performance boosting for pre-stabilized nonlinear systems.
//!
//! A contractive recurrent operator is trained inside an internal-model
//! control loop. Convex state and input constraints are handled by scaled
//! ADMM over copies of the closed-loop trajectories; a control-barrier
//! penalty method is provided as a baseline.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod admm;
pub mod autodiff;
pub mod bench;
pub mod cli;
pub mod constraints;
pub mod error;
pub mod io;
pub mod losses;
pub mod objective;
pub mod optim;
pub mod plant;
pub mod selftest;
pub mod stable_ops;

pub use error::{Error, Result};

/// Crate version embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
