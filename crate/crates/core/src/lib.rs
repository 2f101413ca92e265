//! Gradient methods for rectangular matrix factorization and two-layer
//! linear networks started from unbalanced, sketch-based initializations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod init;
pub mod linalg;
pub mod lnn;
pub mod optim;

pub use init::{FactorizationProblem, InitConfig, InitOutcome, InitScheme};
pub use linalg::DenseMatrix;
pub use lnn::LinearNetworkProblem;
pub use optim::{HyperParams, IterateState, Method, Objective};
