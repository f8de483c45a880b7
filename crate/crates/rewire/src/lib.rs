//! Training toolkit for networks that stay sparse at every moment of
//! training: rewiring optimizers that maintain a hard connection budget, a
//! soft-constrained variant, dense/shrinkage/pruning baselines, and a
//! verification bench for the stationary-distribution theory behind the
//! rewiring rules.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod math;
pub mod metrics;
pub mod mlp;
pub mod num;
pub mod optim;
pub mod rng;
pub mod store;
pub mod theory;

pub use error::{Error, Result};

/// Default scalar precision for experiments and the CLI.
pub type Real = f64;

pub type RealMatrix = math::Matrix<Real>;
pub type RealStore = store::ConnectionStore<Real>;
pub type RealSoftStore = store::SoftStore<Real>;
pub type RealDenseNet = store::DenseNet<Real>;
