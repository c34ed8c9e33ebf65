//! Matrix-weighted consensus networks: graph model, edge-state transforms,
//! H₂ performance, design by projected descent, double-integrator analysis,
//! and a stochastic flocking simulator.

// `!(x <= bound)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod design;
pub mod double_integrator;
pub mod edge;
pub mod error;
pub mod flocking;
pub mod graph;
pub mod h2;
pub mod io;
pub mod linalg;
pub mod lyapunov;
pub mod tol;

pub use error::{Error, Result};
pub use graph::MatrixWeightedGraph;
pub use linalg::Mat;
pub use tol::Tolerances;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
