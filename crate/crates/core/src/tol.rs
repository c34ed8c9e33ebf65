//! Numerical tolerances shared by the library, the tests and the CLI.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Max deviation of `S_v^{-1} S_v` from the identity before the
    /// transform is declared ill-conditioned.
    pub similarity: f64,
    /// Relative Lyapunov residual bound: `‖AX + XAᵀ + Q‖ ≤ lyapunov·(1+‖X‖)`.
    pub lyapunov: f64,
    /// Hurwitz margin relative to `‖A‖`.
    pub hurwitz: f64,
    /// Dykstra fixed-point tolerance.
    pub projection_step: f64,
    pub projection_sweeps: usize,
    /// Allowed violation of the box orderings after projection.
    pub projection_feasibility: f64,
    /// Relative cost change that stops the weight descent.
    pub descent: f64,
    pub descent_max_iter: usize,
    /// Reciprocal condition threshold for `R W Rᵀ`.
    pub cut_gram_rcond: f64,
    /// Eigenvalue slack for ordering certificates.
    pub ordering: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            similarity: 1e-8,
            lyapunov: 1e-8,
            hurwitz: 1e-12,
            projection_step: 1e-10,
            projection_sweeps: 500,
            projection_feasibility: 1e-9,
            descent: 1e-8,
            descent_max_iter: 200,
            cut_gram_rcond: 1e-14,
            ordering: 1e-10,
        }
    }
}
