use thiserror::Error;

use crate::design::DescentReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph is not connected")]
    Disconnected,
    #[error("weight on edge {edge} is not symmetric positive definite")]
    NonSpdWeight { edge: usize },
    #[error("time scale of node {node}, substate {substate} is not positive")]
    NonPositiveScale { node: usize, substate: usize },
    #[error("duplicate edge between nodes {0} and {1}")]
    DuplicateEdge(usize, usize),
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("random generator failed to produce a valid sample after {attempts} attempts")]
    GenerationFailed { attempts: usize },
    #[error("similarity transform is ill-conditioned (deviation {deviation:.3e})")]
    IllConditioned { deviation: f64 },
    #[error("state matrix is not Hurwitz (max real eigenvalue {max_real:.3e})")]
    NotHurwitz { max_real: f64 },
    #[error("Lyapunov solve failed: residual {residual:.3e} exceeds {bound:.3e}")]
    SolveFailed { residual: f64, bound: f64 },
    #[error("graph is not a tree")]
    NotATree,
    #[error("factor ordering violated for {which} (min eigenvalue {min_eig:.3e})")]
    OrderingViolated { which: &'static str, min_eig: f64 },
    #[error("matrix is not positive definite")]
    NonPd,
    #[error("cut-space gram R W R^T is numerically singular")]
    SingularCutGram,
    #[error("weight-box projection did not converge (feasibility gap {gap:.3e})")]
    ProjectionDiverged { gap: f64 },
    #[error("descent aborted at iteration {iteration}: {source}")]
    DescentAborted {
        iteration: usize,
        partial: Box<DescentReport>,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid simulation config: {0}")]
    ConfigInvalid(String),
    #[error("simulation state became non-finite at t = {time}")]
    NonFiniteState { time: f64 },
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures of the numerical routines, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IllConditioned { .. }
                | Error::NotHurwitz { .. }
                | Error::SolveFailed { .. }
                | Error::OrderingViolated { .. }
                | Error::SingularCutGram
                | Error::ProjectionDiverged { .. }
                | Error::DescentAborted { .. }
                | Error::NonFiniteState { .. }
                | Error::GenerationFailed { .. }
        )
    }
}
