//! Second-order (double-integrator) consensus on spanning-tree edge states.
//!
//! State `[x_τ; ẋ_τ]` with `A = [[0, I], [−M, −M]]`, `M = L_e𝐑𝐖𝐑ᵀ`, and
//! `L_e = 𝐃_τᵀ𝐄⁻¹𝐃_τ`. Under the special noise factors the gramian is block
//! diagonal with closed-form blocks.

use serde::{Deserialize, Serialize};

use crate::edge::{self, EdgeSpace};
use crate::error::{Error, Result};
use crate::graph::MatrixWeightedGraph;
use crate::h2::{self, NoiseModel};
use crate::linalg::{self, Mat};
use crate::lyapunov;
use crate::tol::Tolerances;

#[derive(Debug, Clone)]
pub struct DoubleIntegratorModel {
    pub a: Mat,
    pub b_omega: Mat,
    pub b_v: Mat,
    pub l_e: Mat,
}

impl DoubleIntegratorModel {
    /// Tree-edge dimension `k(n−1)`; the state has twice this.
    pub fn edge_dim(&self) -> usize {
        self.l_e.nrows()
    }
}

/// Gramian blocks of `X* = [[X1, X3], [X3ᵀ, X2]]` (position, velocity, cross).
#[derive(Debug, Clone)]
pub struct BlockGramian {
    pub x1: Mat,
    pub x2: Mat,
    pub x3: Mat,
    pub residual: f64,
}

impl BlockGramian {
    pub fn assemble(&self) -> Mat {
        let m = self.x1.nrows();
        let mut x = Mat::zeros(2 * m, 2 * m);
        x.view_mut((0, 0), (m, m)).copy_from(&self.x1);
        x.view_mut((m, m), (m, m)).copy_from(&self.x2);
        x.view_mut((0, m), (m, m)).copy_from(&self.x3);
        x.view_mut((m, 0), (m, m)).copy_from(&self.x3.transpose());
        x
    }

    pub fn split(x: &Mat, residual: f64) -> Self {
        let m = x.nrows() / 2;
        Self {
            x1: x.view((0, 0), (m, m)).into_owned(),
            x2: x.view((m, m), (m, m)).into_owned(),
            x3: x.view((0, m), (m, m)).into_owned(),
            residual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Position,
    Velocity,
    Aggregate,
}

fn stack_lower(top_rows: usize, lower: &Mat) -> Mat {
    let mut b = Mat::zeros(top_rows + lower.nrows(), lower.ncols());
    b.view_mut((top_rows, 0), lower.shape()).copy_from(lower);
    b
}

pub fn di_model(graph: &MatrixWeightedGraph, tol: &Tolerances) -> Result<DoubleIntegratorModel> {
    di_model_from(&EdgeSpace::new(graph), tol)
}

fn di_model_from(space: &EdgeSpace, tol: &Tolerances) -> Result<DoubleIntegratorModel> {
    let m = space.dim();
    let stiffness = &space.edge_laplacian * &space.cut_gram;
    let mut a = Mat::zeros(2 * m, 2 * m);
    a.view_mut((0, m), (m, m)).copy_from(&Mat::identity(m, m));
    a.view_mut((m, 0), (m, m)).copy_from(&-&stiffness);
    a.view_mut((m, m), (m, m)).copy_from(&-&stiffness);
    edge::ensure_hurwitz(&a, tol)?;
    Ok(DoubleIntegratorModel {
        a,
        b_omega: stack_lower(m, &space.d_tau_e_inv()),
        b_v: stack_lower(m, &-(&space.edge_laplacian * &space.r)),
        l_e: space.edge_laplacian.clone(),
    })
}

/// `BBᵀ` of the model under the given noise factors.
pub fn di_input_covariance(model: &DoubleIntegratorModel, omega: &Mat, gamma: &Mat) -> Mat {
    let bw = &model.b_omega * omega;
    let bv = &model.b_v * gamma;
    linalg::symmetrize(&(&bw * bw.transpose() + &bv * bv.transpose()))
}

/// Closed-form gramian, verified against the Lyapunov equation.
pub fn di_gramian(graph: &MatrixWeightedGraph, sigma_w: f64, sigma_v: f64, tol: &Tolerances) -> Result<BlockGramian> {
    let space = EdgeSpace::new(graph);
    let model = di_model_from(&space, tol)?;
    let cut_inv = space.cut_gram_inverse(tol)?;
    let le_inv = linalg::spd_inverse(&space.edge_laplacian)?;
    let (sw2, sv2) = (sigma_w * sigma_w, sigma_v * sigma_v);
    let x1 = linalg::symmetrize(&((&cut_inv * &le_inv * &cut_inv * sw2 + &cut_inv * sv2) * 0.5));
    let x2 = linalg::symmetrize(&((&cut_inv * sw2 + &space.edge_laplacian * sv2) * 0.5));
    let m = space.dim();
    let mut gram = BlockGramian { x1, x2, x3: Mat::zeros(m, m), residual: 0.0 };

    let (omega, gamma) = NoiseModel::Special { sigma_w, sigma_v }.factors(graph)?;
    let q = di_input_covariance(&model, &omega, &gamma);
    let x = gram.assemble();
    let residual = lyapunov::residual(&model.a, &x, &q);
    let bound = tol.lyapunov * (1.0 + x.norm());
    if !(residual <= bound) {
        return Err(Error::SolveFailed { residual, bound });
    }
    gram.residual = residual;
    Ok(gram)
}

/// Numerical gramian of the model for arbitrary noise factors.
pub fn di_gramian_solve(graph: &MatrixWeightedGraph, noise: &NoiseModel, tol: &Tolerances) -> Result<BlockGramian> {
    let model = di_model(graph, tol)?;
    let (omega, gamma) = noise.factors(graph)?;
    let q = di_input_covariance(&model, &omega, &gamma);
    let x = lyapunov::solve_lyapunov(&model.a, &q, tol)?;
    let residual = lyapunov::residual(&model.a, &x, &q);
    Ok(BlockGramian::split(&x, residual))
}

/// H₂ performance of positions, velocities, or both, from a gramian.
pub fn h2_from_gramian(graph: &MatrixWeightedGraph, gram: &BlockGramian, which: Which) -> f64 {
    let r = EdgeSpace::new(graph).r;
    let tr = |x: &Mat| (r.transpose() * x * &r).trace();
    match which {
        Which::Position => tr(&gram.x1),
        Which::Velocity => tr(&gram.x2),
        Which::Aggregate => tr(&(&gram.x1 + &gram.x2)),
    }
}

pub fn di_h2(graph: &MatrixWeightedGraph, sigma_w: f64, sigma_v: f64, which: Which, tol: &Tolerances) -> Result<f64> {
    let gram = di_gramian(graph, sigma_w, sigma_v, tol)?;
    Ok(h2_from_gramian(graph, &gram, which))
}

/// First-order closed form for comparison: velocity blocks coincide.
pub fn first_order_gramian(graph: &MatrixWeightedGraph, sigma_w: f64, sigma_v: f64, tol: &Tolerances) -> Result<Mat> {
    Ok(h2::h2_closed_form(graph, sigma_w, sigma_v, tol)?.x)
}
