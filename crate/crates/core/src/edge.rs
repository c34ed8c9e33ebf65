//! Edge coordinates: the similarity transform that splits off the consensus
//! subspace, and the reduced spanning-tree model.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::graph::{self, IncidenceDecomposition, MatrixWeightedGraph};
use crate::linalg::{self, Mat};
use crate::tol::Tolerances;

/// Matrices of the edge-space reduction that every analysis reuses.
#[derive(Debug, Clone)]
pub struct EdgeSpace {
    pub decomp: IncidenceDecomposition,
    /// `𝐑 = R ⊗ I_k`, columns in edge order.
    pub r: Mat,
    /// `𝐃_τ`.
    pub d_tau: Mat,
    /// `L_{e,s} = 𝐃_τᵀ𝐄⁻¹𝐃_τ`.
    pub edge_laplacian: Mat,
    /// `𝐑𝐖𝐑ᵀ`.
    pub cut_gram: Mat,
    /// Diagonal of `𝐄⁻¹`.
    pub e_inv: DVector<f64>,
}

impl EdgeSpace {
    pub fn new(graph: &MatrixWeightedGraph) -> Self {
        let decomp = graph::incidence(graph);
        let r = decomp.r_k();
        let d_tau = decomp.d_tau_k();
        let edge_laplacian = graph::scaled_edge_laplacian(graph, &decomp);
        let w = graph.weight_blocks().assemble();
        let cut_gram = linalg::symmetrize(&(&r * w * r.transpose()));
        let e_inv = graph.timescale_diagonal().map(|v| 1.0 / v);
        Self { decomp, r, d_tau, edge_laplacian, cut_gram, e_inv }
    }

    pub fn dim(&self) -> usize {
        self.edge_laplacian.nrows()
    }

    /// `(𝐑𝐖𝐑ᵀ)⁻¹`, refusing near-singular grams.
    pub fn cut_gram_inverse(&self, tol: &Tolerances) -> Result<Mat> {
        if linalg::sym_rcond(&self.cut_gram) < tol.cut_gram_rcond {
            return Err(Error::SingularCutGram);
        }
        linalg::spd_inverse(&self.cut_gram).map_err(|_| Error::SingularCutGram)
    }

    /// `𝐃_τᵀ𝐄⁻¹`.
    pub fn d_tau_e_inv(&self) -> Mat {
        let mut m = self.d_tau.transpose();
        for (mut col, s) in m.column_iter_mut().zip(self.e_inv.iter()) {
            col *= *s;
        }
        m
    }
}

/// `S_v`, its inverse, and the pieces they are built from.
#[derive(Debug, Clone)]
pub struct SimilarityPair {
    pub s_v: Mat,
    pub s_v_inv: Mat,
    /// Diagonal of `Ξ`: per-substate sums of time scales.
    pub xi: DVector<f64>,
    /// `F = [E_1 … E_n]`.
    pub f: Mat,
    /// `𝟙 = 1_n ⊗ I_k`.
    pub one: Mat,
}

impl SimilarityPair {
    /// `S_v⁻¹ S_v`, which should be the identity.
    pub fn product(&self) -> Mat {
        &self.s_v_inv * &self.s_v
    }
}

pub fn similarity_pair(graph: &MatrixWeightedGraph, space: &EdgeSpace, tol: &Tolerances) -> Result<SimilarityPair> {
    let (n, k) = (graph.n(), graph.k());
    let chol = nalgebra::Cholesky::new(space.edge_laplacian.clone()).ok_or(Error::IllConditioned { deviation: f64::INFINITY })?;
    // 𝐄⁻¹𝐃_τ L_{e,s}⁻¹ = (L_{e,s}⁻¹ 𝐃_τᵀ𝐄⁻¹)ᵀ
    let left = chol.solve(&space.d_tau_e_inv()).transpose();
    let one = linalg::kron_eye(&Mat::from_element(n, 1, 1.0), k);
    let mut s_v = Mat::zeros(n * k, n * k);
    s_v.view_mut((0, 0), (n * k, (n - 1) * k)).copy_from(&left);
    s_v.view_mut((0, (n - 1) * k), (n * k, k)).copy_from(&one);

    let eps = graph.timescale_diagonal();
    let f = Mat::from_fn(k, n * k, |r, c| if c % k == r { eps[c] } else { 0.0 });
    let xi = DVector::from_fn(k, |s, _| (0..n).map(|i| eps[i * k + s]).sum());
    let mut s_v_inv = Mat::zeros(n * k, n * k);
    s_v_inv.view_mut((0, 0), ((n - 1) * k, n * k)).copy_from(&space.d_tau.transpose());
    let xi_inv_f = Mat::from_fn(k, n * k, |r, c| f[(r, c)] / xi[r]);
    s_v_inv.view_mut(((n - 1) * k, 0), (k, n * k)).copy_from(&xi_inv_f);

    let pair = SimilarityPair { s_v, s_v_inv, xi, f, one };
    let deviation = (pair.product() - Mat::identity(n * k, n * k)).amax();
    if !(deviation <= tol.similarity) {
        return Err(Error::IllConditioned { deviation });
    }
    Ok(pair)
}

/// `𝐄⁻¹ L_w`.
pub fn scaled_laplacian(graph: &MatrixWeightedGraph) -> Mat {
    let e_inv = graph.timescale_diagonal().map(|v| 1.0 / v);
    Mat::from_diagonal(&e_inv) * graph::weighted_laplacian(graph)
}

/// `S_v⁻¹ 𝐄⁻¹L_w S_v`, which equals `blockdiag(L_{e,s}𝐑𝐖𝐑ᵀ, 0)`.
pub fn transformed_laplacian(graph: &MatrixWeightedGraph, tol: &Tolerances) -> Result<Mat> {
    let space = EdgeSpace::new(graph);
    let pair = similarity_pair(graph, &space, tol)?;
    Ok(&pair.s_v_inv * scaled_laplacian(graph) * &pair.s_v)
}

/// Reduced model on spanning-tree edge states:
/// `ẋ_τ = A x_τ + B_ω ω̂ + B_v v̂`, `z = C x_τ`.
#[derive(Debug, Clone)]
pub struct TreeModel {
    pub a: Mat,
    pub b_omega: Mat,
    pub b_v: Mat,
    pub c: Mat,
}

pub fn tree_model(graph: &MatrixWeightedGraph, tol: &Tolerances) -> Result<TreeModel> {
    let space = EdgeSpace::new(graph);
    tree_model_from(&space, tol)
}

pub fn tree_model_from(space: &EdgeSpace, tol: &Tolerances) -> Result<TreeModel> {
    let a = -(&space.edge_laplacian * &space.cut_gram);
    ensure_hurwitz(&a, tol)?;
    Ok(TreeModel {
        b_omega: space.d_tau_e_inv(),
        b_v: -(&space.edge_laplacian * &space.r),
        c: space.r.transpose(),
        a,
    })
}

pub fn ensure_hurwitz(a: &Mat, tol: &Tolerances) -> Result<()> {
    let max_real = linalg::max_real_eig(a);
    let margin = tol.hurwitz * linalg::spectral_norm(a);
    if max_real < -margin {
        Ok(())
    } else {
        Err(Error::NotHurwitz { max_real })
    }
}
