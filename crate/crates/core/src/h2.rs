//! H₂ performance of the reduced tree model.
//!
//! The performance is `tr(𝐑ᵀX𝐑)` where `X` solves
//! `A X + X Aᵀ + B_ω ΩΩᵀ B_ωᵀ + B_v ΓΓᵀ B_vᵀ = 0`. With the special noise
//! factors `Ω = σ_w𝐄^{1/2}`, `Γ = σ_v𝐖^{1/2}` the gramian is available in
//! closed form and separates the weight and time-scale contributions.

use serde::{Deserialize, Serialize};

use crate::edge::{self, EdgeSpace};
use crate::error::{Error, Result};
use crate::graph::MatrixWeightedGraph;
use crate::linalg::{self, Mat};
use crate::lyapunov;
use crate::tol::Tolerances;

/// Noise factors driving the consensus model.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    /// Process factor `Ω` (kn × kn) and measurement factor `Γ` (k|E| × k|E|).
    General { omega: Mat, gamma: Mat },
    Special { sigma_w: f64, sigma_v: f64 },
}

impl NoiseModel {
    /// Explicit `(Ω, Γ)`; the special pair expands to `(σ_w𝐄^{1/2}, σ_v𝐖^{1/2})`.
    pub fn factors(&self, graph: &MatrixWeightedGraph) -> Result<(Mat, Mat)> {
        match self {
            NoiseModel::General { omega, gamma } => {
                let (nk, ek) = (graph.n() * graph.k(), graph.edge_count() * graph.k());
                if omega.shape() != (nk, nk) || gamma.shape() != (ek, ek) {
                    return Err(Error::Dimension(format!(
                        "noise factors {:?} / {:?}, expected ({nk}, {nk}) / ({ek}, {ek})",
                        omega.shape(),
                        gamma.shape()
                    )));
                }
                Ok((omega.clone(), gamma.clone()))
            }
            NoiseModel::Special { sigma_w, sigma_v } => {
                check_sigmas(*sigma_w, *sigma_v)?;
                let e_half = graph.timescale_diagonal().map(f64::sqrt);
                let w_half = graph.weight_blocks().sqrt().assemble();
                Ok((Mat::from_diagonal(&e_half) * *sigma_w, w_half * *sigma_v))
            }
        }
    }
}

fn check_sigmas(sigma_w: f64, sigma_v: f64) -> Result<()> {
    if sigma_w >= 0.0 && sigma_v >= 0.0 && sigma_w.is_finite() && sigma_v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("noise levels must be nonnegative, got {sigma_w}, {sigma_v}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramianResult {
    pub x: Mat,
    pub h2: f64,
    pub residual: f64,
}

/// Multiplicative factors bracketing true noise factors between scaled
/// copies of `𝐄^{1/2}` and `𝐖^{1/2}`, with the unit-noise worst-case gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorBounds {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Upper,
    Lower,
}

/// Input covariance `B_ω ΩΩᵀ B_ωᵀ + B_v ΓΓᵀ B_vᵀ` of the tree model.
pub fn input_covariance(space: &EdgeSpace, omega: &Mat, gamma: &Mat) -> Mat {
    let bw = space.d_tau_e_inv() * omega;
    let bv = -(&space.edge_laplacian * &space.r) * gamma;
    linalg::symmetrize(&(&bw * bw.transpose() + &bv * bv.transpose()))
}

fn performance(space: &EdgeSpace, x: &Mat) -> f64 {
    (space.r.transpose() * x * &space.r).trace()
}

pub fn h2_general(graph: &MatrixWeightedGraph, noise: &NoiseModel, tol: &Tolerances) -> Result<GramianResult> {
    let (omega, gamma) = noise.factors(graph)?;
    let space = EdgeSpace::new(graph);
    let model = edge::tree_model_from(&space, tol)?;
    let q = input_covariance(&space, &omega, &gamma);
    let x = lyapunov::solve_lyapunov(&model.a, &q, tol)?;
    let residual = lyapunov::residual(&model.a, &x, &q);
    Ok(GramianResult { h2: performance(&space, &x), residual, x })
}

/// `X* = ½(σ_w²(𝐑𝐖𝐑ᵀ)⁻¹ + σ_v²L_{e,s})`, checked against the Lyapunov equation.
pub fn h2_closed_form(graph: &MatrixWeightedGraph, sigma_w: f64, sigma_v: f64, tol: &Tolerances) -> Result<GramianResult> {
    check_sigmas(sigma_w, sigma_v)?;
    let space = EdgeSpace::new(graph);
    let cut_inv = space.cut_gram_inverse(tol)?;
    let x = (cut_inv * sigma_w.powi(2) + &space.edge_laplacian * sigma_v.powi(2)) * 0.5;

    let (omega, gamma) = NoiseModel::Special { sigma_w, sigma_v }.factors(graph)?;
    let a = -(&space.edge_laplacian * &space.cut_gram);
    let q = input_covariance(&space, &omega, &gamma);
    let residual = lyapunov::residual(&a, &x, &q);
    let bound = tol.lyapunov * (1.0 + x.norm());
    if !(residual <= bound) {
        return Err(Error::SolveFailed { residual, bound });
    }
    Ok(GramianResult { h2: performance(&space, &x), residual, x })
}

/// Closed-form tree performance from edge weights and node degrees.
pub fn h2_tree_formula(graph: &MatrixWeightedGraph, sigma_w: f64, sigma_v: f64) -> Result<f64> {
    if !graph.is_tree() {
        return Err(Error::NotATree);
    }
    let weight_term: f64 = graph
        .weights()
        .iter()
        .map(|w| linalg::spd_inverse(w).map(|inv| inv.trace()))
        .sum::<Result<f64>>()?;
    let degrees = graph.degrees();
    let scale_term: f64 = graph
        .timescales()
        .iter()
        .zip(&degrees)
        .map(|(row, &deg)| row.iter().map(|eps| deg as f64 / eps).sum::<f64>())
        .sum();
    Ok(0.5 * (sigma_w.powi(2) * weight_term + sigma_v.powi(2) * scale_term))
}

/// Smallest `α` with `M ⪯ αP` (upper) or largest with `αP ⪯ M` (lower).
pub fn tight_factor(m: &Mat, p: &Mat, direction: Direction) -> Result<f64> {
    if m.shape() != p.shape() {
        return Err(Error::Dimension(format!("M is {:?}, P is {:?}", m.shape(), p.shape())));
    }
    if !linalg::is_spd(p) {
        return Err(Error::NonPd);
    }
    let p_inv_half = linalg::sym_fn(p, |v| 1.0 / v.sqrt());
    let congruent = &p_inv_half * m * &p_inv_half;
    let ev = linalg::sym_eigenvalues(&congruent);
    Ok(match direction {
        Direction::Upper => ev[ev.len() - 1],
        Direction::Lower => ev[0],
    })
}

fn square_roots(graph: &MatrixWeightedGraph) -> (Mat, Mat) {
    let e_half = Mat::from_diagonal(&graph.timescale_diagonal().map(f64::sqrt));
    let w_half = graph.weight_blocks().sqrt().assemble();
    (e_half, w_half)
}

fn check_true_factors(graph: &MatrixWeightedGraph, omega_t: &Mat, gamma_t: &Mat) -> Result<()> {
    NoiseModel::General { omega: omega_t.clone(), gamma: gamma_t.clone() }.factors(graph)?;
    for (name, m) in [("Omega_T", omega_t), ("Gamma_T", gamma_t)] {
        if linalg::asymmetry(m) > 1e-12 * m.amax().max(1.0) || linalg::min_eig(m) < -1e-12 * m.amax().max(1.0) {
            return Err(Error::InvalidArgument(format!("{name} must be symmetric PSD")));
        }
    }
    Ok(())
}

fn verify_ordering(which: &'static str, lo: &Mat, mid: &Mat, hi: &Mat, tol: &Tolerances) -> Result<()> {
    let scale = tol.ordering * (1.0 + hi.amax());
    for diff in [mid - lo, hi - mid] {
        let min_eig = linalg::min_eig(&diff);
        if min_eig < -scale {
            return Err(Error::OrderingViolated { which, min_eig });
        }
    }
    Ok(())
}

/// Spectral-bound factors, usable when only the extreme eigenvalues of the
/// true factors are known. `ᾱ` divides by `ε_min^{1/2}` and `α̲` by
/// `ε_max^{1/2}` (likewise for `β` with the weight spectrum); the opposite
/// pairing does not certify the orderings. Both the factor and covariance
/// orderings are checked before returning.
pub fn sufficient_factors(omega_t: &Mat, gamma_t: &Mat, graph: &MatrixWeightedGraph, tol: &Tolerances) -> Result<FactorBounds> {
    check_true_factors(graph, omega_t, gamma_t)?;
    let eps = graph.timescale_diagonal();
    let (eps_min, eps_max) = (eps.min(), eps.max());
    let (w_min, w_max) = graph.weight_blocks().eig_range();
    let om = linalg::sym_eigenvalues(omega_t);
    let ga = linalg::sym_eigenvalues(gamma_t);
    let (om_lo, om_hi) = (om[0].max(0.0), om[om.len() - 1]);
    let (ga_lo, ga_hi) = (ga[0].max(0.0), ga[ga.len() - 1]);

    let alpha_hi = om_hi / eps_min.sqrt();
    let alpha_lo = om_lo / eps_max.sqrt();
    let beta_hi = ga_hi / w_min.sqrt();
    let beta_lo = ga_lo / w_max.sqrt();

    let (e_half, w_half) = square_roots(graph);
    verify_ordering("alpha", &(&e_half * alpha_lo), omega_t, &(&e_half * alpha_hi), tol)?;
    verify_ordering("beta", &(&w_half * beta_lo), gamma_t, &(&w_half * beta_hi), tol)?;
    let (e, w) = (&e_half * &e_half, &w_half * &w_half);
    let (om2, ga2) = (omega_t * omega_t.transpose(), gamma_t * gamma_t.transpose());
    verify_ordering("alpha covariance", &(&e * alpha_lo.powi(2)), &om2, &(&e * alpha_hi.powi(2)), tol)?;
    verify_ordering("beta covariance", &(&w * beta_lo.powi(2)), &ga2, &(&w * beta_hi.powi(2)), tol)?;
    let mut bounds = FactorBounds { alpha_lo, alpha_hi, beta_lo, beta_hi, gap: 0.0 };
    bounds.gap = performance_gap(&bounds, graph, 1.0, 1.0, tol)?;
    Ok(bounds)
}

/// Tightest factors, from the full true factors.
///
/// The bracket needs the covariances ordered, `α̲²𝐄 ⪯ Ω_TΩ_Tᵀ ⪯ ᾱ²𝐄`; ordering
/// the factors alone does not imply it for non-commuting matrices. So the
/// factors come from [`tight_factor`] applied to `(Ω_TΩ_Tᵀ, 𝐄)` and
/// `(Γ_TΓ_Tᵀ, 𝐖)`.
pub fn tight_factors(omega_t: &Mat, gamma_t: &Mat, graph: &MatrixWeightedGraph, tol: &Tolerances) -> Result<FactorBounds> {
    check_true_factors(graph, omega_t, gamma_t)?;
    let e = Mat::from_diagonal(&graph.timescale_diagonal());
    let w = graph.weight_blocks().assemble();
    let om = linalg::symmetrize(&(omega_t * omega_t.transpose()));
    let ga = linalg::symmetrize(&(gamma_t * gamma_t.transpose()));
    let root = |v: f64| v.max(0.0).sqrt();
    let mut bounds = FactorBounds {
        alpha_lo: root(tight_factor(&om, &e, Direction::Lower)?),
        alpha_hi: root(tight_factor(&om, &e, Direction::Upper)?),
        beta_lo: root(tight_factor(&ga, &w, Direction::Lower)?),
        beta_hi: root(tight_factor(&ga, &w, Direction::Upper)?),
        gap: 0.0,
    };
    bounds.gap = performance_gap(&bounds, graph, 1.0, 1.0, tol)?;
    Ok(bounds)
}

/// Worst-case H₂ spread between the bounding models
/// `(ᾱσ_w𝐄^{1/2}, β̄σ_v𝐖^{1/2})` and `(α̲σ_w𝐄^{1/2}, β̲σ_v𝐖^{1/2})`.
///
/// The closed-form gramian is quadratic in the factor scale, so the spread is
/// `½(ᾱ²−α̲²)σ_w² tr(𝐑ᵀ(𝐑𝐖𝐑ᵀ)⁻¹𝐑) + ½(β̄²−β̲²)σ_v² tr(𝐑ᵀL_{e,s}𝐑)`.
pub fn performance_gap(bounds: &FactorBounds, graph: &MatrixWeightedGraph, sigma_w: f64, sigma_v: f64, tol: &Tolerances) -> Result<f64> {
    let space = EdgeSpace::new(graph);
    let cut_inv = space.cut_gram_inverse(tol)?;
    let weight_trace = performance(&space, &cut_inv);
    let scale_trace = performance(&space, &space.edge_laplacian);
    let da = bounds.alpha_hi.powi(2) - bounds.alpha_lo.powi(2);
    let db = bounds.beta_hi.powi(2) - bounds.beta_lo.powi(2);
    Ok(0.5 * da * sigma_w.powi(2) * weight_trace + 0.5 * db * sigma_v.powi(2) * scale_trace)
}
