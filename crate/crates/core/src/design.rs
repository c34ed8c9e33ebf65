//! Edge-weight and time-scale design against the separated closed-form H₂.
//!
//! Weights follow a projected gradient scheme on
//! `tr(𝐑ᵀ(𝐑𝐖𝐑ᵀ)⁻¹𝐑) + (h/2)Σ_e tr(W_eᵀW_e)` over the matrix interval
//! `W_min ⪯ W_e ⪯ W_max`. Time scales have a per-node analytic optimum that
//! only needs the node's own degree.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::edge::EdgeSpace;
use crate::error::{Error, Result};
use crate::graph::{self, MatrixWeightedGraph};
use crate::linalg::{self, Mat};
use crate::tol::Tolerances;

const BOX_ATTEMPTS: usize = 1000;

/// Matrix interval `W_min ⪯ W ⪯ W_max` shared by every edge.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightBox {
    w_min: Mat,
    w_max: Mat,
}

impl WeightBox {
    pub fn new(w_min: Mat, w_max: Mat) -> Result<Self> {
        if w_min.shape() != w_max.shape() || !w_min.is_square() {
            return Err(Error::Dimension("weight box bounds must be square and equally sized".into()));
        }
        if !linalg::is_spd(&w_min) || !linalg::is_spd(&w_max) {
            return Err(Error::InvalidArgument("weight box bounds must be SPD".into()));
        }
        if linalg::min_eig(&(&w_max - &w_min)) < 0.0 {
            return Err(Error::InvalidArgument("W_max - W_min is not PSD".into()));
        }
        Ok(Self { w_min: linalg::symmetrize(&w_min), w_max: linalg::symmetrize(&w_max) })
    }

    /// Both bounds drawn from the weight generator with scales `alpha_lo`,
    /// `alpha_hi`, redrawn until ordered.
    pub fn random<R: Rng + ?Sized>(alpha_lo: f64, alpha_hi: f64, k: usize, rng: &mut R) -> Result<Self> {
        for _ in 0..BOX_ATTEMPTS {
            let lo = graph::random_spd_weight(alpha_lo, k, rng)?;
            let hi = graph::random_spd_weight(alpha_hi, k, rng)?;
            if let Ok(b) = Self::new(lo, hi) {
                return Ok(b);
            }
        }
        Err(Error::GenerationFailed { attempts: BOX_ATTEMPTS })
    }

    pub fn w_min(&self) -> &Mat {
        &self.w_min
    }

    pub fn w_max(&self) -> &Mat {
        &self.w_max
    }

    pub fn k(&self) -> usize {
        self.w_min.nrows()
    }

    /// Smallest eigenvalue of `W - W_min` and of `W_max - W`.
    pub fn margins(&self, w: &Mat) -> (f64, f64) {
        (linalg::min_eig(&(w - &self.w_min)), linalg::min_eig(&(&self.w_max - w)))
    }

    pub fn contains(&self, w: &Mat, slack: f64) -> bool {
        let (lo, hi) = self.margins(w);
        lo >= -slack && hi >= -slack
    }

    /// True when `w` touches either face of the interval.
    pub fn is_saturated(&self, w: &Mat, tol: &Tolerances) -> bool {
        let slack = tol.projection_feasibility * (1.0 + self.w_max.amax());
        let (lo, hi) = self.margins(w);
        lo <= slack || hi <= slack
    }
}

/// Box `[eps_min, eps_max]` on time scales with penalty `(h/2)Σ ε^r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimescaleBox {
    pub eps_min: f64,
    pub eps_max: f64,
    pub h: f64,
    pub r: u32,
}

impl TimescaleBox {
    pub fn new(eps_min: f64, eps_max: f64, h: f64, r: u32) -> Result<Self> {
        let b = Self { eps_min, eps_max, h, r };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_min > 0.0 && self.eps_min <= self.eps_max && self.eps_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("time scale box [{}, {}]", self.eps_min, self.eps_max)));
        }
        if !(self.h > 0.0) || self.r == 0 {
            return Err(Error::InvalidArgument(format!("penalty h = {}, r = {}", self.h, self.r)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentReport {
    /// `iterates[0]` holds the starting weights.
    pub iterates: Vec<Vec<Mat>>,
    pub costs: Vec<f64>,
    /// Per iterate: whether any edge weight sits on a face of the box.
    pub saturated: Vec<bool>,
    pub converged: bool,
    pub iterations: usize,
}

impl DescentReport {
    pub fn final_weights(&self) -> &[Mat] {
        self.iterates.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

fn p1_parts(graph: &MatrixWeightedGraph, tol: &Tolerances) -> Result<(f64, Mat)> {
    let space = EdgeSpace::new(graph);
    let cut_inv = space.cut_gram_inverse(tol)?;
    let q = linalg::symmetrize(&(space.r.transpose() * cut_inv * &space.r));
    Ok((q.trace(), q))
}

fn penalty(weights: &[Mat], h: f64) -> f64 {
    0.5 * h * weights.iter().map(|w| (w.transpose() * w).trace()).sum::<f64>()
}

pub fn p1_cost(graph: &MatrixWeightedGraph, h: f64, tol: &Tolerances) -> Result<f64> {
    let (trace, _) = p1_parts(graph, tol)?;
    Ok(trace + penalty(graph.weights(), h))
}

/// `−deblk_e[QᵀQ] + hW_e` for every edge, `Q = 𝐑ᵀ(𝐑𝐖𝐑ᵀ)⁻¹𝐑`.
pub fn p1_gradients(graph: &MatrixWeightedGraph, h: f64, tol: &Tolerances) -> Result<Vec<Mat>> {
    let (_, q) = p1_parts(graph, tol)?;
    let qq = q.transpose() * &q;
    let k = graph.k();
    Ok(graph
        .weights()
        .iter()
        .enumerate()
        .map(|(e, w)| linalg::symmetrize(&(w * h - linalg::diag_block(&qq, e, k))))
        .collect())
}

pub fn p1_gradient(graph: &MatrixWeightedGraph, edge: usize, h: f64, tol: &Tolerances) -> Result<Mat> {
    if edge >= graph.edge_count() {
        return Err(Error::InvalidArgument(format!("edge {edge} out of range")));
    }
    Ok(p1_gradients(graph, h, tol)?.swap_remove(edge))
}

fn clip_psd(m: &Mat) -> Mat {
    linalg::sym_fn(m, |v| v.max(0.0))
}

/// Nearest point (Frobenius) of the matrix interval, by Dykstra's alternating
/// projections onto `{X ⪰ W_min}` and `{X ⪯ W_max}`.
pub fn project_weight_box(w: &Mat, bounds: &WeightBox, tol: &Tolerances) -> Result<Mat> {
    if w.shape() != bounds.w_min.shape() {
        return Err(Error::Dimension(format!("weight {:?} vs box {:?}", w.shape(), bounds.w_min.shape())));
    }
    let w = linalg::symmetrize(w);
    let slack = tol.projection_feasibility * (1.0 + bounds.w_max.amax());
    if bounds.contains(&w, 0.0) {
        return Ok(w);
    }
    let project_lo = |x: &Mat| &bounds.w_min + clip_psd(&(x - &bounds.w_min));
    let project_hi = |x: &Mat| &bounds.w_max - clip_psd(&(&bounds.w_max - x));

    let k = w.nrows();
    let mut x = w;
    let mut p = Mat::zeros(k, k);
    let mut q = Mat::zeros(k, k);
    let mut gap = f64::INFINITY;
    for _ in 0..tol.projection_sweeps {
        let y = project_lo(&(&x + &p));
        p = &x + &p - &y;
        let x_next = project_hi(&(&y + &q));
        q = &y + &q - &x_next;
        let step = (&x_next - &x).norm();
        x = x_next;
        let (lo, hi) = bounds.margins(&x);
        gap = (-lo).max(-hi).max(0.0);
        if step <= tol.projection_step * (1.0 + x.norm()) && gap <= slack {
            return Ok(linalg::symmetrize(&x));
        }
    }
    if gap <= slack {
        return Ok(linalg::symmetrize(&x));
    }
    // Dykstra is only linearly convergent. Blend toward the centre, whose margins
    // are both `δ/2`; concavity of λ_min makes weight `gap/(gap + δ/2)` feasible.
    let half_width = 0.5 * linalg::min_eig(&(&bounds.w_max - &bounds.w_min));
    if !(half_width > 0.0 && gap.is_finite()) {
        return Err(Error::ProjectionDiverged { gap });
    }
    let centre = (&bounds.w_min + &bounds.w_max) * 0.5;
    let t = (gap / (gap + half_width) * (1.0 + 1e-6)).min(1.0);
    let x = linalg::symmetrize(&(&x * (1.0 - t) + centre * t));
    let (lo, hi) = bounds.margins(&x);
    let gap = (-lo).max(-hi).max(0.0);
    if gap <= slack {
        Ok(x)
    } else {
        Err(Error::ProjectionDiverged { gap })
    }
}

/// Projected gradient descent with step `1/(h√t)`, `t = 1, 2, …`.
pub fn optimize_weights(graph: &MatrixWeightedGraph, bounds: &WeightBox, h: f64, max_iter: usize, tol: &Tolerances) -> Result<DescentReport> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("penalty h must be positive, got {h}")));
    }
    if bounds.k() != graph.k() {
        return Err(Error::Dimension(format!("box is {}x{}, graph has k = {}", bounds.k(), bounds.k(), graph.k())));
    }
    let mut current = graph.clone();
    let mut report = DescentReport {
        iterates: vec![graph.weights().to_vec()],
        costs: vec![p1_cost(graph, h, tol)?],
        saturated: vec![graph.weights().iter().any(|w| bounds.is_saturated(w, tol))],
        converged: false,
        iterations: 0,
    };
    for t in 1..=max_iter {
        let step = 1.0 / (h * (t as f64).sqrt());
        let abort = |report: &DescentReport, source: Error| Error::DescentAborted {
            iteration: t,
            partial: Box::new(report.clone()),
            source: Box::new(source),
        };
        let grads = p1_gradients(&current, h, tol).map_err(|e| abort(&report, e))?;
        let next: Vec<Mat> = current
            .weights()
            .iter()
            .zip(&grads)
            .map(|(w, g)| project_weight_box(&(w - g * step), bounds, tol))
            .collect::<Result<_>>()
            .map_err(|e| abort(&report, e))?;
        current = current.with_weights(next.clone()).map_err(|e| abort(&report, e))?;
        let cost = p1_cost(&current, h, tol).map_err(|e| abort(&report, e))?;
        let prev = report.costs[report.costs.len() - 1];
        report.saturated.push(next.iter().any(|w| bounds.is_saturated(w, tol)));
        report.iterates.push(next);
        report.costs.push(cost);
        report.iterations = t;
        if (cost - prev).abs() <= tol.descent * prev.abs().max(f64::MIN_POSITIVE) {
            report.converged = true;
            break;
        }
    }
    Ok(report)
}

/// Unconstrained optimum `(deg/(h r))^{1/(r+1)}` projected onto the box.
/// Returns the value and whether the box was active.
pub fn timescale_target(degree: usize, tsbox: &TimescaleBox) -> (f64, bool) {
    let raw = (degree as f64 / (tsbox.h * tsbox.r as f64)).powf(1.0 / (tsbox.r as f64 + 1.0));
    let clamped = raw.clamp(tsbox.eps_min, tsbox.eps_max);
    (clamped, clamped != raw)
}

/// Optimal time scales, identical across the substates of each node.
pub fn assign_timescales(graph: &MatrixWeightedGraph, tsbox: &TimescaleBox) -> Result<Vec<Vec<f64>>> {
    tsbox.validate()?;
    Ok(graph
        .degrees()
        .into_iter()
        .map(|deg| vec![timescale_target(deg, tsbox).0; graph.k()])
        .collect())
}

/// `½ tr(𝐑ᵀL_{e,s}𝐑) + (h/2) Σ ε^r`. The trace is evaluated both as written
/// and as `Σ_i Σ_j deg(ν_i)/ε_{i,j}`; the two must agree.
pub fn p2_cost(graph: &MatrixWeightedGraph, tsbox: &TimescaleBox) -> f64 {
    let space = EdgeSpace::new(graph);
    let trace = (space.r.transpose() * &space.edge_laplacian * &space.r).trace();
    let degree_form: f64 = graph
        .timescales()
        .iter()
        .zip(graph.degrees())
        .map(|(row, deg)| row.iter().map(|e| deg as f64 / e).sum::<f64>())
        .sum();
    assert!(
        (trace - degree_form).abs() <= 1e-10 * (1.0 + degree_form.abs()),
        "trace forms disagree: {trace} vs {degree_form}"
    );
    let reg: f64 = graph.timescales().iter().flatten().map(|e| e.powi(tsbox.r as i32)).sum();
    0.5 * degree_form + 0.5 * tsbox.h * reg
}
