//! Stochastic simulation of the second-order formation protocol
//!
//! `E ẍ = −L_w(x − d) − L_w ẋ + ω − 𝐃 v`
//!
//! integrated by Euler–Maruyama. Noise is only injected inside the gust
//! window, with factors `σ_w I` on node accelerations and `σ_v 𝐖^{1/2}` on the
//! relative-measurement channels. Scenarios apply design updates at gust
//! onset: none (NUD), weights (WUD), time scales (TUD), or both (BUD).

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{self, TimescaleBox, WeightBox};
use crate::error::{Error, Result};
use crate::graph::{self, MatrixWeightedGraph};
use crate::linalg::{self, Mat};
use crate::tol::Tolerances;

type Vector = DVector<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Scenario {
    Nud,
    Wud,
    Tud,
    Bud,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::Nud, Scenario::Wud, Scenario::Tud, Scenario::Bud];

    pub fn updates_weights(self) -> bool {
        matches!(self, Scenario::Wud | Scenario::Bud)
    }

    pub fn updates_timescales(self) -> bool {
        matches!(self, Scenario::Tud | Scenario::Bud)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Nud => "NUD",
            Scenario::Wud => "WUD",
            Scenario::Tud => "TUD",
            Scenario::Bud => "BUD",
        })
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "NUD" => Ok(Scenario::Nud),
            "WUD" => Ok(Scenario::Wud),
            "TUD" => Ok(Scenario::Tud),
            "BUD" => Ok(Scenario::Bud),
            other => Err(Error::Parse(format!("unknown scenario {other}"))),
        }
    }
}

/// Parameters for the updates applied at gust onset.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignParams {
    pub h: f64,
    pub weight_box: WeightBox,
    pub max_iter: usize,
    pub timescale_box: TimescaleBox,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Positions at the formation offsets relative to node 0, at rest.
    Formation,
    Given { positions: Vec<Vec<f64>>, velocities: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub gust_window: [f64; 2],
    pub sigma_w: f64,
    pub sigma_v: f64,
    pub scenario: Scenario,
    pub seed: u64,
    pub replicate: u64,
    /// Offset `d_i` per node, `k` entries each.
    pub formation: Vec<Vec<f64>>,
    pub initial: InitialState,
    pub design: Option<DesignParams>,
    /// Keep every `record_every`-th step in the trace (the last step is always kept).
    pub record_every: usize,
}

impl SimConfig {
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    fn step_of(&self, t: f64) -> usize {
        (t / self.dt).round() as usize
    }

    pub fn validate(&self, graph: &MatrixWeightedGraph) -> Result<()> {
        let [on, off] = self.gust_window;
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt = {}", self.dt));
        }
        if !(0.0 <= on && on < off && off <= self.t_end && self.t_end.is_finite()) {
            return bad(format!("gust window [{on}, {off}] must satisfy 0 <= t_on < t_off <= t_end = {}", self.t_end));
        }
        if !(self.sigma_w >= 0.0 && self.sigma_v >= 0.0) {
            return bad("noise levels must be nonnegative".into());
        }
        if self.formation.len() != graph.n() || self.formation.iter().any(|d| d.len() != graph.k()) {
            return bad(format!("formation must have {} offsets of dimension {}", graph.n(), graph.k()));
        }
        if let InitialState::Given { positions, velocities } = &self.initial {
            for s in [positions, velocities] {
                if s.len() != graph.n() || s.iter().any(|d| d.len() != graph.k()) {
                    return bad("initial state has wrong dimensions".into());
                }
            }
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        if self.scenario != Scenario::Nud && self.design.is_none() {
            return bad(format!("scenario {} needs design parameters", self.scenario));
        }
        if let Some(d) = &self.design {
            if d.weight_box.k() != graph.k() {
                return bad("weight box dimension differs from k".into());
            }
            d.timescale_box.validate().map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        }
        Ok(())
    }
}

/// Sampled trajectories. Edge states are `𝐃ᵀx` at each sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub times: Vec<f64>,
    pub positions: Vec<Vector>,
    pub velocities: Vec<Vector>,
    pub edges: Vec<Vector>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Full-resolution statistics of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub scenario: Scenario,
    pub seed: u64,
    pub replicate: u64,
    /// Mean over `t ∈ [t_on, t_end]` and over all edge channels of
    /// `[x_e(t) − x_e(t_f)]²`.
    pub mean_variance: f64,
    /// Same average restricted to the gust window.
    pub gust_variance: f64,
}

/// Weights and time scales switched in at gust onset.
#[derive(Debug, Clone, Default)]
pub struct UpdatePlan {
    pub weights: Option<Vec<Mat>>,
    pub timescales: Option<Vec<Vec<f64>>>,
}

pub fn plan_updates(graph: &MatrixWeightedGraph, scenario: Scenario, design: Option<&DesignParams>, tol: &Tolerances) -> Result<UpdatePlan> {
    let mut plan = UpdatePlan::default();
    let Some(design) = design else {
        return Ok(plan);
    };
    if scenario.updates_timescales() {
        plan.timescales = Some(design::assign_timescales(graph, &design.timescale_box)?);
    }
    if scenario.updates_weights() {
        let report = design::optimize_weights(graph, &design.weight_box, design.h, design.max_iter, tol)?;
        plan.weights = Some(report.final_weights().to_vec());
    }
    Ok(plan)
}

/// Per-run matrices that change when the graph is updated.
struct Dynamics {
    laplacian: Mat,
    e_inv: Vector,
    /// `𝐄⁻¹𝐃 σ_v 𝐖^{1/2}`
    measurement: Mat,
}

impl Dynamics {
    fn new(graph: &MatrixWeightedGraph, d_k: &Mat, sigma_v: f64) -> Self {
        let e_inv = graph.timescale_diagonal().map(|v| 1.0 / v);
        let w_half = graph.weight_blocks().sqrt().assemble();
        let measurement = Mat::from_diagonal(&e_inv) * d_k * w_half * sigma_v;
        Self { laplacian: graph::weighted_laplacian(graph), e_inv, measurement }
    }
}

fn flatten(rows: &[Vec<f64>]) -> Vector {
    Vector::from_iterator(rows.iter().map(Vec::len).sum(), rows.iter().flatten().copied())
}

/// Deterministic per-(seed, replicate) noise stream. Stream 0 of each seed is
/// left to instance generation.
pub fn noise_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate.wrapping_add(1));
    rng
}

struct Accumulator {
    /// Σ x_e, Σ x_e² per channel over the post-onset and gust windows.
    post_sum: Vector,
    post_sq: Vector,
    post_count: usize,
    gust_sum: Vector,
    gust_sq: Vector,
    gust_count: usize,
}

impl Accumulator {
    fn new(m: usize) -> Self {
        Self {
            post_sum: Vector::zeros(m),
            post_sq: Vector::zeros(m),
            post_count: 0,
            gust_sum: Vector::zeros(m),
            gust_sq: Vector::zeros(m),
            gust_count: 0,
        }
    }

    fn push(&mut self, xe: &Vector, post: bool, gust: bool) {
        if post {
            self.post_sum += xe;
            self.post_sq += xe.component_mul(xe);
            self.post_count += 1;
        }
        if gust {
            self.gust_sum += xe;
            self.gust_sq += xe.component_mul(xe);
            self.gust_count += 1;
        }
    }

    /// mean_t (x − x_f)² = mean(x²) − 2 x_f mean(x) + x_f², averaged over channels.
    fn mean_variance(sum: &Vector, sq: &Vector, count: usize, xf: &Vector) -> f64 {
        if count == 0 || xf.is_empty() {
            return 0.0;
        }
        let c = count as f64;
        let per_channel = sq / c - (sum / c).component_mul(xf) * 2.0 + xf.component_mul(xf);
        per_channel.iter().map(|v| v.max(0.0)).sum::<f64>() / xf.len() as f64
    }
}

/// Runs one scenario, computing its update plan first.
pub fn simulate(graph: &MatrixWeightedGraph, config: &SimConfig, tol: &Tolerances) -> Result<(SimTrace, SimSummary)> {
    config.validate(graph)?;
    let plan = plan_updates(graph, config.scenario, config.design.as_ref(), tol)?;
    simulate_with_plan(graph, config, &plan)
}

/// Runs one scenario with precomputed updates.
pub fn simulate_with_plan(graph: &MatrixWeightedGraph, config: &SimConfig, plan: &UpdatePlan) -> Result<(SimTrace, SimSummary)> {
    config.validate(graph)?;
    let (n, k) = (graph.n(), graph.k());
    let nk = n * k;
    let ek = graph.edge_count() * k;
    let d_k = linalg::kron_eye(&graph.incidence_matrix(), k);
    let d_t = d_k.transpose();
    let target = flatten(&config.formation);

    let (mut x, mut v) = match &config.initial {
        InitialState::Formation => {
            let base = &config.formation[0];
            let rel: Vec<Vec<f64>> = config.formation.iter().map(|d| d.iter().zip(base).map(|(a, b)| a - b).collect()).collect();
            (flatten(&rel), Vector::zeros(nk))
        }
        InitialState::Given { positions, velocities } => (flatten(positions), flatten(velocities)),
    };

    let mut dynamics = Dynamics::new(graph, &d_k, config.sigma_v);
    let steps = config.steps();
    let step_on = config.step_of(config.gust_window[0]);
    let step_off = config.step_of(config.gust_window[1]);
    let dt = config.dt;
    let sqrt_dt = dt.sqrt();
    let mut rng = noise_rng(config.seed, config.replicate);

    let mut trace = SimTrace { times: Vec::new(), positions: Vec::new(), velocities: Vec::new(), edges: Vec::new() };
    let mut acc = Accumulator::new(ek);
    let mut xe = &d_t * &x;
    let mut dw = Vector::zeros(nk);
    let mut dv = Vector::zeros(ek);

    for s in 0..=steps {
        if s == step_on && (plan.weights.is_some() || plan.timescales.is_some()) {
            let mut updated = graph.clone();
            if let Some(eps) = &plan.timescales {
                updated = updated.with_timescales(eps.clone())?;
            }
            if let Some(w) = &plan.weights {
                updated = updated.with_weights(w.clone())?;
            }
            dynamics = Dynamics::new(&updated, &d_k, config.sigma_v);
        }
        let t = s as f64 * dt;
        acc.push(&xe, s >= step_on, s >= step_on && s <= step_off);
        if s % config.record_every == 0 || s == steps {
            if !(x.iter().chain(v.iter()).all(|z| z.is_finite())) {
                return Err(Error::NonFiniteState { time: t });
            }
            trace.times.push(t);
            trace.positions.push(x.clone());
            trace.velocities.push(v.clone());
            trace.edges.push(xe.clone());
        }
        if s == steps {
            break;
        }

        let force = -(&dynamics.laplacian * (&x - &target + &v));
        let mut accel = force.component_mul(&dynamics.e_inv) * dt;
        if s >= step_on && s < step_off {
            dw.iter_mut().for_each(|z| *z = rng.sample::<f64, _>(StandardNormal) * sqrt_dt);
            dv.iter_mut().for_each(|z| *z = rng.sample::<f64, _>(StandardNormal) * sqrt_dt);
            accel += dw.component_mul(&dynamics.e_inv) * config.sigma_w;
            accel -= &dynamics.measurement * &dv;
        }
        x += &v * dt;
        v += accel;
        xe = &d_t * &x;
    }
    if !(x.iter().chain(v.iter()).all(|z| z.is_finite())) {
        return Err(Error::NonFiniteState { time: steps as f64 * dt });
    }

    let summary = SimSummary {
        scenario: config.scenario,
        seed: config.seed,
        replicate: config.replicate,
        mean_variance: Accumulator::mean_variance(&acc.post_sum, &acc.post_sq, acc.post_count, &xe),
        gust_variance: Accumulator::mean_variance(&acc.gust_sum, &acc.gust_sq, acc.gust_count, &xe),
    };
    Ok((trace, summary))
}

/// All four scenarios on common random numbers.
pub fn run_scenarios(graph: &MatrixWeightedGraph, base: &SimConfig, tol: &Tolerances) -> Result<BTreeMap<Scenario, (SimTrace, SimSummary)>> {
    let plans = plan_all(graph, base, tol)?;
    Scenario::ALL
        .par_iter()
        .map(|&sc| {
            let cfg = SimConfig { scenario: sc, ..base.clone() };
            simulate_with_plan(graph, &cfg, &plans[&sc]).map(|r| (sc, r))
        })
        .collect()
}

fn plan_all(graph: &MatrixWeightedGraph, base: &SimConfig, tol: &Tolerances) -> Result<BTreeMap<Scenario, UpdatePlan>> {
    let nud = SimConfig { scenario: Scenario::Nud, ..base.clone() };
    nud.validate(graph)?;
    let Some(design) = base.design.as_ref() else {
        return Err(Error::ConfigInvalid("scenario runs need design parameters".into()));
    };
    let both = plan_updates(graph, Scenario::Bud, Some(design), tol)?;
    Ok(Scenario::ALL
        .iter()
        .map(|&sc| {
            let plan = UpdatePlan {
                weights: both.weights.clone().filter(|_| sc.updates_weights()),
                timescales: both.timescales.clone().filter(|_| sc.updates_timescales()),
            };
            (sc, plan)
        })
        .collect())
}

/// Summaries of all scenarios over several seeds; traces are not kept.
pub fn scenario_batch(graph: &MatrixWeightedGraph, base: &SimConfig, seeds: &[u64], tol: &Tolerances) -> Result<Vec<BTreeMap<Scenario, SimSummary>>> {
    let plans = plan_all(graph, base, tol)?;
    let cfg = SimConfig { record_every: usize::MAX, ..base.clone() };
    seeds
        .par_iter()
        .map(|&seed| {
            Scenario::ALL
                .iter()
                .map(|&sc| {
                    let c = SimConfig { scenario: sc, seed, ..cfg.clone() };
                    simulate_with_plan(graph, &c, &plans[&sc]).map(|(_, s)| (sc, s))
                })
                .collect()
        })
        .collect()
}

/// `[x_e(t) − x_e(t_f)]²` per sample and channel.
pub fn variance_metric(trace: &SimTrace) -> Vec<Vector> {
    let Some(last) = trace.edges.last() else {
        return Vec::new();
    };
    trace
        .edges
        .iter()
        .map(|xe| (xe - last).map(|d| d * d))
        .collect()
}

/// Long-format CSV: `time,id,substate,value,series` with 1-based ids.
pub fn write_trace_csv<W: Write>(mut out: W, trace: &SimTrace, k: usize) -> std::io::Result<()> {
    writeln!(out, "time,id,substate,value,series")?;
    let variance = variance_metric(trace);
    for (s, &t) in trace.times.iter().enumerate() {
        for (series, data) in [
            ("position", &trace.positions[s]),
            ("velocity", &trace.velocities[s]),
            ("edge", &trace.edges[s]),
            ("variance", &variance[s]),
        ] {
            for (idx, value) in data.iter().enumerate() {
                writeln!(out, "{t:.16e},{},{},{value:.16e},{series}", idx / k + 1, idx % k + 1)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace_of(values: &[f64]) -> SimTrace {
        SimTrace {
            times: (0..values.len()).map(|i| i as f64).collect(),
            positions: vec![Vector::zeros(1); values.len()],
            velocities: vec![Vector::zeros(1); values.len()],
            edges: values.iter().map(|&v| Vector::from_element(1, v)).collect(),
        }
    }

    #[test]
    fn variance_of_hand_trace() {
        let var = variance_metric(&trace_of(&[1.0, 2.0, 2.0]));
        let flat: Vec<f64> = var.iter().map(|v| v[0]).collect();
        assert_eq!(flat, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn variance_of_constant_trace() {
        let var = variance_metric(&trace_of(&[3.5; 5]));
        assert!(var.iter().all(|v| v[0] == 0.0));
        assert!(variance_metric(&trace_of(&[])).is_empty());
    }

    #[test]
    fn scenario_names_round_trip() {
        for sc in Scenario::ALL {
            assert_eq!(sc.to_string().parse::<Scenario>().unwrap(), sc);
        }
    }

    #[test]
    fn invalid_window_rejected() {
        let g = MatrixWeightedGraph::uniform(2, vec![(0, 1)], &Mat::identity(1, 1)).unwrap();
        let cfg = SimConfig {
            dt: 0.01,
            t_end: 1.0,
            gust_window: [0.8, 0.5],
            sigma_w: 1.0,
            sigma_v: 1.0,
            scenario: Scenario::Nud,
            seed: 0,
            replicate: 0,
            formation: vec![vec![0.0]; 2],
            initial: InitialState::Formation,
            design: None,
            record_every: 1,
        };
        assert!(matches!(cfg.validate(&g), Err(Error::ConfigInvalid(_))));
    }
}
