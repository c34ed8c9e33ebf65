//! The reference gust experiment: ten agents in the plane holding a spiral
//! formation, random initial weights, design, and the four update scenarios.

use matcons::design::{TimescaleBox, WeightBox};
use matcons::flocking::{DesignParams, InitialState, Scenario, SimConfig};
use matcons::graph::{self, MatrixWeightedGraph};
use matcons::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperParameters {
    pub n: usize,
    pub k: usize,
    pub alpha_init: f64,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub h: f64,
    pub sigma_w: f64,
    pub sigma_v: f64,
    pub gust_window: [f64; 2],
    pub t_end: f64,
    pub initial_timescale: f64,
    // The values below are not fixed by the reference experiment.
    pub dt: f64,
    pub spiral_spacing: f64,
    pub chord_span: usize,
    pub max_iter: usize,
    pub timescale_box: TimescaleBox,
}

impl Default for PaperParameters {
    fn default() -> Self {
        Self {
            n: 10,
            k: 2,
            alpha_init: 0.3,
            alpha_lo: 0.05,
            alpha_hi: 10.0,
            h: 0.01,
            sigma_w: 5.0,
            sigma_v: 5.0,
            gust_window: [10.0, 20.0],
            t_end: 30.0,
            initial_timescale: 1.0,
            dt: 1e-3,
            spiral_spacing: 1.0,
            chord_span: 2,
            max_iter: 200,
            timescale_box: TimescaleBox { eps_min: 0.1, eps_max: 100.0, h: 0.01, r: 1 },
        }
    }
}

#[derive(Debug, Clone)]
pub struct PaperSetup {
    pub params: PaperParameters,
    pub graph: MatrixWeightedGraph,
    pub weight_box: WeightBox,
    pub sim: SimConfig,
}

/// Path `(i, i+1)` plus chords `(i, i+s)` for `s = 2..=chord_span`.
pub fn formation_edges(n: usize, chord_span: usize) -> Vec<(usize, usize)> {
    (1..=chord_span.max(1))
        .flat_map(|s| (0..n.saturating_sub(s)).map(move |i| (i, i + s)))
        .collect()
}

/// Builds the instance. Stream 0 of `seed` draws the initial weights and then
/// the box; gust noise uses the later streams of the same seed.
pub fn paper_setup(params: &PaperParameters, seed: u64, record_every: usize) -> Result<PaperSetup, CliError> {
    if params.k != 2 {
        return Err(CliError::Usage("the spiral formation is planar; k must be 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = formation_edges(params.n, params.chord_span);
    let weights: Vec<Mat> = edges
        .iter()
        .map(|_| graph::random_spd_weight(params.alpha_init, params.k, &mut rng))
        .collect::<matcons::Result<_>>()?;
    let timescales = vec![vec![params.initial_timescale; params.k]; params.n];
    let graph = MatrixWeightedGraph::new(params.n, params.k, edges, weights, timescales)?;
    let weight_box = WeightBox::random(params.alpha_lo, params.alpha_hi, params.k, &mut rng)?;

    let formation = graph::spiral_formation(params.n, params.spiral_spacing).iter().map(|p| p.to_vec()).collect();
    let sim = SimConfig {
        dt: params.dt,
        t_end: params.t_end,
        gust_window: params.gust_window,
        sigma_w: params.sigma_w,
        sigma_v: params.sigma_v,
        scenario: Scenario::Nud,
        seed,
        replicate: 0,
        formation,
        initial: InitialState::Formation,
        design: Some(DesignParams {
            h: params.h,
            weight_box: weight_box.clone(),
            max_iter: params.max_iter,
            timescale_box: params.timescale_box,
        }),
        record_every,
    };
    sim.validate(&graph)?;
    Ok(PaperSetup { params: params.clone(), graph, weight_box, sim })
}
