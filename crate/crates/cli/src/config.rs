//! JSON run configuration. Every section and field is optional.
//!
//! ```json
//! {
//!   "noise": {"kind": "special", "sigma_w": 1.0, "sigma_v": 1.0},
//!   "design": {
//!     "h": 0.01, "max_iter": 200,
//!     "weight_box": {"alpha_lo": 0.05, "alpha_hi": 10.0},
//!     "timescale_box": {"eps_min": 0.1, "eps_max": 100.0, "h": 0.01, "r": 1}
//!   },
//!   "simulation": {
//!     "dt": 0.001, "t_end": 30.0, "gust_window": [10.0, 20.0],
//!     "sigma_w": 5.0, "sigma_v": 5.0,
//!     "formation": {"spiral": 1.0}, "initial": "formation"
//!   }
//! }
//! ```
//!
//! A general noise section gives the true factors instead:
//! `{"kind": "general", "omega": {"diagonal": [...]}, "gamma": [[...], ...]}`.
//! `weight_box` may also be explicit: `{"w_min": [...], "w_max": [...]}`.
//! `formation` may be a list of per-node offsets; `initial` may be
//! `{"positions": [[...]], "velocities": [[...]]}`.

use std::path::Path;

use matcons::design::{TimescaleBox, WeightBox};
use matcons::flocking::{DesignParams, InitialState, Scenario, SimConfig};
use matcons::graph::{self, MatrixWeightedGraph};
use matcons::h2::NoiseModel;
use matcons::io::MatrixRepr;
use matcons::{Error, Mat};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub noise: Option<NoiseSpec>,
    pub design: DesignSpec,
    pub simulation: SimulationSpec,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::Core(Error::Parse(format!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column())))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FactorSpec {
    Diagonal { diagonal: Vec<f64> },
    Full(Vec<Vec<f64>>),
}

impl FactorSpec {
    pub fn to_matrix(&self) -> Result<Mat, CliError> {
        match self {
            FactorSpec::Diagonal { diagonal } => {
                let n = diagonal.len();
                Ok(Mat::from_fn(n, n, |i, j| if i == j { diagonal[i] } else { 0.0 }))
            }
            FactorSpec::Full(rows) => {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(CliError::Core(Error::Parse(format!("noise factor must be square, got {n} rows of unequal length"))));
                }
                Ok(Mat::from_fn(n, n, |i, j| rows[i][j]))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NoiseSpec {
    Special { sigma_w: f64, sigma_v: f64 },
    General { omega: FactorSpec, gamma: FactorSpec },
}

impl NoiseSpec {
    pub fn to_model(&self) -> Result<NoiseModel, CliError> {
        Ok(match self {
            NoiseSpec::Special { sigma_w, sigma_v } => NoiseModel::Special { sigma_w: *sigma_w, sigma_v: *sigma_v },
            NoiseSpec::General { omega, gamma } => NoiseModel::General { omega: omega.to_matrix()?, gamma: gamma.to_matrix()? },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightBoxSpec {
    Explicit { w_min: MatrixRepr, w_max: MatrixRepr },
    /// Both bounds drawn from the random weight generator.
    Random { alpha_lo: f64, alpha_hi: f64 },
}

impl WeightBoxSpec {
    pub fn build<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<WeightBox, CliError> {
        match self {
            WeightBoxSpec::Explicit { w_min, w_max } => {
                let lo = w_min.to_matrix(k).map_err(|m| CliError::Core(Error::Parse(format!("w_min: {m}"))))?;
                let hi = w_max.to_matrix(k).map_err(|m| CliError::Core(Error::Parse(format!("w_max: {m}"))))?;
                Ok(WeightBox::new(lo, hi)?)
            }
            WeightBoxSpec::Random { alpha_lo, alpha_hi } => Ok(WeightBox::random(*alpha_lo, *alpha_hi, k, rng)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSpec {
    pub h: f64,
    pub max_iter: usize,
    pub weight_box: WeightBoxSpec,
    pub timescale_box: TimescaleBox,
}

impl Default for DesignSpec {
    fn default() -> Self {
        Self {
            h: 0.01,
            max_iter: 200,
            weight_box: WeightBoxSpec::Random { alpha_lo: 0.05, alpha_hi: 10.0 },
            timescale_box: TimescaleBox { eps_min: 0.1, eps_max: 100.0, h: 0.01, r: 1 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FormationSpec {
    Spiral { spiral: f64 },
    Offsets(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    Named(String),
    Given { positions: Vec<Vec<f64>>, velocities: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    pub dt: f64,
    pub t_end: f64,
    pub gust_window: [f64; 2],
    pub sigma_w: f64,
    pub sigma_v: f64,
    pub formation: FormationSpec,
    pub initial: InitialSpec,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 30.0,
            gust_window: [10.0, 20.0],
            sigma_w: 5.0,
            sigma_v: 5.0,
            formation: FormationSpec::Spiral { spiral: 1.0 },
            initial: InitialSpec::Named("formation".into()),
        }
    }
}

impl SimulationSpec {
    pub fn formation(&self, graph: &MatrixWeightedGraph) -> Result<Vec<Vec<f64>>, CliError> {
        match &self.formation {
            FormationSpec::Spiral { spiral } => {
                if graph.k() != 2 {
                    return Err(CliError::Usage(format!("spiral formation needs k = 2, graph has k = {}", graph.k())));
                }
                Ok(graph::spiral_formation(graph.n(), *spiral).iter().map(|p| p.to_vec()).collect())
            }
            FormationSpec::Offsets(d) => Ok(d.clone()),
        }
    }

    fn initial(&self) -> Result<InitialState, CliError> {
        match &self.initial {
            InitialSpec::Named(name) if name == "formation" => Ok(InitialState::Formation),
            InitialSpec::Named(other) => Err(CliError::Usage(format!("unknown initial state {other:?}"))),
            InitialSpec::Given { positions, velocities } => {
                Ok(InitialState::Given { positions: positions.clone(), velocities: velocities.clone() })
            }
        }
    }

    /// Full simulator configuration; `design` supplies the onset updates.
    pub fn build(&self, graph: &MatrixWeightedGraph, design: DesignParams, seed: u64, record_every: usize) -> Result<SimConfig, CliError> {
        let cfg = SimConfig {
            dt: self.dt,
            t_end: self.t_end,
            gust_window: self.gust_window,
            sigma_w: self.sigma_w,
            sigma_v: self.sigma_v,
            scenario: Scenario::Nud,
            seed,
            replicate: 0,
            formation: self.formation(graph)?,
            initial: self.initial()?,
            design: Some(design),
            record_every,
        };
        cfg.validate(graph)?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn empty_config_uses_defaults() {
        let c: ConfigFile = serde_json::from_str("{}").unwrap();
        assert_eq!(c, ConfigFile::default());
        assert_eq!(c.design.h, 0.01);
        assert_eq!(c.simulation.gust_window, [10.0, 20.0]);
    }

    #[test]
    fn parses_noise_variants() {
        let c: ConfigFile = serde_json::from_str(r#"{"noise": {"kind": "general", "omega": {"diagonal": [1, 2]}, "gamma": [[1]]}}"#).unwrap();
        let Some(NoiseSpec::General { omega, gamma }) = c.noise else { panic!("expected general noise") };
        assert_eq!(omega.to_matrix().unwrap(), Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]));
        assert_eq!(gamma.to_matrix().unwrap(), Mat::identity(1, 1));
    }

    #[test]
    fn explicit_weight_box() {
        let c: ConfigFile = serde_json::from_str(r#"{"design": {"weight_box": {"w_min": [0.1], "w_max": [[5]]}}}"#).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let b = c.design.weight_box.build(1, &mut rng).unwrap();
        assert_eq!(b.w_max()[(0, 0)], 5.0);
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(serde_json::from_str::<ConfigFile>(r#"{"simulation": {"dtt": 1}}"#).is_err());
    }
}
