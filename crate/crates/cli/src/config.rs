//! JSON run configuration. Matrices are row-major nested arrays.

use std::path::{Path, PathBuf};

use minimax_adapt::dpverify::ValueGridConfig;
use minimax_adapt::linalg::from_rows;
use minimax_adapt::riccati::{io_to_state, GameSpec};
use minimax_adapt::simulation::{DisturbanceSpec, ScenarioEvent, SimulationConfig};
use minimax_adapt::synthesis::{Model, ModelSet};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelEntry {
    Matrices {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
    },
    /// `y_t = -a_1 y_{t-1} - ... + b_1 u_{t-1} + ...`, expanded to the
    /// non-minimal state realization.
    Io {
        a: Vec<f64>,
        b: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaRange {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "default_bisect_steps")]
    pub steps: usize,
}

fn default_bisect_steps() -> usize {
    30
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceEntry {
    Zero,
    White { sigma: f64 },
    Adversarial,
    Explicit { sequence: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventEntry {
    pub time: usize,
    pub model: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSettings {
    #[serde(default)]
    pub true_model: usize,
    pub x0: Vec<f64>,
    pub horizon: usize,
    pub disturbance: DisturbanceEntry,
    #[serde(default)]
    pub events: Vec<EventEntry>,
    /// One run per seed; the seed only matters for white noise.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Also simulate `u = -K_i x` with the true model known.
    #[serde(default = "default_true")]
    pub baseline: bool,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridEntry {
    pub x_max: f64,
    pub nx: usize,
    pub delta_max: f64,
    pub ndelta: usize,
    pub nu: usize,
    pub nv: usize,
    pub k_max: usize,
    #[serde(default)]
    pub u_max: Option<f64>,
    #[serde(default)]
    pub max_grid_tol: Option<f64>,
}

impl Default for GridEntry {
    fn default() -> Self {
        let d = ValueGridConfig::<f64>::default();
        Self {
            x_max: d.x_max,
            nx: d.nx,
            delta_max: d.delta_max,
            ndelta: d.ndelta,
            nu: d.nu,
            nv: d.nv,
            k_max: d.k_max,
            u_max: None,
            max_grid_tol: None,
        }
    }
}

impl GridEntry {
    pub fn to_config(&self) -> ValueGridConfig<f64> {
        ValueGridConfig {
            x_max: self.x_max,
            nx: self.nx,
            delta_max: self.delta_max,
            ndelta: self.ndelta,
            nu: self.nu,
            nv: self.nv,
            k_max: self.k_max,
            u_max: self.u_max,
            max_grid_tol: self.max_grid_tol.unwrap_or(f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpcheckSettings {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Gridded value iteration; scalar model sets only.
    #[serde(default)]
    pub grid: Option<GridEntry>,
}

fn default_samples() -> usize {
    10_000
}

impl Default for DpcheckSettings {
    fn default() -> Self {
        Self { samples: default_samples(), seed: 0, grid: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub models: Vec<ModelEntry>,
    /// Add `(A, -B)` for every listed `(A, B)`.
    #[serde(default)]
    pub sign_pair: bool,
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub gamma_range: Option<GammaRange>,
    #[serde(default)]
    pub simulation: Option<SimulationSettings>,
    #[serde(default)]
    pub dpcheck: Option<DpcheckSettings>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct Problem {
    pub config: Config,
    pub models: ModelSet<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, CliError> {
    from_rows(rows).ok_or_else(|| CliError::Input(format!("{what}: rows must be nonempty and of equal length")))
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(self) -> Result<Problem, CliError> {
        let mut list = Vec::new();
        for (idx, entry) in self.models.iter().enumerate() {
            let (a, b) = match entry {
                ModelEntry::Matrices { a, b } => {
                    (matrix(a, &format!("models[{idx}].a"))?, matrix(b, &format!("models[{idx}].b"))?)
                }
                ModelEntry::Io { a, b } => io_to_state(a, b)?,
            };
            let flipped = self.sign_pair.then(|| Model::new(a.clone(), -&b));
            list.push(Model::new(a, b));
            list.extend(flipped);
        }
        let models = ModelSet::new(list)?;
        let q = matrix(&self.q, "q")?;
        let r = matrix(&self.r, "r")?;
        match (&self.gamma, &self.gamma_range) {
            (None, None) => return Err(CliError::Input("one of gamma or gamma_range is required".into())),
            (Some(_), Some(_)) => return Err(CliError::Input("gamma and gamma_range are exclusive".into())),
            _ => {}
        }
        let check_gamma = self.gamma.or(self.gamma_range.as_ref().map(|g| g.hi)).unwrap_or(1.0);
        models.check_spec(&GameSpec::new(q.clone(), r.clone(), check_gamma)?)?;
        if let Some(range) = &self.gamma_range {
            if !(range.lo > 0.0 && range.lo < range.hi) {
                return Err(CliError::Input("gamma_range needs 0 < lo < hi".into()));
            }
        }
        if let Some(sim) = &self.simulation {
            sim.to_configs(models.n(), None, None)?;
            if sim.true_model >= models.len() || sim.events.iter().any(|e| e.model >= models.len()) {
                return Err(CliError::Input("simulation model index out of range".into()));
            }
        }
        Ok(Problem { config: self, models, q, r })
    }
}

impl SimulationSettings {
    /// One configuration per seed; `seed` and `horizon` override the file.
    pub fn to_configs(
        &self,
        n: usize,
        seed: Option<u64>,
        horizon: Option<usize>,
    ) -> Result<Vec<(u64, SimulationConfig<f64>)>, CliError> {
        if self.x0.len() != n {
            return Err(CliError::Input(format!("x0 has length {}, expected {n}", self.x0.len())));
        }
        let horizon = horizon.unwrap_or(self.horizon);
        if horizon == 0 {
            return Err(CliError::Input("horizon must be at least 1".into()));
        }
        let seeds = seed.map_or_else(|| self.seeds.clone(), |s| vec![s]);
        if seeds.is_empty() {
            return Err(CliError::Input("seeds must not be empty".into()));
        }
        let events: Vec<_> = self.events.iter().map(|e| ScenarioEvent { time: e.time, model: e.model }).collect();
        seeds
            .into_iter()
            .map(|seed| {
                let disturbance = match &self.disturbance {
                    DisturbanceEntry::Zero => DisturbanceSpec::Zero,
                    DisturbanceEntry::White { sigma } if *sigma >= 0.0 => {
                        DisturbanceSpec::White { sigma: *sigma, seed }
                    }
                    DisturbanceEntry::White { .. } => return Err(CliError::Input("sigma must be nonnegative".into())),
                    DisturbanceEntry::Adversarial => DisturbanceSpec::Adversarial,
                    DisturbanceEntry::Explicit { sequence } => {
                        if sequence.len() < horizon || sequence.iter().any(|w| w.len() != n) {
                            return Err(CliError::Input(format!(
                                "explicit disturbance needs {horizon} vectors of length {n}"
                            )));
                        }
                        DisturbanceSpec::Explicit(sequence.iter().map(|w| DVector::from_column_slice(w)).collect())
                    }
                };
                Ok((
                    seed,
                    SimulationConfig {
                        true_model: self.true_model,
                        x0: DVector::from_column_slice(&self.x0),
                        horizon,
                        disturbance,
                        events: events.clone(),
                    },
                ))
            })
            .collect()
    }
}

/// Example 1: double integrator `y_t = 2 y_{t-1} - y_{t-2} + u_{t-1}` with
/// unknown input sign, state `(y_t, y_{t-1}, u_{t-1})`.
pub fn double_integrator() -> Config {
    Config {
        models: vec![ModelEntry::Matrices {
            a: vec![vec![2.0, -1.0, 1.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]],
            b: vec![vec![0.0], vec![0.0], vec![1.0]],
        }],
        sign_pair: true,
        q: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
        r: vec![vec![1.0]],
        gamma: Some(19.0),
        gamma_range: None,
        simulation: Some(SimulationSettings {
            true_model: 0,
            x0: vec![1.0, 0.0, 0.0],
            horizon: 40,
            disturbance: DisturbanceEntry::Zero,
            events: vec![],
            seeds: vec![0],
            baseline: true,
        }),
        dpcheck: Some(DpcheckSettings::default()),
        out_dir: None,
    }
}
