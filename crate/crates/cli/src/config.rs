//! Experiment configuration: one TOML file per experiment.
//!
//! Every block is optional and falls back to the reference setup (1D,
//! `L = 8`, `N = 256`, one Gaussian noise mode, zero forcing). Unknown keys
//! are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use stochwave::dynamics::{check_cfl, Forcing, Model, TimeGrid, MAX_CFL};
use stochwave::noise::{NoiseProfile, Shape};
use stochwave::nonlin::{Nonlinearity, NonlinearityKind};
use stochwave::{Grid, Params};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "Params::reference")]
    pub params: Params,
    #[serde(default)]
    pub grid: GridBlock,
    #[serde(default)]
    pub noise: NoiseBlock,
    #[serde(default)]
    pub forcing: ForcingBlock,
    #[serde(default)]
    pub nonlinearity: NonlinearityBlock,
    #[serde(default)]
    pub initial: InitialBlock,
    #[serde(default)]
    pub experiment: ExperimentBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub dim: usize,
    pub half_width: f64,
    pub cells: usize,
}

impl Default for GridBlock {
    fn default() -> Self {
        GridBlock { dim: 1, half_width: 8.0, cells: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBlock {
    #[serde(default)]
    pub seed: u64,
    /// One shape per noise mode `h_j`.
    #[serde(default = "default_profile")]
    pub profile: Vec<Shape>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Integrator step; the OU grid runs at half of it. Defaults to the
    /// largest power of two below `MAX_CFL * h`.
    #[serde(default)]
    pub dt: Option<f64>,
}

impl Default for NoiseBlock {
    fn default() -> Self {
        NoiseBlock { seed: 0, profile: default_profile(), horizon: default_horizon(), dt: None }
    }
}

fn default_profile() -> Vec<Shape> {
    vec![Shape::Gaussian { amplitude: 1.0, width: 1.0, center: 0.0 }]
}

fn default_horizon() -> f64 {
    40.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingBlock {
    pub g: Shape,
}

impl Default for ForcingBlock {
    fn default() -> Self {
        ForcingBlock { g: Shape::Zero }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityBlock {
    pub kind: NonlinearityKind,
    pub p: f64,
}

impl Default for NonlinearityBlock {
    fn default() -> Self {
        NonlinearityBlock { kind: NonlinearityKind::Canonical, p: 4.0 }
    }
}

/// Initial data `(u, v)` in the transformed variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialBlock {
    Zero,
    Fields { u: Shape, v: Shape },
    /// Random smooth states with E-norms stratified up to `radius`.
    Ball { radius: f64, count: usize },
}

impl Default for InitialBlock {
    fn default() -> Self {
        InitialBlock::Ball { radius: 3.0, count: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentBlock {
    /// Number of ensemble members; member seeds derive from `noise.seed`.
    pub ensemble: u64,
    /// Steps between recorded snapshots.
    pub snapshot_every: usize,
    /// Relative slack of the Gronwall check.
    pub tolerance: f64,
    /// Times at which `simulate` dumps full fields.
    pub dump_times: Vec<f64>,
    /// Pullback schedule `T_1 < T_2 < ...`.
    pub pullback_times: Vec<f64>,
    /// Fitted rate must stay below `rate_factor * e^{-σ Δt}`; reported only.
    pub rate_factor: f64,
    /// `absorb` starts from E-norms up to `ball_factor * R(ω)`.
    pub ball_factor: f64,
    pub ball_count: usize,
    pub tail_times: Vec<f64>,
    pub tail_radii: Vec<f64>,
    pub eta: f64,
    pub invariance_time: f64,
    pub invariance_factor: f64,
    pub invariance_abs_tol: f64,
    pub vitali_length: usize,
    pub vitali_eps: Vec<f64>,
    pub vitali_thresholds: Vec<f64>,
    /// Extra families in `cell,measure,value,member` CSV form.
    pub vitali_csv: Vec<PathBuf>,
}

impl Default for ExperimentBlock {
    fn default() -> Self {
        ExperimentBlock {
            ensemble: 1,
            snapshot_every: 8,
            tolerance: 0.05,
            dump_times: Vec::new(),
            pullback_times: (1..=10).map(|i| 2.0 * i as f64).collect(),
            rate_factor: 1.1,
            ball_factor: 10.0,
            ball_count: 3,
            tail_times: vec![5.0, 10.0, 20.0],
            tail_radii: vec![2.0, 4.0, 6.0],
            eta: 0.1,
            invariance_time: 1.0,
            invariance_factor: 3.0,
            invariance_abs_tol: 1e-6,
            vitali_length: 40,
            vitali_eps: vec![0.5, 0.1, 0.01],
            vitali_thresholds: vec![0.05, 0.01, 0.001],
            vitali_csv: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { directory: PathBuf::from("out"), formats: vec![Format::Csv, Format::Json, Format::Binary] }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("invalid configuration")]
    Invalid(Vec<String>),
}

impl ConfigError {
    pub fn diagnostics(&self) -> Vec<String> {
        match self {
            ConfigError::Invalid(d) => d.clone(),
            other => vec![other.to_string()],
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::parse(&text).map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// SHA-256 of the canonical JSON form, output block excluded so that
    /// `--out` never changes artifact contents.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = OutputBlock::default();
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn grid(&self) -> stochwave::Result<Grid> {
        Grid::new(self.grid.dim, self.grid.half_width, self.grid.cells)
    }

    pub fn dt(&self, grid: &Grid) -> stochwave::Result<f64> {
        match self.noise.dt {
            Some(dt) => Ok(dt),
            None => Ok(TimeGrid::for_grid(grid, MAX_CFL)?.dt),
        }
    }

    pub fn nonlinearity(&self) -> stochwave::Result<Nonlinearity> {
        match self.nonlinearity.kind {
            NonlinearityKind::Canonical => Nonlinearity::canonical(self.nonlinearity.p),
            NonlinearityKind::Linear => Ok(Nonlinearity::linear(self.nonlinearity.p)),
        }
    }

    pub fn model(&self) -> stochwave::Result<Model> {
        let grid = self.grid()?;
        let profile = NoiseProfile::from_shapes(&grid, &self.noise.profile, self.params.p)?;
        let forcing = Forcing::new(self.forcing.g.sample(&grid), profile)?;
        Model::new(self.params, self.nonlinearity()?, forcing)
    }

    /// Every inconsistency between blocks, in a stable order.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self.params.validate() {
            Ok(v) => out.extend(v.iter().map(|v| format!("params: {v}"))),
            Err(e) => out.push(format!("params: {e}")),
        }
        if self.nonlinearity.p != self.params.p {
            out.push(format!(
                "nonlinearity: exponent {} differs from params.p = {}",
                self.nonlinearity.p, self.params.p
            ));
        }
        if self.noise.profile.len() != self.params.m {
            out.push(format!(
                "noise: {} profile shapes for m = {} modes",
                self.noise.profile.len(),
                self.params.m
            ));
        }
        let horizon = self.noise.horizon;
        if !(horizon > 0.0 && horizon.is_finite()) {
            out.push(format!("noise: horizon {horizon} must be positive"));
        }
        match self.grid() {
            Err(e) => out.push(format!("grid: {e}")),
            Ok(grid) => match self.dt(&grid) {
                Err(e) => out.push(format!("noise: {e}")),
                Ok(dt) => {
                    if let Err(e) = check_cfl(dt, &grid) {
                        out.push(format!("noise: {e}"));
                    }
                    if dt > 0.0 && !aligned(horizon, dt) {
                        out.push(format!("noise: horizon {horizon} is not a multiple of dt = {dt}"));
                    }
                    let e = &self.experiment;
                    let schedules: [(&str, &[f64]); 3] = [
                        ("pullback_times", &e.pullback_times),
                        ("tail_times", &e.tail_times),
                        ("dump_times", &e.dump_times),
                    ];
                    for (name, times) in schedules {
                        for &t in times {
                            if !(t >= 0.0 && t <= horizon) {
                                out.push(format!("experiment: {name} entry {t} outside [0, {horizon}]"));
                            } else if dt > 0.0 && !aligned(t, dt) {
                                out.push(format!("experiment: {name} entry {t} is not a multiple of dt = {dt}"));
                            }
                        }
                    }
                    if dt > 0.0 && !aligned(e.invariance_time, dt) {
                        out.push(format!("experiment: invariance_time {} is not a multiple of dt", e.invariance_time));
                    }
                }
            },
        }
        let e = &self.experiment;
        for (name, v) in [("pullback_times", &e.pullback_times), ("tail_times", &e.tail_times), ("tail_radii", &e.tail_radii)] {
            if v.is_empty() || v.windows(2).any(|w| w[1] <= w[0]) {
                out.push(format!("experiment: {name} must be nonempty and strictly increasing"));
            }
        }
        if e.ensemble == 0 {
            out.push("experiment: ensemble must be at least 1".into());
        }
        if e.snapshot_every == 0 {
            out.push("experiment: snapshot_every must be at least 1".into());
        }
        if e.vitali_eps.len() != e.vitali_thresholds.len() {
            out.push("experiment: vitali_eps and vitali_thresholds differ in length".into());
        }
        if let InitialBlock::Ball { radius, count } = self.initial {
            if !(radius > 0.0) || count == 0 {
                out.push("initial: ball needs a positive radius and count".into());
            }
        }
        out
    }

    pub fn validated(self) -> Result<Self, ConfigError> {
        let diagnostics = self.validate();
        if diagnostics.is_empty() {
            Ok(self)
        } else {
            Err(ConfigError::Invalid(diagnostics))
        }
    }
}

fn aligned(t: f64, dt: f64) -> bool {
    let k = t / dt;
    (k - k.round()).abs() <= 1e-9 * k.abs().max(1.0)
}
