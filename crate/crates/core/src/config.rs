//! TOML experiment configuration shared by every subcommand.
//!
//! All sections are optional; omitted fields take their defaults. Relative
//! paths are resolved against the directory of the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policies::AgentConfig;
use crate::predictor::PredictorConfig;
use crate::rng::derive_seed;
use crate::simenv::{ChannelParams, PriorityWeights, TaskDistribution, UniformRange};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub scenario: ScenarioConfig,
    pub channel: ChannelParams,
    pub tasks: TaskDistribution,
    pub weights: PriorityWeights,
    pub predictor: PredictorSection,
    pub agent: AgentConfig,
    pub experiment: ExperimentConfig,
}

/// Layout of the simulated area. Without `trajectories`, vehicles drive
/// synthetic closed loops; without `stations`, servers are scattered around
/// `center`. Both layouts are drawn from the root seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub servers: usize,
    pub vehicles: usize,
    pub center_lat: f64,
    pub center_lon: f64,
    /// Servers are placed uniformly within this radius of the center.
    pub server_spread_m: f64,
    /// Synthetic loop radii are drawn from this range.
    pub loop_radius_m: UniformRange,
    pub vehicle_speed_mps: UniformRange,
    pub server_capacity_hz: UniformRange,
    pub local_hz: UniformRange,
    pub tx_power_w: f64,
    pub server_range_m: f64,
    pub vehicle_range_m: f64,
    pub slot_len_s: f64,
    /// Reward penalty per missed deadline; defaults to twice the largest
    /// deadline.
    pub miss_penalty: Option<f64>,
    /// One PLT file per vehicle.
    pub trajectories: Vec<PathBuf>,
    /// Station CSV replacing the synthetic server layout.
    pub stations: Option<PathBuf>,
    pub max_speed_mps: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            servers: 6,
            vehicles: 4,
            center_lat: 39.98,
            center_lon: 116.32,
            server_spread_m: 900.0,
            loop_radius_m: UniformRange::new(300.0, 900.0),
            vehicle_speed_mps: UniformRange::new(8.0, 15.0),
            server_capacity_hz: UniformRange::new(5e9, 15e9),
            local_hz: UniformRange::new(0.5e9, 1.5e9),
            tx_power_w: 0.5,
            server_range_m: 1000.0,
            vehicle_range_m: 800.0,
            slot_len_s: 1.0,
            miss_penalty: None,
            trajectories: Vec::new(),
            stations: None,
            max_speed_mps: crate::data::DEFAULT_MAX_SPEED_MPS,
        }
    }
}

/// Predictor hyperparameters plus the data used by `train-predictor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorSection {
    #[serde(flatten)]
    pub model: PredictorConfig,
    /// PLT file to train on; a synthetic sinusoid track when absent.
    pub data: Option<PathBuf>,
    pub train_fraction: f64,
    pub synthetic_points: usize,
    /// Noise standard deviation as a fraction of the track amplitude.
    pub synthetic_noise: f64,
    /// Existing per-vehicle checkpoints for the TPPD run, in vehicle order.
    pub checkpoints: Option<Vec<PathBuf>>,
}

impl Default for PredictorSection {
    fn default() -> Self {
        PredictorSection {
            model: PredictorConfig::default(),
            data: None,
            train_fraction: 0.8,
            synthetic_points: 2_400,
            synthetic_noise: 0.01,
            checkpoints: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithms: Vec<String>,
    /// Evaluation episodes per seed.
    pub episodes: u64,
    pub slots: u64,
    pub seeds: Vec<u64>,
    /// Penalty factor per algorithm; unlisted algorithms use their default.
    pub psi: BTreeMap<String, f64>,
    /// Base-station power `J` in watts.
    pub station_power_w: f64,
    pub output_dir: PathBuf,
    /// Replaces measured wall-clock decision time with this many seconds per
    /// decision, for reproducible penalised numbers.
    pub synthetic_decision_time_s: Option<f64>,
    pub ddqn_checkpoint: Option<PathBuf>,
    pub dqn_checkpoint: Option<PathBuf>,
    /// Train missing agents/predictors instead of failing.
    pub train_missing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            algorithms: crate::harness::Algorithm::ALL
                .iter()
                .map(|a| a.name().to_string())
                .collect(),
            episodes: 1,
            slots: 200,
            seeds: vec![0, 1, 2, 3, 4],
            psi: BTreeMap::new(),
            station_power_w: 10.0,
            output_dir: PathBuf::from("out"),
            synthetic_decision_time_s: None,
            ddqn_checkpoint: None,
            dqn_checkpoint: None,
            train_missing: true,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads `path` and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.scenario.trajectories.iter_mut().for_each(fix);
        self.predictor
            .checkpoints
            .iter_mut()
            .flatten()
            .for_each(fix);
        for p in [
            self.scenario.stations.as_mut(),
            self.predictor.data.as_mut(),
            self.experiment.ddqn_checkpoint.as_mut(),
            self.experiment.dqn_checkpoint.as_mut(),
            Some(&mut self.experiment.output_dir),
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        if s.vehicles == 0 && s.trajectories.is_empty() {
            return Err(Error::Config("scenario needs at least one vehicle".into()));
        }
        if !s.trajectories.is_empty() && s.trajectories.len() != s.vehicles {
            return Err(Error::Config(format!(
                "{} trajectory files for {} vehicles",
                s.trajectories.len(),
                s.vehicles
            )));
        }
        for (what, r) in [
            ("loop_radius_m", s.loop_radius_m),
            ("vehicle_speed_mps", s.vehicle_speed_mps),
            ("server_capacity_hz", s.server_capacity_hz),
            ("local_hz", s.local_hz),
        ] {
            r.validate(what)?;
            if !(r.min > 0.0) {
                return Err(Error::Config(format!("scenario {what} must be positive")));
            }
        }
        self.tasks.validate()?;
        self.weights.validate()?;
        self.predictor.model.validate()?;
        if !(self.predictor.train_fraction > 0.0 && self.predictor.train_fraction < 1.0) {
            return Err(Error::Config(
                "predictor train_fraction must lie in (0, 1)".into(),
            ));
        }
        self.agent.validate()?;
        let e = &self.experiment;
        if e.seeds.is_empty() {
            return Err(Error::Config("experiment seeds must be non-empty".into()));
        }
        for a in &e.algorithms {
            a.parse::<crate::harness::Algorithm>()?;
        }
        for (a, psi) in &e.psi {
            a.parse::<crate::harness::Algorithm>()?;
            if !(0.0..=1.0).contains(psi) {
                return Err(Error::Config(format!(
                    "psi for {a} must lie in [0, 1], got {psi}"
                )));
            }
        }
        if !(e.station_power_w >= 0.0) {
            return Err(Error::Config("station_power_w must be >= 0".into()));
        }
        if e.synthetic_decision_time_s.is_some_and(|t| !(t >= 0.0)) {
            return Err(Error::Config(
                "synthetic_decision_time_s must be >= 0".into(),
            ));
        }
        if e.episodes == 0 || e.slots == 0 {
            return Err(Error::Config(
                "experiment episodes and slots must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Overwrites component seeds with sub-streams of `root`.
    pub fn seeded(mut self, root: u64) -> Self {
        self.predictor.model.seed = derive_seed(root, "predictor", &[]);
        self.agent.seed = derive_seed(root, "agent", &[]);
        self
    }

    pub fn miss_penalty(&self) -> f64 {
        self.scenario
            .miss_penalty
            .unwrap_or(2.0 * self.tasks.deadline_s.max)
    }
}
