use std::sync::Arc;

use rayon::prelude::*;

use crate::config::Config;
use crate::data::synthetic::{loop_track, scatter_point, sinusoid_track};
use crate::data::{self, StationDefaults, Trajectory, TrajectoryRecord, WindowedDataset};
use crate::error::{Error, Result};
use crate::geo::{GeoPoint, NormalizationBounds};
use crate::policies::{train_agent, CurvePoint, TrainedAgent, Variant};
use crate::predictor::{self, PredictorConfig, TrainedPredictor};
use crate::rng::{derive_seed, substream};
use crate::simenv::{ChannelParams, MecServer, Scenario, Vehicle};

use super::Algorithm;

/// Synthetic loops wobble their radius by this fraction.
pub const LOOP_WOBBLE: f64 = 0.15;
/// Loop centers are scattered this far around the scenario center.
pub const LOOP_CENTER_SPREAD_M: f64 = 300.0;

fn read(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn load_track(path: &std::path::Path, id: &str, max_speed: f64) -> Result<Trajectory> {
    data::clean(&data::parse_plt(id, &read(path)?)?, max_speed)
}

/// Builds the scenario described by `cfg`; random layout draws come from
/// the `scenario` sub-stream of `root`.
pub fn build_scenario(cfg: &Config, root: u64) -> Result<Scenario> {
    let s = &cfg.scenario;
    let mut rng = substream(root, "scenario", &[]);
    let center = GeoPoint::new(s.center_lat, s.center_lon)?;

    let servers = match &s.stations {
        Some(path) => {
            let defaults = StationDefaults {
                capacity_hz: 0.5 * (s.server_capacity_hz.min + s.server_capacity_hz.max),
                range_m: s.server_range_m,
            };
            data::parse_stations(&read(path)?, defaults)?
                .stations
                .into_iter()
                .map(|st| MecServer {
                    id: st.id,
                    position: st.position,
                    capacity_hz: st.capacity_hz,
                    range_m: st.range_m,
                })
                .collect()
        }
        None => (0..s.servers)
            .map(|k| MecServer {
                id: format!("s{k}"),
                position: scatter_point(center, s.server_spread_m, &mut rng),
                capacity_hz: s.server_capacity_hz.sample(&mut rng),
                range_m: s.server_range_m,
            })
            .collect(),
    };

    let mut vehicles = Vec::with_capacity(s.vehicles);
    let mut trajectories = Vec::with_capacity(s.vehicles);
    for i in 0..s.vehicles {
        let id = format!("v{i}");
        let track = match s.trajectories.get(i) {
            Some(path) => load_track(path, &id, s.max_speed_mps)?,
            None => {
                let c = scatter_point(center, LOOP_CENTER_SPREAD_M, &mut rng);
                let radius = s.loop_radius_m.sample(&mut rng);
                let speed = s.vehicle_speed_mps.sample(&mut rng);
                loop_track(&id, c, radius, speed, LOOP_WOBBLE, i % 2 == 1)
            }
        };
        vehicles.push(Vehicle {
            id,
            local_hz: s.local_hz.sample(&mut rng),
            tx_power_w: s.tx_power_w,
            range_m: s.vehicle_range_m,
        });
        trajectories.push(track);
    }

    let channel = ChannelParams {
        subchannels: if cfg.channel.subchannels == 0 {
            s.vehicles
        } else {
            cfg.channel.subchannels
        },
        ..cfg.channel
    };
    let scenario = Scenario {
        servers,
        vehicles,
        trajectories,
        channel,
        tasks: cfg.tasks,
        weights: cfg.weights,
        slot_len_s: s.slot_len_s,
        miss_penalty: cfg.miss_penalty(),
    };
    scenario.validate()?;
    Ok(scenario)
}

/// The track `train-predictor` and `eval-predictor` work on: the configured
/// PLT file, or a noisy synthetic sinusoid.
pub fn predictor_track(cfg: &Config, root: u64) -> Result<Trajectory> {
    let p = &cfg.predictor;
    match &p.data {
        Some(path) => load_track(path, "data", cfg.scenario.max_speed_mps),
        None => {
            let origin = GeoPoint::new(cfg.scenario.center_lat, cfg.scenario.center_lon)?;
            let seed = derive_seed(root, "synthetic-track", &[]);
            Ok(sinusoid_track(
                "synthetic",
                origin,
                p.synthetic_points,
                10.0,
                200.0,
                120.0,
                p.synthetic_noise,
                seed,
            ))
        }
    }
}

/// Chronological train/test split of [`predictor_track`].
pub fn predictor_split(cfg: &Config, root: u64) -> Result<(WindowedDataset, WindowedDataset)> {
    let windows = data::build_windows(&predictor_track(cfg, root)?, cfg.predictor.model.seq_len)?;
    data::split(&windows, cfg.predictor.train_fraction)
}

/// Windows covering one full pass over a looping track, normalised with the
/// track's own bounds.
pub fn loop_windows(t: &Trajectory, seq_len: usize) -> Result<WindowedDataset> {
    let n = t.len();
    if n == 0 {
        return Err(Error::NoRecords);
    }
    let bounds = [
        NormalizationBounds::fit(
            t.positions().map(|p| p.lat_deg),
            data::CONSTANT_BOUNDS_PAD_DEG,
        )?,
        NormalizationBounds::fit(
            t.positions().map(|p| p.lon_deg),
            data::CONSTANT_BOUNDS_PAD_DEG,
        )?,
    ];
    let span = t.records[n - 1].timestamp - t.records[0].timestamp + 1.0;
    let records = (0..n + seq_len)
        .map(|i| TrajectoryRecord {
            position: t.records[i % n].position,
            timestamp: t.records[i % n].timestamp + span * (i / n) as f64,
        })
        .collect();
    data::build_windows_with_bounds(
        &Trajectory::new(t.vehicle_id.clone(), records),
        seq_len,
        bounds,
    )
}

/// One predictor per vehicle, each trained on [`loop_windows`] of its own
/// track. Vehicles train in parallel.
pub fn train_vehicle_predictors(
    scenario: &Scenario,
    cfg: &PredictorConfig,
) -> Result<Vec<TrainedPredictor>> {
    scenario
        .trajectories
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let cfg = PredictorConfig {
                seed: derive_seed(cfg.seed, "vehicle", &[i as u64]),
                ..cfg.clone()
            };
            predictor::train(&loop_windows(t, cfg.seq_len)?, &cfg)
        })
        .collect()
}

/// Trained models a comparison needs.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    /// One per vehicle.
    pub predictors: Option<Vec<TrainedPredictor>>,
    pub ddqn: Option<TrainedAgent>,
    pub dqn: Option<TrainedAgent>,
    pub ddqn_curve: Vec<CurvePoint>,
    pub dqn_curve: Vec<CurvePoint>,
}

fn needs(algorithms: &[Algorithm], which: &[Algorithm]) -> Option<Algorithm> {
    algorithms.iter().copied().find(|a| which.contains(a))
}

/// Loads configured checkpoints and trains whatever else `algorithms`
/// require (when `train_missing` is set). Independent trainings run in
/// parallel.
pub fn prepare_artifacts(
    cfg: &Config,
    scenario: &Arc<Scenario>,
    algorithms: &[Algorithm],
) -> Result<Artifacts> {
    let e = &cfg.experiment;
    let agent = |variant: Variant, path: &Option<std::path::PathBuf>, users: &[Algorithm]| {
        let Some(user) = needs(algorithms, users) else {
            return Ok((None, Vec::new()));
        };
        match path {
            Some(p) => Ok((Some(TrainedAgent::load(p)?), Vec::new())),
            None if e.train_missing => {
                let (a, curve) = train_agent(scenario.clone(), &cfg.agent, variant)?;
                Ok((Some(a), curve))
            }
            None => Err(Error::MissingPolicy(user.name().into())),
        }
    };
    let predictor = || -> Result<Option<Vec<TrainedPredictor>>> {
        if needs(algorithms, &[Algorithm::Tppd]).is_none() {
            return Ok(None);
        }
        match &cfg.predictor.checkpoints {
            Some(paths) => {
                if paths.len() != scenario.num_vehicles() {
                    return Err(Error::Config(format!(
                        "{} predictor checkpoints for {} vehicles",
                        paths.len(),
                        scenario.num_vehicles()
                    )));
                }
                Ok(Some(
                    paths
                        .iter()
                        .map(|p| TrainedPredictor::load(p))
                        .collect::<Result<_>>()?,
                ))
            }
            None if e.train_missing => Ok(Some(train_vehicle_predictors(
                scenario,
                &cfg.predictor.model,
            )?)),
            None => Err(Error::MissingPolicy(Algorithm::Tppd.name().into())),
        }
    };
    let ((ddqn, dqn), predictor) = rayon::join(
        || {
            rayon::join(
                || {
                    agent(
                        Variant::Ddqn,
                        &e.ddqn_checkpoint,
                        &[Algorithm::Tppd, Algorithm::DdqnRt],
                    )
                },
                || agent(Variant::Dqn, &e.dqn_checkpoint, &[Algorithm::DqnRt]),
            )
        },
        predictor,
    );
    let (ddqn, ddqn_curve) = ddqn?;
    let (dqn, dqn_curve) = dqn?;
    Ok(Artifacts {
        predictors: predictor?,
        ddqn,
        dqn,
        ddqn_curve,
        dqn_curve,
    })
}
