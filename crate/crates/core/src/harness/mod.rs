//! Experiment orchestration: scenario setup, per-algorithm evaluation runs,
//! the decision-time penalty and power accounting, and CSV output.
//!
//! For every run, `penalized_s = completion_s + decision_s * psi` and
//! `power = penalized_s * J`.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Config, ExperimentConfig};
use crate::error::{Error, Result};
use crate::policies::{AllLocal, AllOffload, Exhaustive, Policy, RandomPolicy, TrainedAgent};
use crate::rng::derive_seed;
use crate::simenv::{Choice, Env, PositionSource, Scenario};

pub mod output;
pub mod setup;

pub use output::{
    summarize, write_comparison, write_learning_curve, write_summary, write_trace, Summary,
    TraceRow,
};
pub use setup::{build_scenario, prepare_artifacts, train_vehicle_predictors, Artifacts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    /// Trained DDQN deciding on predicted positions, one slot ahead.
    Tppd,
    DdqnRt,
    DqnRt,
    ExhaustiveRt,
    Random,
    AllLocal,
    AllOffload,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Tppd,
        Algorithm::DdqnRt,
        Algorithm::DqnRt,
        Algorithm::ExhaustiveRt,
        Algorithm::Random,
        Algorithm::AllLocal,
        Algorithm::AllOffload,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Tppd => "tppd",
            Algorithm::DdqnRt => "ddqn_rt",
            Algorithm::DqnRt => "dqn_rt",
            Algorithm::ExhaustiveRt => "exhaustive_rt",
            Algorithm::Random => "random",
            Algorithm::AllLocal => "all_local",
            Algorithm::AllOffload => "all_offload",
        }
    }

    /// Real-time searching/learned deciders pay half their decision time;
    /// pre-offloading and static rules pay none.
    pub fn default_psi(&self) -> f64 {
        match self {
            Algorithm::DdqnRt | Algorithm::DqnRt | Algorithm::ExhaustiveRt => 0.5,
            Algorithm::Tppd | Algorithm::Random | Algorithm::AllLocal | Algorithm::AllOffload => {
                0.0
            }
        }
    }

    pub fn psi(&self, e: &ExperimentConfig) -> f64 {
        e.psi
            .get(self.name())
            .copied()
            .unwrap_or_else(|| self.default_psi())
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

pub fn parse_algorithms(names: &[String]) -> Result<Vec<Algorithm>> {
    names.iter().map(|n| n.parse()).collect()
}

/// Raw totals of one algorithm over all episodes of one seed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunStats {
    pub completion_s: f64,
    pub decision_s: f64,
    pub decisions: u64,
    pub misses: u64,
    pub fallbacks: u64,
    /// Digest of the task and position streams the run observed.
    pub digest: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub completion_s: f64,
    pub decision_s: f64,
    pub psi: f64,
    pub penalized_s: f64,
    pub power: f64,
    pub misses: u64,
    #[serde(skip)]
    pub digest: u64,
}

impl RunResult {
    pub fn new(
        algorithm: Algorithm,
        seed: u64,
        stats: &RunStats,
        psi: f64,
        station_power_w: f64,
    ) -> Self {
        let penalized_s = stats.completion_s + stats.decision_s * psi;
        RunResult {
            algorithm,
            seed,
            completion_s: stats.completion_s,
            decision_s: stats.decision_s,
            psi,
            penalized_s,
            power: penalized_s * station_power_w,
            misses: stats.misses,
            digest: stats.digest,
        }
    }
}

/// Environment seed of evaluation seed `seed` under `root`.
pub fn eval_env_seed(root: u64, seed: u64) -> u64 {
    derive_seed(root, "tasks", &[seed])
}

fn agent_for<'a>(alg: Algorithm, a: &'a Option<TrainedAgent>) -> Result<&'a TrainedAgent> {
    a.as_ref()
        .ok_or_else(|| Error::MissingPolicy(alg.name().into()))
}

/// Evaluates `alg` for `exp.episodes` episodes of `exp.slots` slots on the
/// environment seeded by `env_seed`. `policy_seed` seeds the random policy.
/// Per-vehicle trace rows are appended to `trace` when given.
pub fn run_algorithm(
    alg: Algorithm,
    scenario: &Arc<Scenario>,
    artifacts: &Artifacts,
    env_seed: u64,
    policy_seed: u64,
    exp: &ExperimentConfig,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> Result<RunStats> {
    let sc = &**scenario;
    let ddqn = || agent_for(alg, &artifacts.ddqn);
    let mut policy: Box<dyn Policy + '_> = match alg {
        Algorithm::Tppd | Algorithm::DdqnRt => Box::new(ddqn()?.greedy(sc)?),
        Algorithm::DqnRt => Box::new(agent_for(alg, &artifacts.dqn)?.greedy(sc)?),
        Algorithm::ExhaustiveRt => Box::new(Exhaustive::new(sc)?),
        Algorithm::Random => Box::new(RandomPolicy::new(policy_seed)),
        Algorithm::AllLocal => Box::new(AllLocal),
        Algorithm::AllOffload => Box::new(AllOffload),
    };
    let source = if alg == Algorithm::Tppd {
        let predictors = artifacts
            .predictors
            .as_deref()
            .ok_or_else(|| Error::MissingPolicy(alg.name().into()))?;
        PositionSource::Predicted(predictors)
    } else {
        PositionSource::True
    };

    let mut stats = RunStats {
        digest: 0xcbf2_9ce4_8422_2325,
        ..RunStats::default()
    };
    for episode in 0..exp.episodes {
        let mut env = Env::new(scenario.clone(), env_seed, episode)?;
        for _ in 0..exp.slots {
            let started = Instant::now();
            let state = env.observe(source)?;
            let action = policy.decide(sc, &state)?;
            stats.decision_s += started.elapsed().as_secs_f64();
            stats.decisions += 1;

            let out = env.step(&action)?;
            stats.completion_s += out.total_delay;
            stats.misses += out.misses as u64;
            stats.fallbacks += out.fallbacks as u64;
            if let Some(rows) = trace.as_deref_mut() {
                let slot = episode * exp.slots + out.slot;
                for (i, v) in out.vehicles.iter().enumerate() {
                    rows.push(TraceRow {
                        slot,
                        vehicle: sc.vehicles[i].id.clone(),
                        action: match v.executed {
                            Choice::Local => "local",
                            Choice::Offload(_) => "offload",
                        },
                        server: v
                            .executed
                            .server()
                            .map(|k| sc.servers[k].id.clone())
                            .unwrap_or_default(),
                        omega: v.share,
                        rate: v.rate_bps,
                        delay: v.delay_s,
                        deadline_met: v.deadline_met,
                    });
                }
            }
        }
        stats.digest = (stats.digest ^ env.stream_digest()).wrapping_mul(0x0000_0100_0000_01B3);
    }
    if let Some(t) = exp.synthetic_decision_time_s {
        stats.decision_s = t * stats.decisions as f64;
    }
    Ok(stats)
}

/// Every configured algorithm on every seed, fanned out across threads.
/// Results are sorted by algorithm, then seed. Fails if two algorithms saw
/// different task or position streams for the same seed.
pub fn run_comparison(
    cfg: &Config,
    root: u64,
    scenario: &Arc<Scenario>,
    artifacts: &Artifacts,
) -> Result<Vec<RunResult>> {
    let exp = &cfg.experiment;
    let algorithms = parse_algorithms(&exp.algorithms)?;
    let jobs: Vec<(Algorithm, u64)> = algorithms
        .iter()
        .flat_map(|&a| exp.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let mut results = jobs
        .par_iter()
        .map(|&(alg, seed)| {
            let stats = run_algorithm(
                alg,
                scenario,
                artifacts,
                eval_env_seed(root, seed),
                derive_seed(root, "policy", &[seed]),
                exp,
                None,
            )?;
            Ok(RunResult::new(
                alg,
                seed,
                &stats,
                alg.psi(exp),
                exp.station_power_w,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    results.sort_by(|a, b| (a.algorithm, a.seed).cmp(&(b.algorithm, b.seed)));
    check_common_streams(&results)?;
    Ok(results)
}

/// All runs of one seed must carry the same stream digest.
pub fn check_common_streams(results: &[RunResult]) -> Result<()> {
    for r in results {
        if let Some(other) = results
            .iter()
            .find(|o| o.seed == r.seed && o.digest != r.digest)
        {
            return Err(Error::Invariant(format!(
                "seed {}: {} and {} observed different task streams",
                r.seed, r.algorithm, other.algorithm
            )));
        }
    }
    Ok(())
}
