//! Slot-stepped MEC environment.
//!
//! Each slot every vehicle receives one task and the policy submits a
//! [`JointAction`]. The transition then
//!
//! 1. drops offloads whose server is out of range at the vehicle's *true*
//!    position, or whose server has no uncommitted share left (both fall back
//!    to local execution and are counted),
//! 2. splits each server's uncommitted share among its claimants in
//!    proportion to task priority,
//! 3. evaluates local or offload delay per vehicle against true positions,
//! 4. commits each offload's share until slot `j + ceil(delay / slot_len)`.
//!
//! Decisions may be taken on predicted positions (pre-offloading) while the
//! realised delay always uses the true ones.

use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::Trajectory;
use crate::error::{Error, Result};
use crate::geo::{haversine_distance, GeoPoint};
use crate::predictor::TrainedPredictor;
use crate::rng::substream;

pub mod model;

pub use model::{
    channel_gain, filter_servers, is_available, local_delay, offload_delay, priority_score,
    transmission_rate, ChannelParams, FeatureBounds, MecServer, PriorityWeights, Task, Vehicle,
};

/// Floor on the priority weight used for share splitting, so a zero score
/// still receives a (small) positive share.
pub const MIN_PRIORITY_WEIGHT: f64 = 1e-3;

/// Shares at or below this are treated as a fully committed server.
pub const SHARE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Choice {
    Local,
    Offload(usize),
}

impl Choice {
    pub fn server(&self) -> Option<usize> {
        match self {
            Choice::Local => None,
            Choice::Offload(k) => Some(*k),
        }
    }
}

/// One choice per vehicle.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointAction(pub Vec<Choice>);

impl JointAction {
    pub fn all_local(vehicles: usize) -> Self {
        JointAction(vec![Choice::Local; vehicles])
    }

    /// The `x_i` offload indicators.
    pub fn offload_flags(&self) -> Vec<u8> {
        self.0
            .iter()
            .map(|c| u8::from(c.server().is_some()))
            .collect()
    }

    /// The `y_{i,k}` one-hot server indicators (all zero for local).
    pub fn server_one_hot(&self, servers: usize) -> Vec<Vec<u8>> {
        self.0
            .iter()
            .map(|c| {
                (0..servers)
                    .map(|k| u8::from(c.server() == Some(k)))
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformRange {
    pub min: f64,
    pub max: f64,
}

impl UniformRange {
    pub const fn new(min: f64, max: f64) -> Self {
        UniformRange { min, max }
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(Error::Config(format!(
                "{what}: invalid range [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut impl rand::Rng) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..=self.max)
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }
}

/// Per-slot task generator ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskDistribution {
    pub data_bits: UniformRange,
    pub cycles: UniformRange,
    pub deadline_s: UniformRange,
    /// Raw (priority, importance, required resources) indicators.
    pub features: [UniformRange; 3],
}

impl Default for TaskDistribution {
    fn default() -> Self {
        TaskDistribution {
            data_bits: UniformRange::new(0.2e6, 2e6),
            cycles: UniformRange::new(0.2e9, 1e9),
            deadline_s: UniformRange::new(0.5, 3.0),
            features: [
                UniformRange::new(1.0, 5.0),
                UniformRange::new(0.0, 1.0),
                UniformRange::new(0.0, 1.0),
            ],
        }
    }
}

impl TaskDistribution {
    pub fn validate(&self) -> Result<()> {
        self.data_bits.validate("task data_bits")?;
        self.cycles.validate("task cycles")?;
        self.deadline_s.validate("task deadline_s")?;
        for (k, f) in self.features.iter().enumerate() {
            f.validate(&format!("task feature {k}"))?;
        }
        if self.data_bits.min < 0.0 || self.cycles.min <= 0.0 || self.deadline_s.min <= 0.0 {
            return Err(Error::Config(
                "tasks need l >= 0, c > 0, deadline > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn feature_bounds(&self) -> FeatureBounds {
        FeatureBounds {
            min: [
                self.features[0].min,
                self.features[1].min,
                self.features[2].min,
            ],
            max: [
                self.features[0].max,
                self.features[1].max,
                self.features[2].max,
            ],
        }
    }
}

/// Static description of a simulation: entities, physics and task model.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub servers: Vec<MecServer>,
    pub vehicles: Vec<Vehicle>,
    /// One looping track per vehicle; slot `j` sits on record `j` (mod len).
    pub trajectories: Vec<Trajectory>,
    pub channel: ChannelParams,
    pub tasks: TaskDistribution,
    pub weights: PriorityWeights,
    pub slot_len_s: f64,
    pub miss_penalty: f64,
}

impl Scenario {
    pub fn num_vehicles(&self) -> usize {
        self.vehicles.len()
    }

    pub fn num_servers(&self) -> usize {
        self.servers.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.vehicles.is_empty() {
            return Err(Error::Config("scenario has no vehicles".into()));
        }
        if self.trajectories.len() != self.vehicles.len() {
            return Err(Error::Config(format!(
                "{} trajectories for {} vehicles",
                self.trajectories.len(),
                self.vehicles.len()
            )));
        }
        if self.trajectories.iter().any(|t| t.is_empty()) {
            return Err(Error::Config("empty vehicle trajectory".into()));
        }
        for v in &self.vehicles {
            if !(v.local_hz > 0.0 && v.tx_power_w > 0.0 && v.range_m > 0.0) {
                return Err(Error::Config(format!(
                    "vehicle {} needs positive F^l, p and range",
                    v.id
                )));
            }
        }
        for s in &self.servers {
            if !(s.capacity_hz > 0.0 && s.range_m > 0.0) {
                return Err(Error::Config(format!(
                    "server {} needs positive capacity and range",
                    s.id
                )));
            }
        }
        self.channel.validate(self.vehicles.len())?;
        self.tasks.validate()?;
        self.weights.validate()?;
        if !(self.slot_len_s > 0.0) || !(self.miss_penalty >= 0.0) {
            return Err(Error::Config(
                "slot length must be > 0 and miss penalty >= 0".into(),
            ));
        }
        Ok(())
    }

    /// True position of vehicle `v` at trajectory index `idx` (wrapping).
    pub fn position_at(&self, v: usize, idx: u64) -> GeoPoint {
        let t = &self.trajectories[v];
        t.records[(idx % t.len() as u64) as usize].position
    }

    pub fn distance(&self, v_pos: GeoPoint, server: usize) -> f64 {
        haversine_distance(v_pos, self.servers[server].position)
    }

    /// `avail[i][k]`: server `k` reachable from `positions[i]`.
    pub fn availability(&self, positions: &[GeoPoint]) -> Vec<Vec<bool>> {
        positions
            .iter()
            .zip(&self.vehicles)
            .map(|(p, v)| {
                self.servers
                    .iter()
                    .map(|s| is_available(*p, v, s))
                    .collect()
            })
            .collect()
    }

    /// Draws the task of vehicle `vehicle` in `slot` of `episode`.
    pub fn spawn_task(&self, seed: u64, episode: u64, slot: u64, vehicle: usize) -> Task {
        let mut rng = substream(seed, "tasks", &[episode, slot, vehicle as u64]);
        let d = &self.tasks;
        let data_bits = d.data_bits.sample(&mut rng);
        let cycles = d.cycles.sample(&mut rng);
        let deadline_s = d.deadline_s.sample(&mut rng);
        let features = [
            d.features[0].sample(&mut rng),
            d.features[1].sample(&mut rng),
            d.features[2].sample(&mut rng),
        ];
        Task {
            data_bits,
            cycles,
            deadline_s,
            features,
            priority: priority_score(features, &d.feature_bounds(), &self.weights),
        }
    }

    pub fn spawn_tasks(&self, seed: u64, episode: u64, slot: u64) -> Vec<Task> {
        (0..self.num_vehicles())
            .map(|v| self.spawn_task(seed, episode, slot, v))
            .collect()
    }
}

/// A share of one server held by a running task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Commitment {
    pub vehicle: usize,
    pub share: f64,
    /// The share becomes free at the start of this slot.
    pub release_slot: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ServerLoad {
    pub commitments: Vec<Commitment>,
}

impl ServerLoad {
    pub fn committed(&self) -> f64 {
        self.commitments.iter().map(|c| c.share).sum()
    }

    pub fn free(&self) -> f64 {
        (1.0 - self.committed()).max(0.0)
    }

    pub fn release_until(&mut self, slot: u64) {
        self.commitments.retain(|c| c.release_slot > slot);
    }
}

/// Everything a policy may see at the start of a slot, plus the true
/// positions the transition evaluates against.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotState {
    pub episode: u64,
    pub slot: u64,
    pub tasks: Vec<Task>,
    pub true_positions: Vec<GeoPoint>,
    /// Positions the decision is based on: true, or predicted one slot ahead.
    pub decision_positions: Vec<GeoPoint>,
    pub loads: Vec<ServerLoad>,
}

impl SlotState {
    pub fn free_shares(&self) -> Vec<f64> {
        self.loads.iter().map(ServerLoad::free).collect()
    }
}

/// Why an offload request was executed locally instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fallback {
    /// Server out of range at the true position.
    Unreachable,
    /// Server had no uncommitted share.
    Oversubscribed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleOutcome {
    pub requested: Choice,
    pub executed: Choice,
    pub fallback: Option<Fallback>,
    pub share: f64,
    pub rate_bps: f64,
    pub delay_s: f64,
    pub deadline_met: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotOutcome {
    pub episode: u64,
    pub slot: u64,
    pub vehicles: Vec<VehicleOutcome>,
    pub total_delay: f64,
    pub misses: usize,
    pub fallbacks: usize,
}

/// Server shares granted this slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// `Some(share)` for vehicles offloading successfully, `None` otherwise.
    pub shares: Vec<Option<f64>>,
    /// Vehicles whose server had nothing left to give.
    pub oversubscribed: Vec<usize>,
}

/// Priority-proportional split of each server's free share among the
/// vehicles choosing it. `reachable[i]` = false drops vehicle `i`'s request.
pub fn allocate(
    action: &JointAction,
    tasks: &[Task],
    free: &[f64],
    reachable: &[bool],
) -> Allocation {
    let n = action.0.len();
    let mut shares = vec![None; n];
    let mut oversubscribed = Vec::new();
    for (k, &free_k) in free.iter().enumerate() {
        let claimants: Vec<usize> = (0..n)
            .filter(|&i| reachable[i] && action.0[i] == Choice::Offload(k))
            .collect();
        if claimants.is_empty() {
            continue;
        }
        if free_k <= SHARE_EPS {
            oversubscribed.extend(&claimants);
            continue;
        }
        let weight = |i: usize| tasks[i].priority.max(MIN_PRIORITY_WEIGHT);
        let total: f64 = claimants.iter().map(|&i| weight(i)).sum();
        for &i in &claimants {
            shares[i] = Some(free_k * weight(i) / total);
        }
    }
    oversubscribed.sort_unstable();
    Allocation {
        shares,
        oversubscribed,
    }
}

pub fn validate_action(scenario: &Scenario, action: &JointAction) -> Result<()> {
    if action.0.len() != scenario.num_vehicles() {
        return Err(Error::Action(format!(
            "{} choices for {} vehicles",
            action.0.len(),
            scenario.num_vehicles()
        )));
    }
    for (i, c) in action.0.iter().enumerate() {
        if let Choice::Offload(k) = c {
            if *k >= scenario.num_servers() {
                return Err(Error::Action(format!(
                    "vehicle {i} targets unknown server {k}"
                )));
            }
        }
    }
    Ok(())
}

/// Pure slot transition: the outcome of `action` in `state`, and the server
/// loads after committing this slot's offloads (before any release).
pub fn transition(
    scenario: &Scenario,
    state: &SlotState,
    action: &JointAction,
) -> Result<(SlotOutcome, Vec<ServerLoad>)> {
    validate_action(scenario, action)?;
    let n = scenario.num_vehicles();
    let reachable: Vec<bool> = (0..n)
        .map(|i| match action.0[i] {
            Choice::Local => false,
            Choice::Offload(k) => is_available(
                state.true_positions[i],
                &scenario.vehicles[i],
                &scenario.servers[k],
            ),
        })
        .collect();
    let alloc = allocate(action, &state.tasks, &state.free_shares(), &reachable);

    let mut loads = state.loads.clone();
    let mut vehicles = Vec::with_capacity(n);
    for i in 0..n {
        let task = &state.tasks[i];
        let v = &scenario.vehicles[i];
        let requested = action.0[i];
        let outcome = match (requested, alloc.shares[i]) {
            (Choice::Offload(k), Some(share)) => {
                let d = scenario.distance(state.true_positions[i], k);
                let rate = transmission_rate(v.tx_power_w, d, &scenario.channel);
                let delay = offload_delay(task, rate, share, scenario.servers[k].capacity_hz);
                let slots = (delay / scenario.slot_len_s).ceil().max(1.0);
                let release_slot = if slots.is_finite() {
                    state.slot.saturating_add(slots as u64)
                } else {
                    u64::MAX
                };
                loads[k].commitments.push(Commitment {
                    vehicle: i,
                    share,
                    release_slot,
                });
                VehicleOutcome {
                    requested,
                    executed: requested,
                    fallback: None,
                    share,
                    rate_bps: rate,
                    delay_s: delay,
                    deadline_met: delay <= task.deadline_s,
                }
            }
            _ => {
                let fallback = match requested {
                    Choice::Local => None,
                    Choice::Offload(_) if !reachable[i] => Some(Fallback::Unreachable),
                    Choice::Offload(_) => Some(Fallback::Oversubscribed),
                };
                let delay = local_delay(task, v);
                VehicleOutcome {
                    requested,
                    executed: Choice::Local,
                    fallback,
                    share: 0.0,
                    rate_bps: 0.0,
                    delay_s: delay,
                    deadline_met: delay <= task.deadline_s,
                }
            }
        };
        vehicles.push(outcome);
    }
    let total_delay = vehicles.iter().map(|o| o.delay_s).sum();
    let misses = vehicles.iter().filter(|o| !o.deadline_met).count();
    let fallbacks = vehicles.iter().filter(|o| o.fallback.is_some()).count();
    Ok((
        SlotOutcome {
            episode: state.episode,
            slot: state.slot,
            vehicles,
            total_delay,
            misses,
            fallbacks,
        },
        loads,
    ))
}

/// `-(total delay + penalty * deadline misses)`.
pub fn reward(outcome: &SlotOutcome, miss_penalty: f64) -> f64 {
    -(outcome.total_delay + miss_penalty * outcome.misses as f64)
}

/// Where decision-time positions come from.
#[derive(Clone, Copy)]
pub enum PositionSource<'a> {
    /// The true position of the slot being decided.
    True,
    /// One-step-ahead prediction from the preceding fixes, one model per vehicle.
    Predicted(&'a [TrainedPredictor]),
}

/// A running episode.
#[derive(Debug, Clone)]
pub struct Env {
    scenario: Arc<Scenario>,
    seed: u64,
    episode: u64,
    offsets: Vec<u64>,
    state: SlotState,
    digest: u64,
}

fn fold_digest(mut h: u64, bits: impl IntoIterator<Item = u64>) -> u64 {
    for b in bits {
        h ^= b;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

impl Env {
    /// Starts `episode`; vehicle start points along their tracks are drawn
    /// from `seed`.
    pub fn new(scenario: Arc<Scenario>, seed: u64, episode: u64) -> Result<Self> {
        scenario.validate()?;
        let mut rng = substream(seed, "start", &[episode]);
        let offsets = scenario
            .trajectories
            .iter()
            .map(|t| rng.random_range(0..t.len() as u64))
            .collect();
        let mut env = Env {
            state: SlotState {
                episode,
                slot: 0,
                tasks: Vec::new(),
                true_positions: Vec::new(),
                decision_positions: Vec::new(),
                loads: vec![ServerLoad::default(); scenario.num_servers()],
            },
            scenario,
            seed,
            episode,
            offsets,
            digest: 0xcbf2_9ce4_8422_2325,
        };
        env.enter_slot(0);
        Ok(env)
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn slot(&self) -> u64 {
        self.state.slot
    }

    /// Trajectory index of vehicle `v` at `slot` of this episode.
    pub fn track_index(&self, v: usize, slot: u64) -> u64 {
        self.offsets[v] + slot
    }

    fn enter_slot(&mut self, slot: u64) {
        let sc = &self.scenario;
        self.state.slot = slot;
        self.state.tasks = sc.spawn_tasks(self.seed, self.episode, slot);
        self.state.true_positions = (0..sc.num_vehicles())
            .map(|v| sc.position_at(v, self.track_index(v, slot)))
            .collect();
        self.state.decision_positions = self.state.true_positions.clone();
        for load in &mut self.state.loads {
            load.release_until(slot);
        }
        let bits = self
            .state
            .tasks
            .iter()
            .flat_map(|t| [t.data_bits, t.cycles, t.deadline_s, t.priority])
            .chain(
                self.state
                    .true_positions
                    .iter()
                    .flat_map(|p| [p.lat_deg, p.lon_deg]),
            )
            .map(f64::to_bits);
        self.digest = fold_digest(self.digest, bits);
    }

    /// The `n` true fixes preceding the current slot, oldest first.
    pub fn history(&self, v: usize, n: usize) -> Vec<GeoPoint> {
        let len = self.scenario.trajectories[v].len() as u64;
        let now = self.track_index(v, self.state.slot) % len;
        (1..=n as u64)
            .rev()
            .map(|back| {
                self.scenario
                    .position_at(v, now + len * (back / len + 1) - back)
            })
            .collect()
    }

    /// The current slot's state with decision positions from `source`.
    pub fn observe(&self, source: PositionSource<'_>) -> Result<SlotState> {
        let mut s = self.state.clone();
        if let PositionSource::Predicted(models) = source {
            if models.len() != self.scenario.num_vehicles() {
                return Err(Error::Config(format!(
                    "{} predictors for {} vehicles",
                    models.len(),
                    self.scenario.num_vehicles()
                )));
            }
            s.decision_positions = models
                .iter()
                .enumerate()
                .map(|(v, m)| m.predict_next(&self.history(v, m.config.seq_len)))
                .collect::<Result<_>>()?;
        }
        Ok(s)
    }

    pub fn state(&self) -> &SlotState {
        &self.state
    }

    /// Applies `action` to the current slot and advances to the next.
    pub fn step(&mut self, action: &JointAction) -> Result<SlotOutcome> {
        let (outcome, loads) = transition(&self.scenario, &self.state, action)?;
        self.state.loads = loads;
        self.enter_slot(self.state.slot + 1);
        Ok(outcome)
    }

    /// Digest of every task and true position this episode has produced.
    pub fn stream_digest(&self) -> u64 {
        self.digest
    }
}

#[cfg(test)]
mod tests;
