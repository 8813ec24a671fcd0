use rand::Rng as _;

use super::{ActionCodec, Policy};
use crate::error::{Error, Result};
use crate::rng::{substream, Rng};
use crate::simenv::{transition, transmission_rate, Choice, JointAction, Scenario, SlotState};

/// Exhaustive search is refused above `2^EXHAUSTIVE_MAX_BITS` joint actions.
pub const EXHAUSTIVE_MAX_BITS: f64 = 20.0;

/// Always executes locally.
#[derive(Debug, Clone, Copy, Default)]
pub struct AllLocal;

impl Policy for AllLocal {
    fn decide(&mut self, scenario: &Scenario, _state: &SlotState) -> Result<JointAction> {
        Ok(JointAction::all_local(scenario.num_vehicles()))
    }
}

/// Offloads every task to the available server with the best rate.
#[derive(Debug, Clone, Copy, Default)]
pub struct AllOffload;

impl Policy for AllOffload {
    fn decide(&mut self, scenario: &Scenario, state: &SlotState) -> Result<JointAction> {
        let avail = scenario.availability(&state.decision_positions);
        let choices = state
            .decision_positions
            .iter()
            .enumerate()
            .map(|(i, pos)| {
                let p = scenario.vehicles[i].tx_power_w;
                let mut best: Option<(usize, f64)> = None;
                for k in (0..scenario.num_servers()).filter(|&k| avail[i][k]) {
                    let rate = transmission_rate(p, scenario.distance(*pos, k), &scenario.channel);
                    if best.is_none_or(|(_, r)| rate > r) {
                        best = Some((k, rate));
                    }
                }
                best.map_or(Choice::Local, |(k, _)| Choice::Offload(k))
            })
            .collect();
        Ok(JointAction(choices))
    }
}

/// Uniform over valid joint actions. The valid set is a product of
/// per-vehicle choice sets, so sampling each vehicle independently is exact.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        RandomPolicy {
            rng: substream(seed, "policy", &[0]),
        }
    }
}

impl Policy for RandomPolicy {
    fn decide(&mut self, scenario: &Scenario, state: &SlotState) -> Result<JointAction> {
        let avail = scenario.availability(&state.decision_positions);
        let choices = avail
            .iter()
            .map(|row| {
                let options: Vec<usize> = (0..row.len()).filter(|&k| row[k]).collect();
                match self.rng.random_range(0..=options.len()) {
                    0 => Choice::Local,
                    j => Choice::Offload(options[j - 1]),
                }
            })
            .collect();
        Ok(JointAction(choices))
    }
}

/// Evaluates every valid joint action and keeps the one with the smallest
/// realised total delay (lowest index on ties).
#[derive(Debug, Clone)]
pub struct Exhaustive {
    codec: ActionCodec,
}

impl Exhaustive {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        let bits = scenario.num_vehicles() as f64 * ((scenario.num_servers() + 1) as f64).log2();
        if bits > EXHAUSTIVE_MAX_BITS {
            return Err(Error::ActionSpaceTooLarge {
                actions: ((scenario.num_servers() + 1) as u128)
                    .checked_pow(scenario.num_vehicles() as u32)
                    .unwrap_or(u128::MAX),
            });
        }
        Ok(Exhaustive {
            codec: ActionCodec::new(scenario.num_vehicles(), scenario.num_servers())?,
        })
    }

    /// Best action index and its total delay.
    pub fn search(&self, scenario: &Scenario, state: &SlotState) -> Result<(usize, f64)> {
        let mask = self
            .codec
            .mask(&scenario.availability(&state.decision_positions));
        let mut best = (0, f64::INFINITY);
        for (idx, _) in mask.iter().enumerate().filter(|(_, ok)| **ok) {
            let (out, _) = transition(scenario, state, &self.codec.decode(idx)?)?;
            if out.total_delay < best.1 {
                best = (idx, out.total_delay);
            }
        }
        Ok(best)
    }
}

impl Policy for Exhaustive {
    fn decide(&mut self, scenario: &Scenario, state: &SlotState) -> Result<JointAction> {
        let (idx, _) = self.search(scenario, state)?;
        self.codec.decode(idx)
    }
}
