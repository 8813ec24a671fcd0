use crate::simenv::{Scenario, SlotState};

/// Fixed-length state features, all in `[0, 1]`:
///
/// * per vehicle: `l`, `c`, `ν` divided by their configured maxima, and `Z`;
/// * per vehicle and server: availability bit, then `min(d / range, 1)`
///   where `range = min(d^s, d^v)` (so unavailable servers read `1.0`);
/// * per server: uncommitted share.
///
/// Positions are the state's decision positions.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEncoder {
    vehicles: usize,
    servers: usize,
    task_max: [f64; 3],
}

impl StateEncoder {
    pub fn new(scenario: &Scenario) -> Self {
        let t = &scenario.tasks;
        StateEncoder {
            vehicles: scenario.num_vehicles(),
            servers: scenario.num_servers(),
            task_max: [t.data_bits.max, t.cycles.max, t.deadline_s.max],
        }
    }

    pub fn dim(&self) -> usize {
        4 * self.vehicles + 2 * self.vehicles * self.servers + self.servers
    }

    pub fn encode(&self, scenario: &Scenario, state: &SlotState) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        for t in &state.tasks {
            let raw = [t.data_bits, t.cycles, t.deadline_s];
            for (v, m) in raw.iter().zip(self.task_max) {
                x.push(if m > 0.0 {
                    (v / m).clamp(0.0, 1.0)
                } else {
                    0.0
                });
            }
            x.push(t.priority.clamp(0.0, 1.0));
        }
        for (i, pos) in state.decision_positions.iter().enumerate() {
            let v = &scenario.vehicles[i];
            for (k, s) in scenario.servers.iter().enumerate() {
                let range = s.range_m.min(v.range_m);
                let d = scenario.distance(*pos, k);
                x.push(if d <= range { 1.0 } else { 0.0 });
                x.push((d / range).min(1.0));
            }
        }
        x.extend(state.free_shares().iter().map(|f| f.clamp(0.0, 1.0)));
        x
    }
}
