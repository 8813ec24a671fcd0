//! Closed-form pieces of the system model: local and offload delay, path-loss
//! channel, OFDM rate, server availability and task priority.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{haversine_distance, GeoPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelParams {
    pub bandwidth_hz: f64,
    /// OFDM subchannels; 0 means one per vehicle.
    pub subchannels: usize,
    pub noise_w: f64,
    pub reference_gain: f64,
    pub reference_distance_m: f64,
    pub path_loss_exponent: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            bandwidth_hz: 20e6,
            subchannels: 0,
            noise_w: 1e-13,
            reference_gain: 1e-4,
            reference_distance_m: 100.0,
            path_loss_exponent: 2.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self, vehicles: usize) -> Result<()> {
        let positive = [
            self.bandwidth_hz,
            self.noise_w,
            self.reference_gain,
            self.reference_distance_m,
            self.path_loss_exponent,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("channel parameters must be positive".into()));
        }
        if self.subchannels < vehicles {
            return Err(Error::Config(format!(
                "{} subchannels cannot serve {vehicles} vehicles",
                self.subchannels
            )));
        }
        Ok(())
    }

    /// Distances below this are clamped before evaluating the path loss.
    pub fn min_distance_m(&self) -> f64 {
        self.reference_distance_m / 100.0
    }
}

/// A computation task. `features` are the raw (priority, importance,
/// required resources) indicators; `priority` is their weighted score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub data_bits: f64,
    pub cycles: f64,
    pub deadline_s: f64,
    pub features: [f64; 3],
    pub priority: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MecServer {
    pub id: String,
    pub position: GeoPoint,
    pub capacity_hz: f64,
    pub range_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: String,
    pub local_hz: f64,
    pub tx_power_w: f64,
    pub range_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorityWeights {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
}

impl Default for PriorityWeights {
    fn default() -> Self {
        PriorityWeights {
            alpha: 0.5,
            beta: 0.3,
            lambda: 0.2,
        }
    }
}

impl PriorityWeights {
    pub fn new(alpha: f64, beta: f64, lambda: f64) -> Result<Self> {
        let w = PriorityWeights {
            alpha,
            beta,
            lambda,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let ws = [self.alpha, self.beta, self.lambda];
        if ws.iter().any(|w| !(*w >= 0.0)) || (ws.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "priority weights {ws:?} must be >= 0 and sum to 1"
            )));
        }
        Ok(())
    }
}

/// Local execution time `c / F^l`.
pub fn local_delay(task: &Task, v: &Vehicle) -> f64 {
    task.cycles / v.local_hz
}

/// Path-loss gain `h0 (d0 / d)^r`, with `d` clamped to `d0 / 100`.
pub fn channel_gain(distance_m: f64, ch: &ChannelParams) -> f64 {
    let d = distance_m.max(ch.min_distance_m());
    ch.reference_gain * (ch.reference_distance_m / d).powf(ch.path_loss_exponent)
}

/// OFDM subchannel rate `(B/N) log2(1 + p h / sigma^2)` in bits/s.
pub fn transmission_rate(tx_power_w: f64, distance_m: f64, ch: &ChannelParams) -> f64 {
    let snr = tx_power_w * channel_gain(distance_m, ch) / ch.noise_w;
    ch.bandwidth_hz / ch.subchannels as f64 * (1.0 + snr).log2()
}

/// Upload plus edge execution time. Infinite when the rate or share is zero.
pub fn offload_delay(task: &Task, rate_bps: f64, share: f64, capacity_hz: f64) -> f64 {
    if !(rate_bps > 0.0) || !(share > 0.0) || !(capacity_hz > 0.0) {
        return f64::INFINITY;
    }
    task.data_bits / rate_bps + task.cycles / (share * capacity_hz)
}

/// Whether `server` is reachable from `position` for vehicle `v`.
pub fn is_available(position: GeoPoint, v: &Vehicle, server: &MecServer) -> bool {
    haversine_distance(position, server.position) <= server.range_m.min(v.range_m)
}

/// Indices of the servers within `min(server range, vehicle range)`, in
/// input order.
pub fn filter_servers(position: GeoPoint, v: &Vehicle, servers: &[MecServer]) -> Vec<usize> {
    servers
        .iter()
        .enumerate()
        .filter(|(_, s)| is_available(position, v, s))
        .map(|(k, _)| k)
        .collect()
}

/// Min-max bounds of the three raw priority indicators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureBounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// Standardises each indicator to [0, 1] and combines them with `w`. A
/// degenerate indicator (max == min) contributes 0.5.
pub fn priority_score(features: [f64; 3], bounds: &FeatureBounds, w: &PriorityWeights) -> f64 {
    let z: Vec<f64> = (0..3)
        .map(|f| {
            let span = bounds.max[f] - bounds.min[f];
            if span > 0.0 {
                ((features[f] - bounds.min[f]) / span).clamp(0.0, 1.0)
            } else {
                0.5
            }
        })
        .collect();
    (w.alpha * z[0] + w.beta * z[1] + w.lambda * z[2]).clamp(0.0, 1.0)
}
