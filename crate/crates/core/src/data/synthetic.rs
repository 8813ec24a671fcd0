//! Synthetic tracks for tests and for scenarios without recorded GPS data.

use rand_distr::{Distribution, Normal};

use super::{Trajectory, TrajectoryRecord};
use crate::geo::GeoPoint;
use crate::rng::substream;

/// Fix-to-fix interval of generated tracks, seconds.
pub const SAMPLE_INTERVAL_S: f64 = 1.0;
const EPOCH: f64 = 1_224_730_384.0; // 2008-10-23 02:53:04 UTC

/// A track heading east at `speed_mps` while oscillating north-south with
/// amplitude `amplitude_m` and period `period` fixes. Gaussian noise with
/// standard deviation `noise_frac * amplitude_m` is added to both axes.
pub fn sinusoid_track(
    vehicle_id: &str,
    origin: GeoPoint,
    n: usize,
    speed_mps: f64,
    amplitude_m: f64,
    period: f64,
    noise_frac: f64,
    seed: u64,
) -> Trajectory {
    let mut rng = substream(seed, "synthetic-sinusoid", &[]);
    let noise = Normal::new(0.0, noise_frac * amplitude_m).expect("finite noise");
    let records = (0..n)
        .map(|i| {
            let t = i as f64;
            let north =
                amplitude_m * (std::f64::consts::TAU * t / period).sin() + noise.sample(&mut rng);
            let east = speed_mps * t * SAMPLE_INTERVAL_S + noise.sample(&mut rng);
            TrajectoryRecord {
                position: origin.offset_m(north, east),
                timestamp: EPOCH + t * SAMPLE_INTERVAL_S,
            }
        })
        .collect();
    Trajectory::new(vehicle_id, records)
}

/// One lap of a closed loop around `center`. The radius is modulated by
/// `wobble` (fraction) on a three-lobe pattern so the path is not a plain
/// circle. Lap length is rounded to a whole number of fixes, so indexing the
/// returned track modulo its length gives a continuous, endless path.
pub fn loop_track(
    vehicle_id: &str,
    center: GeoPoint,
    radius_m: f64,
    speed_mps: f64,
    wobble: f64,
    clockwise: bool,
) -> Trajectory {
    let lap = ((std::f64::consts::TAU * radius_m) / (speed_mps * SAMPLE_INTERVAL_S))
        .round()
        .max(16.0) as usize;
    let dir = if clockwise { -1.0 } else { 1.0 };
    let records = (0..lap)
        .map(|i| {
            let theta = dir * std::f64::consts::TAU * i as f64 / lap as f64;
            let r = radius_m * (1.0 + wobble * (3.0 * theta).sin());
            TrajectoryRecord {
                position: center.offset_m(r * theta.sin(), r * theta.cos()),
                timestamp: EPOCH + i as f64 * SAMPLE_INTERVAL_S,
            }
        })
        .collect();
    Trajectory::new(vehicle_id, records)
}

/// A uniformly random point within `radius_m` of `center`.
pub fn scatter_point(center: GeoPoint, radius_m: f64, rng: &mut impl rand::Rng) -> GeoPoint {
    let r = radius_m * rng.random::<f64>().sqrt();
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    center.offset_m(r * a.sin(), r * a.cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::haversine_distance;

    #[test]
    fn loop_closes_smoothly() {
        let c = GeoPoint::new(39.98, 116.32).unwrap();
        let t = loop_track("v", c, 800.0, 12.0, 0.1, false);
        let n = t.len();
        let step = haversine_distance(t.records[0].position, t.records[1].position);
        let wrap = haversine_distance(t.records[n - 1].position, t.records[0].position);
        assert!((wrap - step).abs() < 0.3 * step, "{wrap} vs {step}");
    }

    #[test]
    fn sinusoid_is_reproducible() {
        let o = GeoPoint::new(39.98, 116.32).unwrap();
        let a = sinusoid_track("v", o, 50, 10.0, 300.0, 120.0, 0.01, 3);
        let b = sinusoid_track("v", o, 50, 10.0, 300.0, 120.0, 0.01, 3);
        assert_eq!(a, b);
        assert!(a
            .records
            .windows(2)
            .all(|w| w[1].timestamp > w[0].timestamp));
    }
}
