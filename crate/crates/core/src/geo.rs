//! Great-circle distance and min-max normalisation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius in metres.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat_deg: f64,
    pub lon_deg: f64,
}

impl GeoPoint {
    pub fn new(lat_deg: f64, lon_deg: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat_deg) || !(-180.0..=180.0).contains(&lon_deg) {
            return Err(Error::InvalidCoordinate {
                lat: lat_deg,
                lon: lon_deg,
            });
        }
        Ok(GeoPoint { lat_deg, lon_deg })
    }

    /// Builds a point without range checks, clamping latitude and wrapping
    /// longitude into range. Used for model outputs, which are unconstrained.
    pub fn clamped(lat_deg: f64, lon_deg: f64) -> Self {
        let lat = lat_deg.clamp(-90.0, 90.0);
        let mut lon = (lon_deg + 180.0).rem_euclid(360.0) - 180.0;
        if lon == -180.0 && lon_deg > 0.0 {
            lon = 180.0;
        }
        GeoPoint {
            lat_deg: lat,
            lon_deg: lon,
        }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.lat_deg, self.lon_deg]
    }

    /// Offsets this point by `north_m`/`east_m` metres on a local tangent plane.
    pub fn offset_m(&self, north_m: f64, east_m: f64) -> GeoPoint {
        let dlat = (north_m / EARTH_RADIUS_M).to_degrees();
        let dlon = (east_m / (EARTH_RADIUS_M * self.lat_deg.to_radians().cos())).to_degrees();
        GeoPoint::clamped(self.lat_deg + dlat, self.lon_deg + dlon)
    }
}

/// Haversine great-circle distance in metres (atan2 form).
pub fn haversine_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let phi1 = a.lat_deg.to_radians();
    let phi2 = b.lat_deg.to_radians();
    let dphi = phi2 - phi1;
    let dlambda = (b.lon_deg - a.lon_deg).to_radians();

    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    // rounding can push h a hair outside [0, 1]
    let h = h.clamp(0.0, 1.0);
    let c = 2.0 * h.sqrt().atan2((1.0 - h).sqrt());
    EARTH_RADIUS_M * c
}

/// Min-max bounds for one scalar dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationBounds {
    d_min: f64,
    d_max: f64,
}

impl NormalizationBounds {
    pub fn new(d_min: f64, d_max: f64) -> Result<Self> {
        if !(d_max > d_min) || !d_min.is_finite() || !d_max.is_finite() {
            return Err(Error::DegenerateBounds {
                min: d_min,
                max: d_max,
            });
        }
        Ok(NormalizationBounds { d_min, d_max })
    }

    /// Bounds over `values`. A constant series gets a symmetric band of
    /// half-width `pad` so that it normalises to 0.5.
    pub fn fit(values: impl IntoIterator<Item = f64>, pad: f64) -> Result<Self> {
        let (lo, hi) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        if lo == hi {
            NormalizationBounds::new(lo - pad, hi + pad)
        } else {
            NormalizationBounds::new(lo, hi)
        }
    }

    pub fn min(&self) -> f64 {
        self.d_min
    }

    pub fn max(&self) -> f64 {
        self.d_max
    }

    pub fn span(&self) -> f64 {
        self.d_max - self.d_min
    }

    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.d_min) / (self.d_max - self.d_min)
    }

    pub fn denormalize(&self, u: f64) -> f64 {
        self.d_min + u * (self.d_max - self.d_min)
    }
}
