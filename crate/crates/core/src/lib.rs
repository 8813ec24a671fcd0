//! Trajectory-prediction-based pre-offloading (TPPD) for MEC-enabled vehicular
//! networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`geo`]: Haversine distance and min-max normalisation.
//! * [`data`]: PLT trajectory and base-station ingestion, cleaning, windowing.
//! * [`nn`]: dense/LSTM layers, MSE, Adam and finite-difference checks.
//! * [`predictor`]: two-layer LSTM next-position predictor and its metrics.
//! * [`simenv`]: slot-stepped MEC environment (delays, channel, allocation).
//! * [`policies`]: DDQN/DQN agents and the exhaustive and static baselines.
//! * [`harness`]: experiment configuration, comparison runs and CSV output.

pub mod config;
pub mod data;
pub mod error;
pub mod geo;
pub mod harness;
pub mod nn;
pub mod policies;
pub mod predictor;
pub mod rng;
pub mod simenv;

pub use config::Config;
pub use error::{Error, Result};
pub use geo::{haversine_distance, GeoPoint, NormalizationBounds, EARTH_RADIUS_M};
