//! Discrete-event simulator of overlapping 802.11 cells comparing
//! strongest-SNR association, bit-rate load balancing, and load balancing
//! with an SNR guard on the target AP, scored by video-streaming QoS.
//!
//! The link and QoS formulas in [`radio`] and [`metrics`] are generic over
//! [`Scalar`]; the aliases below fix them to `f64`, which is what the
//! simulator and scenario files use.

pub mod error;
pub mod harness;
pub mod macsim;
pub mod metrics;
pub mod network;
pub mod policies;
pub mod radio;
pub mod scalar;
pub mod traffic;

pub use error::{Error, Result, ScenarioError};
pub use harness::{ExperimentSpec, Row, Scenario};
pub use macsim::{PacketRecord, SimConfig, SimResult};
pub use network::{AccessPoint, ApId, Handoff, NetworkState, Station, StationId};
pub use policies::{BalanceClass, GuardBoundary, PolicyKind, PolicyParams};
pub use scalar::Scalar;

pub type Snr = radio::Snr<f64>;
pub type RadioParams = radio::RadioParams<f64>;
pub type RateTable = radio::RateTable<f64>;
pub type RateTier = radio::RateTier<f64>;
pub type PerModel = radio::PerModel<f64>;
pub type PsnrParams = metrics::PsnrParams<f64>;
pub type QosReport = metrics::QosReport<f64>;
