//! Multi-hop wireless sensor network time synchronization through
//! time-translating gateways.
//!
//! Sensors only listen to beacons to recover the upstream clock frequency
//! (cumulative ratio estimator) and piggyback a reverse two-way exchange on
//! their measurement reports. Each gateway estimates the offset of the node
//! below it and re-expresses the measurement time on its own clock before
//! relaying; the head ends up with the measurement time on the reference
//! clock.
//!
//! The clock, estimator, protocol and simulator code is generic over a
//! [`Scalar`] backend. [`f64`] is the working type; [`Exact`] (big
//! rationals) removes roundoff entirely and is used to check algebraic
//! identities.

pub mod clock;
pub mod experiment;
pub mod metrics;
pub mod output;
pub mod protocol;
pub mod scalar;
pub mod scfr;
pub mod sim;

pub use clock::{ClockError, LocalTimestamp, NodeClock, NodeId, SimTime};
pub use metrics::{MetricsError, RunSummary};
pub use protocol::{GatewayNode, HeadNode, ProtocolError, SensorNode};
pub use scalar::Scalar;
pub use scfr::ScfrError;
pub use sim::{ScenarioConfig, SimError};

/// Exact rational scalar.
pub type Exact = num_rational::BigRational;

pub type ClockParams = clock::ClockParams<f64>;
pub type ExactClockParams = clock::ClockParams<Exact>;
pub type RatioEstimator = scfr::RatioEstimator<f64>;
pub type ReportEnvelope = protocol::ReportEnvelope<f64>;
pub type SyncEstimate = protocol::SyncEstimate<f64>;
pub type ReportRecord = sim::ReportRecord<f64>;
pub type SimOutcome = sim::SimOutcome<f64>;
pub type ExactSimOutcome = sim::SimOutcome<Exact>;

/// Runs a scenario in `f64`.
pub fn simulate(cfg: &ScenarioConfig) -> Result<SimOutcome, SimError> {
    sim::run::<f64>(cfg)
}

/// Runs a scenario in exact rational arithmetic.
pub fn simulate_exact(cfg: &ScenarioConfig) -> Result<ExactSimOutcome, SimError> {
    sim::run::<Exact>(cfg)
}
