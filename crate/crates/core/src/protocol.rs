//! Head, gateway and sensor state machines.
//!
//! Beacons flow downstream and carry the sender's departure timestamp. Each
//! beacon receiver runs a [`RatioEstimator`] over them and keeps the most
//! recent beacon. A measurement report flowing upstream echoes that beacon,
//! which turns it into the second half of a two-way exchange: the receiving
//! node estimates the link offset and delay and re-expresses the measurement
//! time on its own clock before relaying it further up.

use thiserror::Error;

use crate::clock::{LocalTimestamp, NodeId, SimTime};
use crate::scalar::Scalar;
use crate::scfr::{RatioEstimator, ScfrError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("out-of-order beacon from {sender}: seq {got} after {last}")]
    OutOfOrderBeacon { sender: NodeId, last: u64, got: u64 },
    #[error(transparent)]
    Scfr(#[from] ScfrError),
    #[error("{node} is not synchronized: no beacon received yet")]
    NotSynchronized { node: NodeId },
    #[error("protocol violation: {0}")]
    Violation(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Beacon<T> {
    pub sender: NodeId,
    pub departure_ts: LocalTimestamp<T>,
    pub seq: u64,
}

/// The most recent beacon seen by a receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct BeaconRecord<T> {
    pub departure_ts: LocalTimestamp<T>,
    pub arrival_ts: LocalTimestamp<T>,
    pub seq: u64,
}

/// A measurement report in flight between two adjacent nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportEnvelope<T> {
    pub measurement_id: u64,
    /// Simulation bookkeeping only; protocol logic never reads it.
    pub true_measurement_time: SimTime<T>,
    pub sender: NodeId,
    pub echo_seq: u64,
    pub echo_departure_ts: LocalTimestamp<T>,
    pub echo_arrival_ts: LocalTimestamp<T>,
    pub report_departure_ts: LocalTimestamp<T>,
    /// Measurement time already translated onto the sender's clock. Absent
    /// on the sensor hop.
    pub translated_measurement_ts: Option<LocalTimestamp<T>>,
    /// The sender's frequency ratio estimate used to build this envelope.
    pub sender_ratio: T,
    pub sender_warm_up: bool,
}

/// Offset and delay of a sender's clock as seen by the receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncEstimate<T> {
    pub theta_est: T,
    pub delay_est: T,
    pub ratio_used: T,
    pub warm_up: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatewayConfig<T> {
    processing_delay: T,
}

impl<T: Scalar> GatewayConfig<T> {
    pub fn new(processing_delay: T) -> Result<Self, ProtocolError> {
        if !processing_delay.is_finite_value() || processing_delay < T::zero() {
            return Err(ProtocolError::Violation(format!(
                "processing delay must be finite and >= 0, got {}",
                processing_delay.approx()
            )));
        }
        Ok(GatewayConfig { processing_delay })
    }

    pub fn processing_delay(&self) -> &T {
        &self.processing_delay
    }
}

impl<T: Scalar> Default for GatewayConfig<T> {
    fn default() -> Self {
        GatewayConfig {
            processing_delay: T::zero(),
        }
    }
}

/// `(ts - anchor) / ratio + anchor`: elapsed local time since `anchor`
/// rescaled to the upstream clock rate.
pub fn scfr_translate<T: Scalar>(ts: &T, anchor: &T, ratio: &T) -> T {
    (ts.clone() - anchor.clone()) / ratio.clone() + anchor.clone()
}

/// Offset and delay from the reverse two-way exchange: the downstream
/// beacon (`beacon_departure` upstream, `beacon_arrival` downstream) and the
/// upstream report (`report_departure` downstream, `report_arrival`
/// upstream). Returns `(theta, delay)`.
pub fn two_way_estimate<T: Scalar>(
    beacon_departure: &T,
    beacon_arrival: &T,
    report_departure: &T,
    report_arrival: &T,
) -> (T, T) {
    let down = beacon_arrival.clone() - beacon_departure.clone();
    let up = report_arrival.clone() - report_departure.clone();
    let half = T::half();
    (
        (down.clone() - up.clone()) * half.clone(),
        (down + up) * half,
    )
}

/// Brings a sender-clock measurement time onto the receiver clock given the
/// echoed beacon arrival, the sender's ratio and the offset estimate.
pub fn translate_measurement<T: Scalar>(
    ts: &T,
    echo_arrival: &T,
    sender_ratio: &T,
    theta: &T,
) -> T {
    scfr_translate(ts, echo_arrival, sender_ratio) - theta.clone()
}

/// Beacon-receiving half of a node.
#[derive(Debug, Clone)]
pub struct BeaconListener<T> {
    node: NodeId,
    last: Option<BeaconRecord<T>>,
    estimator: RatioEstimator<T>,
}

impl<T: Scalar> BeaconListener<T> {
    pub fn new(node: NodeId) -> Self {
        BeaconListener {
            node,
            last: None,
            estimator: RatioEstimator::new(),
        }
    }

    pub fn on_beacon(
        &mut self,
        beacon: &Beacon<T>,
        arrival_ts: LocalTimestamp<T>,
    ) -> Result<(), ProtocolError> {
        debug_assert_eq!(arrival_ts.node(), self.node);
        if let Some(last) = &self.last {
            if beacon.seq <= last.seq {
                return Err(ProtocolError::OutOfOrderBeacon {
                    sender: beacon.sender,
                    last: last.seq,
                    got: beacon.seq,
                });
            }
        }
        self.estimator
            .observe(beacon.departure_ts.clone(), arrival_ts.clone())?;
        self.last = Some(BeaconRecord {
            departure_ts: beacon.departure_ts.clone(),
            arrival_ts,
            seq: beacon.seq,
        });
        Ok(())
    }

    pub fn last_beacon(&self) -> Option<&BeaconRecord<T>> {
        self.last.as_ref()
    }

    pub fn estimator(&self) -> &RatioEstimator<T> {
        &self.estimator
    }

    fn require_beacon(&self) -> Result<&BeaconRecord<T>, ProtocolError> {
        self.last
            .as_ref()
            .ok_or(ProtocolError::NotSynchronized { node: self.node })
    }

    /// Builds the upstream envelope for a report leaving at local time
    /// `departure_raw`, translated with this node's current ratio estimate.
    fn envelope(
        &self,
        measurement_id: u64,
        true_time: SimTime<T>,
        departure_raw: &LocalTimestamp<T>,
        translated: Option<LocalTimestamp<T>>,
    ) -> Result<ReportEnvelope<T>, ProtocolError> {
        let record = self.require_beacon()?;
        if departure_raw.value() < record.arrival_ts.value() {
            return Err(ProtocolError::Violation(format!(
                "report departs at {} before the last beacon arrival {}",
                departure_raw.value().approx(),
                record.arrival_ts.value().approx()
            )));
        }
        let (ratio, warm_up) = self.estimator.ratio_or_unity();
        let departure = scfr_translate(departure_raw.value(), record.arrival_ts.value(), &ratio);
        Ok(ReportEnvelope {
            measurement_id,
            true_measurement_time: true_time,
            sender: self.node,
            echo_seq: record.seq,
            echo_departure_ts: record.departure_ts.clone(),
            echo_arrival_ts: record.arrival_ts.clone(),
            report_departure_ts: LocalTimestamp::new(self.node, departure),
            translated_measurement_ts: translated,
            sender_ratio: ratio,
            sender_warm_up: warm_up,
        })
    }
}

/// Beacon-sending half of a node.
#[derive(Debug, Clone)]
pub struct BeaconSource {
    node: NodeId,
    next_seq: u64,
}

impl BeaconSource {
    pub fn new(node: NodeId) -> Self {
        BeaconSource { node, next_seq: 0 }
    }

    pub fn emit<T: Scalar>(&mut self, departure_ts: LocalTimestamp<T>) -> Beacon<T> {
        debug_assert_eq!(departure_ts.node(), self.node);
        let seq = self.next_seq;
        self.next_seq += 1;
        Beacon {
            sender: self.node,
            departure_ts,
            seq,
        }
    }

    pub fn has_sent(&self, seq: u64) -> bool {
        seq < self.next_seq
    }

    /// Two-way estimate and measurement translation for a report that
    /// arrived at this node at `arrival_ts`.
    fn receive<T: Scalar>(
        &self,
        env: &ReportEnvelope<T>,
        arrival_ts: &LocalTimestamp<T>,
    ) -> Result<(SyncEstimate<T>, LocalTimestamp<T>), ProtocolError> {
        if !self.has_sent(env.echo_seq) || env.echo_departure_ts.node() != self.node {
            return Err(ProtocolError::Violation(format!(
                "report {} echoes beacon seq {} which {} never sent",
                env.measurement_id, env.echo_seq, self.node
            )));
        }
        let (theta, delay) = two_way_estimate(
            env.echo_departure_ts.value(),
            env.echo_arrival_ts.value(),
            env.report_departure_ts.value(),
            arrival_ts.value(),
        );
        let translated = match &env.translated_measurement_ts {
            None => env.report_departure_ts.value().clone() - theta.clone(),
            Some(ts) => translate_measurement(
                ts.value(),
                env.echo_arrival_ts.value(),
                &env.sender_ratio,
                &theta,
            ),
        };
        let estimate = SyncEstimate {
            theta_est: theta,
            delay_est: delay,
            ratio_used: env.sender_ratio.clone(),
            warm_up: env.sender_warm_up,
        };
        Ok((estimate, LocalTimestamp::new(self.node, translated)))
    }
}

#[derive(Debug, Clone)]
pub struct SensorNode<T> {
    listener: BeaconListener<T>,
}

impl<T: Scalar> SensorNode<T> {
    pub fn new(id: NodeId) -> Self {
        SensorNode {
            listener: BeaconListener::new(id),
        }
    }

    pub fn on_beacon(
        &mut self,
        beacon: &Beacon<T>,
        arrival_ts: LocalTimestamp<T>,
    ) -> Result<(), ProtocolError> {
        self.listener.on_beacon(beacon, arrival_ts)
    }

    pub fn listener(&self) -> &BeaconListener<T> {
        &self.listener
    }

    /// Timestamps a measurement taken (and sent) at local time `raw`.
    pub fn make_report(
        &self,
        raw: &LocalTimestamp<T>,
        measurement_id: u64,
        true_time: SimTime<T>,
    ) -> Result<ReportEnvelope<T>, ProtocolError> {
        self.listener.envelope(measurement_id, true_time, raw, None)
    }
}

#[derive(Debug, Clone)]
pub struct GatewayNode<T> {
    listener: BeaconListener<T>,
    source: BeaconSource,
    config: GatewayConfig<T>,
}

impl<T: Scalar> GatewayNode<T> {
    pub fn new(id: NodeId, config: GatewayConfig<T>) -> Self {
        GatewayNode {
            listener: BeaconListener::new(id),
            source: BeaconSource::new(id),
            config,
        }
    }

    pub fn config(&self) -> &GatewayConfig<T> {
        &self.config
    }

    pub fn listener(&self) -> &BeaconListener<T> {
        &self.listener
    }

    pub fn on_beacon(
        &mut self,
        beacon: &Beacon<T>,
        arrival_ts: LocalTimestamp<T>,
    ) -> Result<(), ProtocolError> {
        self.listener.on_beacon(beacon, arrival_ts)
    }

    pub fn emit_beacon(&mut self, departure_ts: LocalTimestamp<T>) -> Beacon<T> {
        self.source.emit(departure_ts)
    }

    /// Estimates the downstream link and translates the measurement time
    /// onto this gateway's clock.
    pub fn on_report(
        &self,
        env: &ReportEnvelope<T>,
        arrival_ts: &LocalTimestamp<T>,
    ) -> Result<(SyncEstimate<T>, LocalTimestamp<T>), ProtocolError> {
        self.source.receive(env, arrival_ts)
    }

    /// Builds the envelope relayed upstream. The physical retransmission
    /// happens `processing_delay` of local time after `arrival_ts`.
    pub fn forward_report(
        &self,
        env: &ReportEnvelope<T>,
        arrival_ts: &LocalTimestamp<T>,
        translated: LocalTimestamp<T>,
    ) -> Result<ReportEnvelope<T>, ProtocolError> {
        let departure = arrival_ts.shifted(self.config.processing_delay.clone());
        self.listener.envelope(
            env.measurement_id,
            env.true_measurement_time.clone(),
            &departure,
            Some(translated),
        )
    }
}

#[derive(Debug, Clone)]
pub struct HeadNode {
    source: BeaconSource,
}

impl HeadNode {
    pub fn new(id: NodeId) -> Self {
        HeadNode {
            source: BeaconSource::new(id),
        }
    }

    pub fn emit_beacon<T: Scalar>(&mut self, departure_ts: LocalTimestamp<T>) -> Beacon<T> {
        self.source.emit(departure_ts)
    }

    /// Final hop of a relayed report: recovers the measurement time on the
    /// head clock.
    pub fn on_report<T: Scalar>(
        &self,
        env: &ReportEnvelope<T>,
        arrival_ts: &LocalTimestamp<T>,
    ) -> Result<(SyncEstimate<T>, LocalTimestamp<T>), ProtocolError> {
        if env.translated_measurement_ts.is_none() {
            return Err(ProtocolError::Violation(format!(
                "relayed report {} carries no translated measurement time",
                env.measurement_id
            )));
        }
        self.source.receive(env, arrival_ts)
    }

    /// A report sent straight from a sensor (no gateway in between).
    pub fn on_direct_report<T: Scalar>(
        &self,
        env: &ReportEnvelope<T>,
        arrival_ts: &LocalTimestamp<T>,
    ) -> Result<(SyncEstimate<T>, LocalTimestamp<T>), ProtocolError> {
        if env.translated_measurement_ts.is_some() {
            return Err(ProtocolError::Violation(format!(
                "direct report {} already carries a translated time",
                env.measurement_id
            )));
        }
        self.source.receive(env, arrival_ts)
    }
}
