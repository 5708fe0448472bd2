//! Discrete-event simulation of a head → gateway… → sensor chain.
//!
//! Every non-leaf node beacons downstream on its own clock; the sensor takes
//! Poisson-timed measurements and reports each one upstream through the
//! gateways. The run is single-threaded and fully determined by the
//! configuration, seed included.

pub mod config;
pub mod queue;
pub mod traffic;

use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::clock::{ClockParams, LocalTimestamp, NodeClock, NodeId, SimTime};
use crate::protocol::{
    translate_measurement, Beacon, GatewayConfig, GatewayNode, HeadNode, ProtocolError,
    ReportEnvelope, SensorNode, SyncEstimate,
};
use crate::scalar::Scalar;

pub use config::{ConfigError, FixedDelay, LinkSpec, NodeSpec, NoiseModel, ScenarioConfig};
pub use queue::{EventQueue, Priority};
pub use traffic::{generate_measurement_times, link_delay};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("protocol failure during simulation: {0}")]
    Protocol(#[from] ProtocolError),
}

/// One hop of a delivered report, as estimated by the hop's receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct HopRecord<T> {
    /// Chain index of the receiving (upstream) node.
    pub receiver: usize,
    pub estimate: SyncEstimate<T>,
    /// Error of this hop's translation alone: the receiver's mapping applied
    /// to the exact sender-clock measurement time, minus the exact
    /// receiver-clock measurement time.
    pub isolated_error: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRecord<T> {
    pub measurement_id: u64,
    pub t_m: T,
    /// Sensor-side hop first, head-side hop last. A single-hop chain has one.
    pub hops: Vec<HopRecord<T>>,
    /// Measurement time on the clock of the sensor's upstream neighbour.
    pub t_scfr_once: T,
    /// Measurement time recovered on the head clock.
    pub t_scfr_twice: T,
    /// `t_scfr_once` minus the true measurement instant on that same clock.
    pub err_once: T,
    pub err_twice: T,
    pub delivered_at: T,
}

impl<T: Scalar> ReportRecord<T> {
    pub fn warm_up(&self) -> bool {
        self.hops.iter().any(|h| h.estimate.warm_up)
    }

    pub fn sensor_hop(&self) -> &HopRecord<T> {
        &self.hops[0]
    }

    pub fn head_hop(&self) -> &HopRecord<T> {
        &self.hops[self.hops.len() - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UndeliveredReason {
    /// `node` had no beacon to echo when the report had to leave it.
    NotSynchronized { node: usize },
    /// Measured or still in flight when the horizon ended.
    PastHorizon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UndeliveredReport<T> {
    pub measurement_id: u64,
    pub t_m: T,
    pub reason: UndeliveredReason,
}

/// Frequency ratio estimate held by a beacon receiver right after a beacon.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSample<T> {
    pub at: T,
    /// Link index: `i` joins chain nodes `i` and `i + 1`.
    pub link: usize,
    pub r_hat: T,
    pub r_true: T,
    pub warm_up: bool,
}

#[derive(Debug, Clone)]
pub struct SimOutcome<T> {
    pub n_generated: usize,
    pub records: Vec<ReportRecord<T>>,
    pub undelivered: Vec<UndeliveredReport<T>>,
    pub ratio_series: Vec<RatioSample<T>>,
    /// Clock of every chain node, head first.
    pub clocks: Vec<ClockParams<T>>,
    /// `"<downstream>-<upstream>"` label per link.
    pub link_labels: Vec<String>,
}

impl<T: Scalar> SimOutcome<T> {
    pub fn hops(&self) -> usize {
        self.link_labels.len()
    }

    /// True frequency ratio of the receiver on `link` to its sender.
    pub fn true_ratio(&self, link: usize) -> T {
        self.clocks[link + 1].ratio().clone() / self.clocks[link].ratio().clone()
    }
}

enum Node<T> {
    Head(HeadNode),
    Gateway(GatewayNode<T>),
    Sensor(SensorNode<T>),
}

#[derive(Debug, Clone)]
struct Trail<T> {
    hops: Vec<HopRecord<T>>,
    once: Option<T>,
}

impl<T> Default for Trail<T> {
    fn default() -> Self {
        Trail {
            hops: Vec::new(),
            once: None,
        }
    }
}

enum Event<T> {
    BeaconDue {
        node: usize,
        k: u64,
    },
    BeaconArrival {
        node: usize,
        beacon: Beacon<T>,
    },
    Measurement {
        id: u64,
    },
    ReportArrival {
        node: usize,
        env: ReportEnvelope<T>,
        trail: Trail<T>,
    },
}

struct Engine<T> {
    clocks: Vec<NodeClock<T>>,
    nodes: Vec<Node<T>>,
    fixed_delay: Vec<T>,
    links: Vec<LinkSpec>,
    link_rngs: Vec<ChaCha20Rng>,
    interval: T,
    horizon: SimTime<T>,
    processing_delay: T,
    measurement_times: Vec<T>,
    queue: EventQueue<T, Event<T>>,
    records: Vec<ReportRecord<T>>,
    undelivered: Vec<UndeliveredReport<T>>,
    series: Vec<RatioSample<T>>,
}

/// Runs one scenario with scalar backend `T`.
pub fn run<T: Scalar>(cfg: &ScenarioConfig) -> Result<SimOutcome<T>, SimError> {
    cfg.validate()?;
    let times = generate_measurement_times(cfg.seed, cfg.horizon_s, cfg.n_measurements)?;
    let n = cfg.nodes.len();

    let mut clocks = Vec::with_capacity(n);
    for (i, spec) in cfg.nodes.iter().enumerate() {
        let params = ClockParams::new(T::of(spec.ratio), T::of(spec.offset_s))
            .map_err(|e| ConfigError::Invalid(vec![format!("node '{}': {e}", spec.name)]))?;
        clocks.push(NodeClock::new(NodeId(i as u16), params));
    }
    let processing_delay = T::of(cfg.processing_delay_a_s);
    let gateway_cfg = GatewayConfig::new(processing_delay.clone())
        .map_err(|e| ConfigError::Invalid(vec![e.to_string()]))?;
    let nodes = (0..n)
        .map(|i| {
            let id = NodeId(i as u16);
            if i == 0 {
                Node::Head(HeadNode::new(id))
            } else if i == n - 1 {
                Node::Sensor(SensorNode::new(id))
            } else {
                Node::Gateway(GatewayNode::new(id, gateway_cfg.clone()))
            }
        })
        .collect();
    let fixed_delay = cfg
        .links
        .iter()
        .map(|l| match l.fixed {
            FixedDelay::DistanceM(d) => T::of(d) / T::of(l.prop_speed_mps),
            FixedDelay::Seconds(s) => T::of(s),
        })
        .collect();
    let link_rngs = (0..cfg.links.len())
        .map(|i| traffic::stream_rng(cfg.seed, traffic::link_stream(i)))
        .collect();

    let mut engine = Engine {
        clocks,
        nodes,
        fixed_delay,
        links: cfg.links.clone(),
        link_rngs,
        interval: T::of(cfg.beacon_interval_s),
        horizon: SimTime::new(T::of(cfg.horizon_s)),
        processing_delay,
        measurement_times: times.iter().map(|&t| T::of(t)).collect(),
        queue: EventQueue::new(),
        records: Vec::new(),
        undelivered: Vec::new(),
        series: Vec::new(),
    };
    engine.run()?;

    let link_labels = cfg
        .links
        .iter()
        .map(|l| format!("{}-{}", l.downstream, l.upstream))
        .collect();
    let Engine {
        clocks,
        mut records,
        mut undelivered,
        series,
        ..
    } = engine;
    records.sort_by_key(|r| r.measurement_id);
    undelivered.sort_by_key(|u| u.measurement_id);
    Ok(SimOutcome {
        n_generated: times.len(),
        records,
        undelivered,
        ratio_series: series,
        clocks: clocks.into_iter().map(|c| c.params).collect(),
        link_labels,
    })
}

impl<T: Scalar> Engine<T> {
    fn run(&mut self) -> Result<(), SimError> {
        for node in 0..self.nodes.len() - 1 {
            self.schedule_beacon(node, 0);
        }
        for id in 0..self.measurement_times.len() {
            let due = SimTime::new(self.measurement_times[id].clone());
            self.queue.push(
                due,
                Priority::Emission,
                Event::Measurement { id: id as u64 },
            );
        }

        while let Some(due) = self.queue.peek_due() {
            if *due > self.horizon {
                break;
            }
            let (due, event) = self.queue.pop().expect("peeked");
            match event {
                Event::BeaconDue { node, k } => self.emit_beacon(due, node, k),
                Event::BeaconArrival { node, beacon } => self.beacon_arrival(due, node, beacon)?,
                Event::Measurement { id } => self.measure(id)?,
                Event::ReportArrival { node, env, trail } => {
                    self.report_arrival(due, node, env, trail)?
                }
            }
        }

        let rest = std::mem::take(&mut self.queue).drain_ordered();
        for (_, event) in rest {
            let id = match event {
                Event::Measurement { id } => id,
                Event::ReportArrival { env, .. } => env.measurement_id,
                _ => continue,
            };
            self.undelivered.push(UndeliveredReport {
                measurement_id: id,
                t_m: self.measurement_times[id as usize].clone(),
                reason: UndeliveredReason::PastHorizon,
            });
        }
        Ok(())
    }

    /// Local departure time of beacon `k`: local start + k * interval.
    fn beacon_local_time(&self, node: usize, k: u64) -> T {
        let start = self.clocks[node].params.local_time(&SimTime::zero());
        start + T::from_count(k) * self.interval.clone()
    }

    fn schedule_beacon(&mut self, node: usize, k: u64) {
        let local = self.beacon_local_time(node, k);
        let due = self.clocks[node].params.to_reference(&local);
        if due <= self.horizon {
            self.queue
                .push(due, Priority::Emission, Event::BeaconDue { node, k });
        }
    }

    fn draw_delay(&mut self, link: usize) -> T {
        let noise = traffic::noise_draw(&self.links[link].noise, &mut self.link_rngs[link]);
        if noise == 0.0 {
            self.fixed_delay[link].clone()
        } else {
            self.fixed_delay[link].clone() + T::of(noise)
        }
    }

    fn emit_beacon(&mut self, due: SimTime<T>, node: usize, k: u64) {
        let departure = LocalTimestamp::new(NodeId(node as u16), self.beacon_local_time(node, k));
        let beacon = match &mut self.nodes[node] {
            Node::Head(h) => h.emit_beacon(departure),
            Node::Gateway(g) => g.emit_beacon(departure),
            Node::Sensor(_) => unreachable!("sensors do not beacon"),
        };
        let arrival = due.after(self.draw_delay(node));
        self.queue.push(
            arrival,
            Priority::Arrival,
            Event::BeaconArrival {
                node: node + 1,
                beacon,
            },
        );
        self.schedule_beacon(node, k + 1);
    }

    fn beacon_arrival(
        &mut self,
        due: SimTime<T>,
        node: usize,
        beacon: Beacon<T>,
    ) -> Result<(), SimError> {
        let arrival = self.clocks[node].stamp(&due);
        let listener = match &mut self.nodes[node] {
            Node::Gateway(g) => {
                g.on_beacon(&beacon, arrival)?;
                g.listener()
            }
            Node::Sensor(s) => {
                s.on_beacon(&beacon, arrival)?;
                s.listener()
            }
            Node::Head(_) => unreachable!("the head receives no beacons"),
        };
        let (r_hat, warm_up) = listener.estimator().ratio_or_unity();
        let r_true =
            self.clocks[node].params.ratio().clone() / self.clocks[node - 1].params.ratio().clone();
        self.series.push(RatioSample {
            at: due.into_seconds(),
            link: node - 1,
            r_hat,
            r_true,
            warm_up,
        });
        Ok(())
    }

    fn measure(&mut self, id: u64) -> Result<(), SimError> {
        let sensor_idx = self.nodes.len() - 1;
        let t_m = SimTime::new(self.measurement_times[id as usize].clone());
        let raw = self.clocks[sensor_idx].stamp(&t_m);
        let Node::Sensor(sensor) = &self.nodes[sensor_idx] else {
            unreachable!("last chain node is the sensor")
        };
        let env = match sensor.make_report(&raw, id, t_m.clone()) {
            Ok(env) => env,
            Err(ProtocolError::NotSynchronized { .. }) => {
                self.not_synchronized(id, sensor_idx);
                return Ok(());
            }
            Err(e) => return Err(e.into()),
        };
        let link = sensor_idx - 1;
        let arrival = t_m.after(self.draw_delay(link));
        self.queue.push(
            arrival,
            Priority::Arrival,
            Event::ReportArrival {
                node: link,
                env,
                trail: Trail::default(),
            },
        );
        Ok(())
    }

    fn not_synchronized(&mut self, id: u64, node: usize) {
        self.undelivered.push(UndeliveredReport {
            measurement_id: id,
            t_m: self.measurement_times[id as usize].clone(),
            reason: UndeliveredReason::NotSynchronized { node },
        });
    }

    fn report_arrival(
        &mut self,
        due: SimTime<T>,
        node: usize,
        env: ReportEnvelope<T>,
        mut trail: Trail<T>,
    ) -> Result<(), SimError> {
        let arrival = self.clocks[node].stamp(&due);
        let (estimate, translated) = match &self.nodes[node] {
            Node::Head(h) if env.translated_measurement_ts.is_some() => {
                h.on_report(&env, &arrival)?
            }
            Node::Head(h) => h.on_direct_report(&env, &arrival)?,
            Node::Gateway(g) => g.on_report(&env, &arrival)?,
            Node::Sensor(_) => unreachable!("reports travel upstream"),
        };

        let t_m = env.true_measurement_time.clone();
        let truth_here = self.clocks[node].params.local_time(&t_m);
        let isolated_error = match &env.translated_measurement_ts {
            None => translated.value().clone() - truth_here.clone(),
            Some(_) => {
                let truth_sender = self.clocks[node + 1].params.local_time(&t_m);
                translate_measurement(
                    &truth_sender,
                    env.echo_arrival_ts.value(),
                    &env.sender_ratio,
                    &estimate.theta_est,
                ) - truth_here.clone()
            }
        };
        trail.hops.push(HopRecord {
            receiver: node,
            estimate,
            isolated_error,
        });
        if trail.once.is_none() {
            trail.once = Some(translated.value().clone());
        }

        match &self.nodes[node] {
            Node::Head(_) => {
                let once = trail.once.expect("set above");
                let first_upstream = self.nodes.len() - 2;
                let once_truth = self.clocks[first_upstream].params.local_time(&t_m);
                let twice = translated.into_value();
                let t_m = t_m.into_seconds();
                self.records.push(ReportRecord {
                    measurement_id: env.measurement_id,
                    err_once: once.clone() - once_truth,
                    err_twice: twice.clone() - t_m.clone(),
                    t_m,
                    hops: trail.hops,
                    t_scfr_once: once,
                    t_scfr_twice: twice,
                    delivered_at: due.into_seconds(),
                });
            }
            Node::Gateway(g) => {
                let up = match g.forward_report(&env, &arrival, translated) {
                    Ok(up) => up,
                    Err(ProtocolError::NotSynchronized { .. }) => {
                        self.not_synchronized(env.measurement_id, node);
                        return Ok(());
                    }
                    Err(e) => return Err(e.into()),
                };
                // `a` of gateway-clock time is a / R of reference time
                let leave = due.after(
                    self.processing_delay.clone() / self.clocks[node].params.ratio().clone(),
                );
                let link = node - 1;
                let at = leave.after(self.draw_delay(link));
                self.queue.push(
                    at,
                    Priority::Arrival,
                    Event::ReportArrival {
                        node: link,
                        env: up,
                        trail,
                    },
                );
            }
            Node::Sensor(_) => unreachable!(),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
