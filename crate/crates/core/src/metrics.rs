//! Frequency-difference and measurement-time-difference series, and MSE.

use serde::Serialize;
use thiserror::Error;

use crate::clock::ClockParams;
use crate::scalar::Scalar;
use crate::sim::{ReportRecord, SimOutcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("mse of an empty series")]
    EmptySeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HopLabel {
    SensorGateway,
    GatewayHead,
    EndToEnd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint<T> {
    pub at: T,
    pub value: T,
    pub hop: HopLabel,
}

/// `r_hat` minus the true ratio of `downstream` to `upstream`.
pub fn frequency_difference<T: Scalar>(
    r_hat: &T,
    downstream: &ClockParams<T>,
    upstream: &ClockParams<T>,
) -> T {
    r_hat.clone() - downstream.ratio().clone() / upstream.ratio().clone()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementDifference<T> {
    /// `t_scfr_once` against the measurement instant on the sensor's
    /// upstream neighbour's clock.
    pub sensor_hop: T,
    /// Error of the head's own translation, given an exact gateway time.
    pub gateway_hop: T,
    pub end_to_end: T,
}

pub fn measurement_time_difference<T: Scalar>(
    record: &ReportRecord<T>,
) -> MeasurementDifference<T> {
    MeasurementDifference {
        sensor_hop: record.err_once.clone(),
        gateway_hop: record.head_hop().isolated_error.clone(),
        end_to_end: record.err_twice.clone(),
    }
}

pub fn mse<T: Scalar>(series: &[T]) -> Result<T, MetricsError> {
    if series.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    let sum = series
        .iter()
        .fold(T::zero(), |acc, x| acc + x.clone() * x.clone());
    Ok(sum / T::from_count(series.len() as u64))
}

/// Measurement-time-difference series over delivered reports.
pub fn measurement_series<T: Scalar>(
    outcome: &SimOutcome<T>,
    include_warm_up: bool,
) -> Vec<SeriesPoint<T>> {
    let mut out = Vec::new();
    for r in outcome
        .records
        .iter()
        .filter(|r| include_warm_up || !r.warm_up())
    {
        let d = measurement_time_difference(r);
        for (hop, value) in [
            (HopLabel::SensorGateway, d.sensor_hop),
            (HopLabel::GatewayHead, d.gateway_hop),
            (HopLabel::EndToEnd, d.end_to_end),
        ] {
            out.push(SeriesPoint {
                at: r.t_m.clone(),
                value,
                hop,
            });
        }
    }
    out
}

/// Frequency-difference series sampled at each beacon arrival. Links are
/// labelled sensor-side first; in chains longer than two hops the
/// intermediate links are omitted.
pub fn frequency_series<T: Scalar>(outcome: &SimOutcome<T>) -> Vec<SeriesPoint<T>> {
    let last = outcome.hops().saturating_sub(1);
    outcome
        .ratio_series
        .iter()
        .filter_map(|s| {
            let hop = if s.link == last {
                HopLabel::SensorGateway
            } else if s.link == 0 {
                HopLabel::GatewayHead
            } else {
                return None;
            };
            Some(SeriesPoint {
                at: s.at.clone(),
                value: s.r_hat.clone() - s.r_true.clone(),
                hop,
            })
        })
        .collect()
}

/// Aggregate figures of one run, in `f64`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub hops: usize,
    pub generated: usize,
    pub delivered: usize,
    pub undelivered: usize,
    pub warm_delivered: usize,
    pub mse_end_to_end: Option<f64>,
    pub mse_sensor_hop: Option<f64>,
    pub mse_gateway_hop: Option<f64>,
    pub max_abs_err_twice: Option<f64>,
}

pub fn summarize<T: Scalar>(outcome: &SimOutcome<T>, include_warm_up: bool) -> RunSummary {
    let used: Vec<_> = outcome
        .records
        .iter()
        .filter(|r| include_warm_up || !r.warm_up())
        .map(measurement_time_difference)
        .collect();
    let col = |f: fn(&MeasurementDifference<T>) -> T| -> Vec<T> { used.iter().map(f).collect() };
    let mse_of = |v: Vec<T>| mse(&v).ok().map(|m| m.approx());
    let e2e = col(|d| d.end_to_end.clone());
    let max_abs = e2e.iter().map(|e| e.approx().abs()).reduce(f64::max);
    RunSummary {
        hops: outcome.hops(),
        generated: outcome.n_generated,
        delivered: outcome.records.len(),
        undelivered: outcome.undelivered.len(),
        warm_delivered: outcome.records.iter().filter(|r| !r.warm_up()).count(),
        mse_end_to_end: mse_of(e2e),
        mse_sensor_hop: mse_of(col(|d| d.sensor_hop.clone())),
        mse_gateway_hop: mse_of(col(|d| d.gateway_hop.clone())),
        max_abs_err_twice: max_abs,
    }
}
