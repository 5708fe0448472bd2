//! Affine node clocks and the reference (head-node) time base.
//!
//! A node clock reads `t * ratio + offset` at reference time `t`. Ratios are
//! constant for the lifetime of a clock.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Largest skew accepted by [`ClockParams::check_ppm_scale`].
pub const MAX_RATIO_DEVIATION: f64 = 1e-2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClockError {
    #[error("invalid clock: ratio must be positive, got {0}")]
    NonPositiveRatio(f64),
    #[error("invalid clock: ratio {0} is outside [1 - 1e-2, 1 + 1e-2]")]
    RatioOutOfRange(f64),
    #[error("invalid clock: non-finite parameter")]
    NonFinite,
}

/// Index of a node in a topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u16);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node#{}", self.0)
    }
}

/// Seconds on the reference timeline.
#[derive(Debug, Clone, PartialEq, PartialOrd)]
pub struct SimTime<T>(T);

impl<T: Scalar> SimTime<T> {
    pub fn new(seconds: T) -> Self {
        debug_assert!(seconds.is_finite_value());
        SimTime(seconds)
    }

    pub fn zero() -> Self {
        SimTime(T::zero())
    }

    pub fn seconds(&self) -> &T {
        &self.0
    }

    pub fn into_seconds(self) -> T {
        self.0
    }

    pub fn after(&self, delay: T) -> Self {
        SimTime(self.0.clone() + delay)
    }
}

/// A reading of one node's clock.
///
/// Readings of different nodes may still be combined through [`value`]
/// (the two-way formulas do exactly that); [`since`] is for same-clock
/// elapsed times and checks ownership in debug builds.
///
/// [`value`]: LocalTimestamp::value
/// [`since`]: LocalTimestamp::since
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimestamp<T> {
    node: NodeId,
    value: T,
}

impl<T: Scalar> LocalTimestamp<T> {
    pub fn new(node: NodeId, value: T) -> Self {
        LocalTimestamp { node, value }
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn value(&self) -> &T {
        &self.value
    }

    pub fn into_value(self) -> T {
        self.value
    }

    /// Elapsed local time from `earlier` to `self`.
    pub fn since(&self, earlier: &LocalTimestamp<T>) -> T {
        debug_assert_eq!(self.node, earlier.node, "elapsed time across clocks");
        self.value.clone() - earlier.value.clone()
    }

    pub fn shifted(&self, delta: T) -> Self {
        LocalTimestamp {
            node: self.node,
            value: self.value.clone() + delta,
        }
    }
}

/// Frequency ratio and offset of a clock relative to the reference clock.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockParams<T> {
    ratio: T,
    offset: T,
}

impl<T: Scalar> ClockParams<T> {
    pub fn new(ratio: T, offset: T) -> Result<Self, ClockError> {
        if !ratio.is_finite_value() || !offset.is_finite_value() {
            return Err(ClockError::NonFinite);
        }
        if ratio <= T::zero() {
            return Err(ClockError::NonPositiveRatio(ratio.approx()));
        }
        Ok(ClockParams { ratio, offset })
    }

    pub fn identity() -> Self {
        ClockParams {
            ratio: T::one(),
            offset: T::zero(),
        }
    }

    /// Clock running `ppm` parts per million fast, e.g. `from_ppm(200.0, 0.9)`.
    pub fn from_ppm(ppm: f64, offset: f64) -> Result<Self, ClockError> {
        Self::new(T::one() + T::of(ppm) * T::of(1e-6), T::of(offset))
    }

    pub fn ratio(&self) -> &T {
        &self.ratio
    }

    pub fn offset(&self) -> &T {
        &self.offset
    }

    /// Rejects ratios further than 1e-2 from unity.
    pub fn check_ppm_scale(&self) -> Result<(), ClockError> {
        let dev = (self.ratio.clone() - T::one()).abs();
        if dev > T::of(MAX_RATIO_DEVIATION) {
            return Err(ClockError::RatioOutOfRange(self.ratio.approx()));
        }
        Ok(())
    }

    pub fn local_time(&self, t: &SimTime<T>) -> T {
        t.0.clone() * self.ratio.clone() + self.offset.clone()
    }

    pub fn to_reference(&self, ts: &T) -> SimTime<T> {
        SimTime((ts.clone() - self.offset.clone()) / self.ratio.clone())
    }

    /// This clock expressed against `upstream` instead of the reference:
    /// ratio `R / R_up`, offset `θ - θ_up * R / R_up`.
    pub fn relative_to(&self, upstream: &ClockParams<T>) -> ClockParams<T> {
        let ratio = self.ratio.clone() / upstream.ratio.clone();
        let offset = self.offset.clone() - upstream.offset.clone() * ratio.clone();
        ClockParams { ratio, offset }
    }
}

/// A clock bound to the node that owns it.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeClock<T> {
    pub node: NodeId,
    pub params: ClockParams<T>,
}

impl<T: Scalar> NodeClock<T> {
    pub fn new(node: NodeId, params: ClockParams<T>) -> Self {
        NodeClock { node, params }
    }

    pub fn stamp(&self, t: &SimTime<T>) -> LocalTimestamp<T> {
        LocalTimestamp::new(self.node, self.params.local_time(t))
    }

    pub fn to_reference(&self, ts: &LocalTimestamp<T>) -> SimTime<T> {
        debug_assert_eq!(ts.node, self.node);
        self.params.to_reference(&ts.value)
    }
}
