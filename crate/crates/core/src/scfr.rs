//! Asynchronous source clock frequency recovery with the cumulative ratio
//! estimator.
//!
//! The receiver keeps the first `(send, recv)` timestamp pair it ever saw and
//! the latest one; the frequency ratio of the local clock to the sender's is
//! the ratio of the two elapsed spans. A constant path delay cancels exactly.

use thiserror::Error;

use crate::clock::LocalTimestamp;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScfrError {
    #[error("out-of-order beacon: send timestamp {got} does not follow {previous}")]
    OutOfOrderBeacon { previous: f64, got: f64 },
    #[error("ratio not yet estimable: {count} observation(s), need 2")]
    NotYetEstimable { count: u64 },
    #[error("degenerate send span between first and last observation")]
    DegenerateSpan,
}

#[derive(Debug, Clone, PartialEq)]
struct Pair<T> {
    send: LocalTimestamp<T>,
    recv: LocalTimestamp<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioEstimator<T> {
    first: Option<Pair<T>>,
    last: Option<Pair<T>>,
    count: u64,
}

impl<T> Default for RatioEstimator<T> {
    fn default() -> Self {
        RatioEstimator {
            first: None,
            last: None,
            count: 0,
        }
    }
}

impl<T: Scalar> RatioEstimator<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn first(&self) -> Option<(&LocalTimestamp<T>, &LocalTimestamp<T>)> {
        self.first.as_ref().map(|p| (&p.send, &p.recv))
    }

    pub fn last(&self) -> Option<(&LocalTimestamp<T>, &LocalTimestamp<T>)> {
        self.last.as_ref().map(|p| (&p.send, &p.recv))
    }

    /// Records one beacon. The estimator is unchanged on error.
    pub fn observe(
        &mut self,
        send: LocalTimestamp<T>,
        recv: LocalTimestamp<T>,
    ) -> Result<(), ScfrError> {
        if let Some(last) = &self.last {
            if send.value() <= last.send.value() {
                return Err(ScfrError::OutOfOrderBeacon {
                    previous: last.send.value().approx(),
                    got: send.value().approx(),
                });
            }
        }
        let pair = Pair { send, recv };
        if self.first.is_none() {
            self.first = Some(pair.clone());
        }
        self.last = Some(pair);
        self.count += 1;
        Ok(())
    }

    /// By-value form of [`observe`](Self::observe).
    pub fn observed(
        mut self,
        send: LocalTimestamp<T>,
        recv: LocalTimestamp<T>,
    ) -> Result<Self, ScfrError> {
        self.observe(send, recv)?;
        Ok(self)
    }

    pub fn ratio(&self) -> Result<T, ScfrError> {
        let (first, last) = match (&self.first, &self.last) {
            (Some(f), Some(l)) if self.count >= 2 => (f, l),
            _ => return Err(ScfrError::NotYetEstimable { count: self.count }),
        };
        let send_span = last.send.since(&first.send);
        if send_span.is_zero() {
            return Err(ScfrError::DegenerateSpan);
        }
        Ok(last.recv.since(&first.recv) / send_span)
    }

    /// The estimate, or unity while warming up. The flag is `true` when the
    /// fallback was used.
    pub fn ratio_or_unity(&self) -> (T, bool) {
        match self.ratio() {
            Ok(r) => (r, false),
            Err(_) => (T::one(), true),
        }
    }
}
