//! Constant-delay communication channels.
//!
//! A channel stores the sender's `(t, x_o, xdot_o)` history and answers
//! queries for `x_o(t - T)`. Before the first sample has had time to arrive
//! the receiver sees an invalid, all-zero sample.
//!
//! Between stored samples the channel uses the cubic Hermite interpolant built
//! from the stored positions and rates, and returns that interpolant's
//! derivative as the delayed rate. The rate is therefore the exact time
//! derivative of the delayed position the receiver sees. A sample may carry
//! distinct left and right rates when the sender's rate jumps at that instant.

use std::collections::VecDeque;

use nalgebra::Vector2;

use crate::controller::NeighborSample;
use crate::error::{Error, Result};

/// Absolute tolerance (s) for treating a query time as a stored timestamp.
const SNAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Stored {
    t: f64,
    x: Vector2<f64>,
    xdot: Vector2<f64>,
    xdot_left: Vector2<f64>,
}

#[derive(Debug, Clone)]
pub struct DelayChannel {
    delay: f64,
    /// How far behind `t - delay` samples are kept.
    slack: f64,
    origin: Option<f64>,
    samples: VecDeque<Stored>,
}

impl DelayChannel {
    /// `slack` is the retention margin beyond the delay, normally `2 dt`.
    pub fn new(delay: f64, slack: f64) -> Self {
        Self {
            delay,
            slack,
            origin: None,
            samples: VecDeque::new(),
        }
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn push(&mut self, t: f64, x_o: Vector2<f64>, xdot_o: Vector2<f64>) -> Result<()> {
        self.push_with_left_rate(t, x_o, xdot_o, xdot_o)
    }

    /// Push for an instant where the sender's rate is discontinuous.
    pub fn push_with_left_rate(
        &mut self,
        t: f64,
        x_o: Vector2<f64>,
        xdot_left: Vector2<f64>,
        xdot_o: Vector2<f64>,
    ) -> Result<()> {
        if let Some(last) = self.samples.back() {
            if !(t > last.t) {
                return Err(Error::NonMonotoneTime { last: last.t, got: t });
            }
        }
        self.origin.get_or_insert(t);
        self.samples.push_back(Stored {
            t,
            x: x_o,
            xdot: xdot_o,
            xdot_left,
        });
        let cutoff = t - self.delay - self.slack;
        while self.samples.len() > 2 && self.samples[1].t <= cutoff {
            self.samples.pop_front();
        }
        Ok(())
    }

    /// Sample seen at time `t`. At the instant data first arrives the sample
    /// is already valid (right limit).
    pub fn sample(&self, t: f64) -> NeighborSample {
        self.query(t, false)
    }

    /// Same as [`sample`](Self::sample) but taking the left limit at the
    /// arrival instant, for evaluations at the end of an integration step.
    pub fn sample_left(&self, t: f64) -> NeighborSample {
        self.query(t, true)
    }

    fn query(&self, t: f64, left_limit: bool) -> NeighborSample {
        let Some(origin) = self.origin else {
            return NeighborSample::invalid();
        };
        let mut tau = t - self.delay;
        if (tau - origin).abs() <= SNAP {
            tau = origin;
        }
        if tau < 0.0 || tau < origin || (left_limit && tau <= origin && self.delay > 0.0) {
            return NeighborSample::invalid();
        }

        let idx = self.samples.partition_point(|s| s.t < tau);
        let exact = |s: &Stored| {
            NeighborSample::new(s.x, if left_limit { s.xdot_left } else { s.xdot })
        };
        if let Some(s) = self.samples.get(idx).filter(|s| (s.t - tau).abs() <= SNAP) {
            return exact(s);
        }
        if idx > 0 {
            if let Some(s) = self.samples.get(idx - 1).filter(|s| (tau - s.t).abs() <= SNAP) {
                return exact(s);
            }
        }
        match (idx.checked_sub(1).and_then(|i| self.samples.get(i)), self.samples.get(idx)) {
            (Some(a), Some(b)) => {
                let (x, xdot) = hermite(a, b, tau);
                NeighborSample::new(x, xdot)
            }
            // Past the newest sample: hold it.
            (Some(a), None) => NeighborSample::new(a.x, a.xdot),
            // Older than everything retained: only reachable for pruned times.
            (None, Some(b)) => NeighborSample::new(b.x, b.xdot),
            (None, None) => NeighborSample::invalid(),
        }
    }
}

fn hermite(a: &Stored, b: &Stored, tau: f64) -> (Vector2<f64>, Vector2<f64>) {
    let h = b.t - a.t;
    let s = (tau - a.t) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let x = a.x * h00 + a.xdot * (h * h10) + b.x * h01 + b.xdot_left * (h * h11);

    let d00 = 6.0 * s2 - 6.0 * s;
    let d10 = 3.0 * s2 - 4.0 * s + 1.0;
    let d11 = 3.0 * s2 - 2.0 * s;
    let xdot = (a.x - b.x) * (d00 / h) + a.xdot * d10 + b.xdot_left * d11;
    (x, xdot)
}
