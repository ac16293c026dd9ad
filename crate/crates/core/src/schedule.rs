//! Control-field envelopes for storage, retrieval and round-trip runs.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Control ramps from `peak` down to zero.
    Storage,
    /// Control ramps from zero up to `peak`.
    Retrieval,
    /// Storage, a hold at zero control, then retrieval.
    Roundtrip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    /// `cos²(πτ/2)`; flat at both ends.
    #[default]
    RaisedCosine,
    Linear,
    Tanh,
}

const TANH_STEEPNESS: f64 = 8.0;

impl Shape {
    /// Falling profile on `τ ∈ [0, 1]`, from 1 at `τ = 0` to 0 at `τ = 1`.
    pub fn falling(self, tau: f64) -> f64 {
        let tau = tau.clamp(0.0, 1.0);
        match self {
            Shape::RaisedCosine => {
                let c = (FRAC_PI_2 * tau).cos();
                if tau == 1.0 {
                    0.0
                } else {
                    c * c
                }
            }
            Shape::Linear => 1.0 - tau,
            Shape::Tanh => {
                let edge = (0.5 * TANH_STEEPNESS).tanh();
                0.5 * (1.0 - (TANH_STEEPNESS * (tau - 0.5)).tanh() / edge)
            }
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shape::RaisedCosine => "raised-cosine",
            Shape::Linear => "linear",
            Shape::Tanh => "tanh",
        })
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raised-cosine" => Ok(Shape::RaisedCosine),
            "linear" => Ok(Shape::Linear),
            "tanh" => Ok(Shape::Tanh),
            other => Err(domain(format!("unknown envelope shape `{other}`"))),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Storage => "storage",
            Direction::Retrieval => "retrieval",
            Direction::Roundtrip => "roundtrip",
        })
    }
}

/// Time-dependent control envelope `f(t)`; bin σ sees `Ω_σ(t) = w_σ·f(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlSchedule {
    pub direction: Direction,
    /// Duration of one ramp.
    pub ramp_time: f64,
    /// Envelope maximum, in units of `g0·√N`.
    pub peak: f64,
    pub shape: Shape,
    /// Zero-control interval between storage and retrieval (round trips only).
    pub hold: f64,
}

/// A piece of a schedule with a single functional form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Segment {
    Ramp { start: f64, end: f64, falling: bool },
    Hold { start: f64, end: f64 },
}

impl Segment {
    pub(crate) fn bounds(&self) -> (f64, f64) {
        match *self {
            Segment::Ramp { start, end, .. } | Segment::Hold { start, end } => (start, end),
        }
    }
}

impl ControlSchedule {
    pub fn new(direction: Direction, ramp_time: f64, peak: f64) -> Result<Self> {
        let s = Self { direction, ramp_time, peak, shape: Shape::default(), hold: 0.0 };
        s.validate()?;
        Ok(s)
    }

    pub fn storage(ramp_time: f64, peak: f64) -> Result<Self> {
        Self::new(Direction::Storage, ramp_time, peak)
    }

    pub fn retrieval(ramp_time: f64, peak: f64) -> Result<Self> {
        Self::new(Direction::Retrieval, ramp_time, peak)
    }

    pub fn roundtrip(ramp_time: f64, peak: f64, hold: f64) -> Result<Self> {
        let s = Self { hold, ..Self::new(Direction::Roundtrip, ramp_time, peak)? };
        s.validate()?;
        Ok(s)
    }

    pub fn with_shape(mut self, shape: Shape) -> Self {
        self.shape = shape;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ramp_time > 0.0) || !self.ramp_time.is_finite() {
            return Err(domain(format!("ramp time must be positive, got {}", self.ramp_time)));
        }
        if !(self.peak > 0.0) || !self.peak.is_finite() {
            return Err(domain(format!("peak must be positive, got {}", self.peak)));
        }
        if !(self.hold >= 0.0) || !self.hold.is_finite() {
            return Err(domain(format!("hold must be nonnegative, got {}", self.hold)));
        }
        Ok(())
    }

    /// Total duration of the schedule.
    pub fn duration(&self) -> f64 {
        match self.direction {
            Direction::Storage | Direction::Retrieval => self.ramp_time,
            Direction::Roundtrip => 2.0 * self.ramp_time + self.hold,
        }
    }

    /// The storage half of a round trip (or `self` for a one-way schedule).
    pub fn storage_leg(&self) -> Self {
        Self { direction: Direction::Storage, hold: 0.0, ..*self }
    }

    pub fn retrieval_leg(&self) -> Self {
        Self { direction: Direction::Retrieval, hold: 0.0, ..*self }
    }

    /// Envelope value at time `t`.
    pub fn envelope(&self, t: f64) -> f64 {
        for seg in self.segments() {
            let (start, end) = seg.bounds();
            if t <= end || end == self.duration() {
                return self.envelope_in(&seg, t.clamp(start, end));
            }
        }
        0.0
    }

    pub(crate) fn envelope_in(&self, seg: &Segment, t: f64) -> f64 {
        match *seg {
            Segment::Ramp { start, falling, .. } => {
                let tau = (t - start) / self.ramp_time;
                let x = if falling { tau } else { 1.0 - tau };
                self.peak * self.shape.falling(x)
            }
            Segment::Hold { .. } => 0.0,
        }
    }

    pub(crate) fn segments(&self) -> Vec<Segment> {
        let t = self.ramp_time;
        match self.direction {
            Direction::Storage => vec![Segment::Ramp { start: 0.0, end: t, falling: true }],
            Direction::Retrieval => vec![Segment::Ramp { start: 0.0, end: t, falling: false }],
            Direction::Roundtrip => {
                let mut segs = vec![Segment::Ramp { start: 0.0, end: t, falling: true }];
                if self.hold > 0.0 {
                    segs.push(Segment::Hold { start: t, end: t + self.hold });
                }
                segs.push(Segment::Ramp {
                    start: t + self.hold,
                    end: 2.0 * t + self.hold,
                    falling: false,
                });
                segs
            }
        }
    }

    pub fn initial_envelope(&self) -> f64 {
        self.envelope(0.0)
    }

    pub fn final_envelope(&self) -> f64 {
        self.envelope(self.duration())
    }
}
