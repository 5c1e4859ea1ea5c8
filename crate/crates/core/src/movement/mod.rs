//! The latent steps-and-turns walk and its observation at regular times.
//!
//! An individual travels at constant speed along a heading for an
//! exponentially distributed duration, then turns by a von Mises angle and
//! starts the next step. The walk is recorded only every `dt` time units.

mod observe;
mod path;
mod sampling;

pub use observe::{change_counts, observe, ObservedTrack};
pub use path::{simulate_latent, simulate_until, LatentPath};
pub use sampling::{sample_exponential, sample_von_mises, StepSampler, VonMises};

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A point in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    /// `self + length * (cos heading, sin heading)`.
    pub fn advance(self, heading: f64, length: f64) -> Point {
        let (s, c) = heading.sin_cos();
        Point::new(self.x + c * length, self.y + s * length)
    }
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Parameters of the movement process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovementParams {
    /// Concentration of the turning-angle distribution.
    pub kappa: f64,
    /// Rate of direction changes per unit time.
    pub lambda: f64,
    /// Mean turning angle.
    pub nu: f64,
    /// Travel speed.
    pub speed: f64,
}

impl MovementParams {
    /// Zero mean turn and unit speed.
    pub fn new(kappa: f64, lambda: f64) -> Result<Self> {
        Self::extended(kappa, lambda, 0.0, 1.0)
    }

    /// Arbitrary mean turn and speed, outside the reference configuration.
    pub fn extended(kappa: f64, lambda: f64, nu: f64, speed: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::domain(format!("kappa must be finite and >= 0, got {kappa}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::domain(format!("lambda must be finite and > 0, got {lambda}")));
        }
        if !nu.is_finite() {
            return Err(Error::domain(format!("nu must be finite, got {nu}")));
        }
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(Error::domain(format!("speed must be finite and > 0, got {speed}")));
        }
        Ok(MovementParams { kappa, lambda, nu, speed })
    }
}
