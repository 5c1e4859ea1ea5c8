use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Independent uniform priors on the concentration and the turn rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub kappa: Interval,
    pub lambda: Interval,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec { kappa: Interval::new(0.0, 100.0), lambda: Interval::new(0.0, 50.0) }
    }
}

impl PriorSpec {
    pub fn new(kappa: (f64, f64), lambda: (f64, f64)) -> Result<Self> {
        let prior = PriorSpec {
            kappa: Interval::new(kappa.0, kappa.1),
            lambda: Interval::new(lambda.0, lambda.1),
        };
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("kappa", self.kappa), ("lambda", self.lambda)] {
            if !(r.lo >= 0.0 && r.lo < r.hi && r.hi.is_finite()) {
                return Err(Error::domain(format!(
                    "{name} prior must satisfy 0 <= lo < hi < inf, got [{}, {}]",
                    r.lo, r.hi
                )));
            }
        }
        Ok(())
    }

    /// Support of parameter `index` (0 = kappa, 1 = lambda).
    pub fn support(&self, index: usize) -> Interval {
        if index == 0 {
            self.kappa
        } else {
            self.lambda
        }
    }

    /// Draw `[kappa, lambda]`. A zero rate cannot be simulated and is redrawn.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        let kappa = rng.random_range(self.kappa.lo..self.kappa.hi);
        let lambda = loop {
            let l = rng.random_range(self.lambda.lo..self.lambda.hi);
            if l > 0.0 {
                break l;
            }
        };
        [kappa, lambda]
    }
}

/// How each reference trajectory is simulated and observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Observation interval.
    pub dt: f64,
    /// Observations recorded per trajectory.
    pub min_obs: usize,
    /// Base seed; row `i` draws from stream `seed ^ i`.
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { dt: 0.5, min_obs: 1500, seed: 0 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::domain(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.min_obs < 3 {
            return Err(Error::domain(format!(
                "at least 3 observations are needed per trajectory, got {}",
                self.min_obs
            )));
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.min_obs as f64 * self.dt
    }
}
