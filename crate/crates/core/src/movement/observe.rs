use super::{LatentPath, Point};
use crate::{Error, Result};

/// Relative slack when comparing an elapsed time against `j * dt`, so that a
/// turn landing exactly on an observation time counts as reached even after
/// floating-point accumulation in the cumulative sums.
const TIE_TOL: f64 = 1e-12;

fn reached(cumulative: f64, time: f64) -> bool {
    cumulative <= time + TIE_TOL * time.abs().max(1.0)
}

/// The walk recorded at times `0, dt, 2 dt, ..., n_obs dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedTrack {
    pub dt: f64,
    /// `n_obs + 1` positions, the first at the origin.
    pub positions: Vec<Point>,
    /// `N_1 ..= N_{n_obs}`; `-1` while the walk is still on its first segment.
    pub change_counts: Vec<i64>,
}

impl ObservedTrack {
    pub fn n_obs(&self) -> usize {
        self.positions.len().saturating_sub(1)
    }
}

/// `N_j = max { m : t_0 + ... + t_m <= j dt }` for `j = 1..=n_obs`, or `-1`
/// when no partial sum has been reached yet.
pub fn change_counts(durations: &[f64], dt: f64, n_obs: usize) -> Result<Vec<i64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::domain(format!("dt must be > 0, got {dt}")));
    }
    let total: f64 = durations.iter().sum();
    if let Some(j) = (1..=n_obs).find(|&j| !reached(j as f64 * dt, total)) {
        return Err(Error::InsufficientPath { first_uncovered: j });
    }

    let mut counts = Vec::with_capacity(n_obs);
    let mut next = 0usize;
    let mut cumulative = 0.0;
    let mut pending = durations.first().copied().unwrap_or(f64::INFINITY);
    for j in 1..=n_obs {
        let time = j as f64 * dt;
        while next < durations.len() && reached(cumulative + pending, time) {
            cumulative += pending;
            next += 1;
            pending = durations.get(next).copied().unwrap_or(f64::INFINITY);
        }
        counts.push(next as i64 - 1);
    }
    Ok(counts)
}

/// Record the latent path every `dt` time units.
///
/// Observation `j` sits on the last turn point reached by time `j dt`, moved
/// along the current heading for the time remaining, so every observation
/// lies on the travelled polyline.
pub fn observe(path: &LatentPath, dt: f64, n_obs: usize) -> Result<ObservedTrack> {
    let counts = change_counts(&path.durations, dt, n_obs)?;
    let mut positions = Vec::with_capacity(n_obs + 1);
    positions.push(path.positions[0]);

    // Start time of the segment anchored at turn point `anchor`.
    let mut anchor = 0usize;
    let mut anchor_time = 0.0;
    for (j, &n_j) in counts.iter().enumerate() {
        let target = (n_j + 1) as usize;
        while anchor < target {
            anchor_time += path.durations[anchor];
            anchor += 1;
        }
        let time = (j + 1) as f64 * dt;
        let residual = (time - anchor_time).max(0.0);
        positions.push(path.positions[anchor].advance(path.headings[anchor], path.speed * residual));
    }
    Ok(ObservedTrack { dt, positions, change_counts: counts })
}
