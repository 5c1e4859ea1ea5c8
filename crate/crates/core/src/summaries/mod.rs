//! Summary statistics of an observed track.
//!
//! A track is reduced to the displacement lengths and heading changes
//! between consecutive observations, and from those to four numbers: the
//! inverse mean displacement, a von Mises concentration estimate from the
//! mean cosine of the heading changes, and the standard deviations of the
//! heading changes and of the displacements.

mod bessel;

pub use bessel::{bessel_i0_scaled, bessel_ratio, bessel_ratio_inverse, ln_bessel_i0};

use serde::{Deserialize, Serialize};

use crate::movement::{wrap_angle, ObservedTrack, Point};
use crate::{Error, Result};

/// Upper clamp on the mean cosine before inversion; keeps the concentration
/// summary finite for perfectly straight tracks.
pub const MAX_MEAN_COS: f64 = 1.0 - 1e-12;

pub const SUMMARY_NAMES: [&str; 4] = ["s1", "s2", "s3", "s4"];

/// Displacements and heading changes between consecutive observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedDecomposition {
    pub step_lengths: Vec<f64>,
    pub headings: Vec<f64>,
    pub turn_angles: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryVector {
    /// Inverse of the mean observed step length.
    pub s1: f64,
    /// Concentration estimate `A^{-1}(mean cos turn)`.
    pub s2: f64,
    /// Standard deviation of the observed turning angles.
    pub s3: f64,
    /// Standard deviation of the observed step lengths.
    pub s4: f64,
}

impl SummaryVector {
    pub fn to_array(self) -> [f64; 4] {
        [self.s1, self.s2, self.s3, self.s4]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        SummaryVector { s1: a[0], s2: a[1], s3: a[2], s4: a[3] }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

pub fn decompose(track: &ObservedTrack) -> Result<ObservedDecomposition> {
    decompose_positions(&track.positions)
}

pub fn decompose_positions(positions: &[Point]) -> Result<ObservedDecomposition> {
    if positions.len() < 3 {
        return Err(Error::TrackTooShort(format!(
            "need at least 3 positions, got {}",
            positions.len()
        )));
    }
    let (step_lengths, headings): (Vec<f64>, Vec<f64>) = positions
        .windows(2)
        .map(|w| {
            let (dx, dy) = (w[1].x - w[0].x, w[1].y - w[0].y);
            (dx.hypot(dy), dy.atan2(dx))
        })
        .unzip();
    let turn_angles = headings.windows(2).map(|h| wrap_angle(h[1] - h[0])).collect();
    Ok(ObservedDecomposition { step_lengths, headings, turn_angles })
}

pub fn summarize(track: &ObservedTrack) -> Result<SummaryVector> {
    summarize_positions(&track.positions)
}

pub fn summarize_positions(positions: &[Point]) -> Result<SummaryVector> {
    let dec = decompose_positions(positions)?;
    summarize_decomposition(&dec)
}

pub fn summarize_decomposition(dec: &ObservedDecomposition) -> Result<SummaryVector> {
    if dec.turn_angles.len() < 2 {
        return Err(Error::TrackTooShort(format!(
            "need at least 2 turning angles, got {}",
            dec.turn_angles.len()
        )));
    }
    let mean_step = mean(&dec.step_lengths);
    if mean_step <= 0.0 {
        return Err(Error::DegenerateTrack);
    }
    let mean_cos = dec.turn_angles.iter().map(|w| w.cos()).sum::<f64>() / dec.turn_angles.len() as f64;
    Ok(SummaryVector {
        s1: 1.0 / mean_step,
        s2: bessel_ratio_inverse(mean_cos.clamp(0.0, MAX_MEAN_COS))?,
        s3: sample_sd(&dec.turn_angles),
        s4: sample_sd(&dec.step_lengths),
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (divisor `n - 1`). Deviations are taken from
/// the first element before averaging so a constant sequence gives exactly 0.
pub(crate) fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let origin = xs[0];
    let shifted_mean = xs.iter().map(|x| x - origin).sum::<f64>() / xs.len() as f64;
    let ss: f64 = xs.iter().map(|x| (x - origin - shifted_mean).powi(2)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}
