use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::summaries::{bessel_ratio_inverse, ln_bessel_i0, MAX_MEAN_COS};
use crate::{Error, Result};

/// Priors and grid for [`direct_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DirectFitOptions {
    /// Gamma prior on lambda: shape `a0`, rate `b0`. `(1, 0)` is the flat limit.
    pub a0: f64,
    pub b0: f64,
    /// Flat prior on kappa over `[0, kappa_max]`, evaluated on `grid_points` nodes.
    pub kappa_max: f64,
    pub grid_points: usize,
    /// Central interval mass.
    pub alpha: f64,
}

impl Default for DirectFitOptions {
    fn default() -> Self {
        DirectFitOptions { a0: 1.0, b0: 0.0, kappa_max: 200.0, grid_points: 4001, alpha: 0.95 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalSummary {
    /// Maximum-likelihood estimate.
    pub mle: f64,
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectFitWarning {
    /// The kappa likelihood still increases at the grid's upper end.
    KappaAtGridBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectFit {
    pub n_steps: usize,
    pub n_turns: usize,
    pub mean_cos: f64,
    pub lambda: MarginalSummary,
    pub kappa: MarginalSummary,
    pub options: DirectFitOptions,
    pub warnings: Vec<DirectFitWarning>,
}

impl DirectFitOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.a0 > 0.0 && self.b0 >= 0.0) {
            return Err(Error::domain(format!("gamma prior needs a0 > 0 and b0 >= 0, got ({}, {})", self.a0, self.b0)));
        }
        if !(self.kappa_max > 0.0 && self.kappa_max.is_finite()) || self.grid_points < 3 {
            return Err(Error::domain("kappa grid needs kappa_max > 0 and at least 3 points"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Posterior summaries for `(lambda, kappa)` from fully observed steps and
/// turns: conjugate Gamma for the exponential rate, and a grid posterior
/// under the von Mises likelihood for the concentration.
pub fn direct_fit(durations: &[f64], turns: &[f64], options: &DirectFitOptions) -> Result<DirectFit> {
    options.validate()?;
    if durations.len() < 2 || turns.len() < 2 {
        return Err(Error::domain(format!(
            "need at least 2 durations and 2 turns, got {} and {}",
            durations.len(),
            turns.len()
        )));
    }
    if let Some(t) = durations.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(Error::domain(format!("durations must be positive and finite, got {t}")));
    }
    if let Some(w) = turns.iter().find(|w| !w.is_finite()) {
        return Err(Error::domain(format!("turns must be finite, got {w}")));
    }

    let n = durations.len() as f64;
    let total: f64 = durations.iter().sum();
    let shape = n + options.a0;
    let rate = total + options.b0;
    let gamma = Gamma::new(shape, rate).map_err(|e| Error::domain(format!("lambda posterior: {e}")))?;
    let tail = 0.5 * (1.0 - options.alpha);
    let lambda = MarginalSummary {
        mle: n / total,
        median: gamma.inverse_cdf(0.5),
        lo: gamma.inverse_cdf(tail),
        hi: gamma.inverse_cdf(1.0 - tail),
    };

    let m = turns.len() as f64;
    let mean_cos = turns.iter().map(|w| w.cos()).sum::<f64>() / m;
    let mut warnings = Vec::new();
    let mut kappa_mle = bessel_ratio_inverse(mean_cos.clamp(0.0, MAX_MEAN_COS))?;
    if kappa_mle >= options.kappa_max {
        kappa_mle = options.kappa_max;
        warnings.push(DirectFitWarning::KappaAtGridBound);
    }

    let g = options.grid_points;
    let h = options.kappa_max / (g - 1) as f64;
    let grid: Vec<f64> = (0..g).map(|i| i as f64 * h).collect();
    let log_post: Vec<f64> = grid.iter().map(|&k| m * (k * mean_cos - ln_bessel_i0(k))).collect();
    let top = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let dens: Vec<f64> = log_post.iter().map(|l| (l - top).exp()).collect();
    let mut cdf = vec![0.0; g];
    for i in 1..g {
        cdf[i] = cdf[i - 1] + 0.5 * h * (dens[i - 1] + dens[i]);
    }
    let mass = cdf[g - 1];
    cdf.iter_mut().for_each(|c| *c /= mass);
    if log_post[g - 1] >= log_post[g - 2] && !warnings.contains(&DirectFitWarning::KappaAtGridBound) {
        warnings.push(DirectFitWarning::KappaAtGridBound);
    }
    let quantile = |q: f64| {
        let i = cdf.partition_point(|&c| c < q).clamp(1, g - 1);
        let (c0, c1) = (cdf[i - 1], cdf[i]);
        if c1 > c0 {
            grid[i - 1] + h * (q - c0) / (c1 - c0)
        } else {
            grid[i]
        }
    };
    let kappa = MarginalSummary { mle: kappa_mle, median: quantile(0.5), lo: quantile(tail), hi: quantile(1.0 - tail) };

    Ok(DirectFit {
        n_steps: durations.len(),
        n_turns: turns.len(),
        mean_cos,
        lambda,
        kappa,
        options: *options,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_durations() {
        let d = vec![0.5; 100];
        let t: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 0.3 } else { -0.3 }).collect();
        let f = direct_fit(&d, &t, &DirectFitOptions::default()).unwrap();
        assert!((f.lambda.median - 2.0).abs() < 0.2);
        assert_eq!(f.lambda.mle, 2.0);
        assert!(f.warnings.is_empty());
        assert!(f.kappa.lo < f.kappa.median && f.kappa.median < f.kappa.hi);
    }

    #[test]
    fn straight_turns_hit_the_bound() {
        let f = direct_fit(&[1.0, 2.0, 0.5], &[0.0, 0.0, 0.0], &DirectFitOptions::default()).unwrap();
        assert_eq!(f.kappa.mle, 200.0);
        assert!(f.warnings.contains(&DirectFitWarning::KappaAtGridBound));
    }

    #[test]
    fn degenerate_inputs() {
        let o = DirectFitOptions::default();
        assert!(direct_fit(&[1.0], &[0.1, 0.2], &o).is_err());
        assert!(direct_fit(&[1.0, 0.0], &[0.1, 0.2], &o).is_err());
        assert!(direct_fit(&[1.0, 1.0], &[0.1], &o).is_err());
    }
}
