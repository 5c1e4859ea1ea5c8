use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The inferred parameters, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    Kappa,
    Lambda,
}

impl Parameter {
    pub const ALL: [Parameter; 2] = [Parameter::Kappa, Parameter::Lambda];

    pub fn index(self) -> usize {
        match self {
            Parameter::Kappa => 0,
            Parameter::Lambda => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Parameter::Kappa => "kappa",
            Parameter::Lambda => "lambda",
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rejection,
    Loclinear,
    Neuralnet,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Rejection, Method::Loclinear, Method::Neuralnet];

    pub fn name(self) -> &'static str {
        match self {
            Method::Rejection => "rejection",
            Method::Loclinear => "loclinear",
            Method::Neuralnet => "neuralnet",
        }
    }

    pub fn is_corrected(self) -> bool {
        self != Method::Rejection
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown method '{s}'; valid methods: rejection, loclinear, neuralnet")))
    }
}

/// Weighted draws of `[kappa, lambda]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPosterior {
    pub draws: Vec<[f64; 2]>,
    /// Nonnegative, summing to one.
    pub weights: Vec<f64>,
    pub method: Method,
    /// Accepted proportion of the reference table.
    pub epsilon: f64,
    /// Realised distance threshold.
    pub delta: f64,
    /// Adjusted draws moved back onto the prior support.
    pub projected: usize,
}

impl WeightedPosterior {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// `(value, weight)` pairs for one parameter, sorted by value (stable).
    pub fn sorted_marginal(&self, parameter: Parameter) -> Vec<(f64, f64)> {
        let k = parameter.index();
        let mut pairs: Vec<(f64, f64)> =
            self.draws.iter().zip(&self.weights).map(|(d, &w)| (d[k], w)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs
    }

    pub fn quantile(&self, parameter: Parameter, q: f64) -> Result<f64> {
        weighted_quantile(self, parameter, q)
    }

    pub fn median(&self, parameter: Parameter) -> Result<f64> {
        weighted_quantile(self, parameter, 0.5)
    }

    pub fn hpd(&self, parameter: Parameter, alpha: f64) -> Result<(f64, f64)> {
        hpd_interval(self, parameter, alpha)
    }

    pub fn weighted_mean(&self, parameter: Parameter) -> f64 {
        let k = parameter.index();
        self.draws.iter().zip(&self.weights).map(|(d, w)| d[k] * w).sum()
    }

    pub fn weighted_variance(&self, parameter: Parameter) -> f64 {
        let k = parameter.index();
        let m = self.weighted_mean(parameter);
        self.draws.iter().zip(&self.weights).map(|(d, w)| w * (d[k] - m).powi(2)).sum()
    }
}

/// Normalise nonnegative weights to sum to one; all-zero input becomes
/// uniform.
pub(crate) fn normalize(weights: &mut [f64]) {
    let total: f64 = weights.iter().sum();
    if total > 0.0 && total.is_finite() {
        weights.iter_mut().for_each(|w| *w /= total);
    } else {
        let u = 1.0 / weights.len() as f64;
        weights.iter_mut().for_each(|w| *w = u);
    }
}

/// Slack on cumulative-weight comparisons against a target mass.
const MASS_TOL: f64 = 1e-12;

/// Smallest draw whose cumulative weight, in ascending order, reaches `q`.
pub fn weighted_quantile(posterior: &WeightedPosterior, parameter: Parameter, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::domain(format!("quantile level must lie in [0, 1], got {q}")));
    }
    if posterior.is_empty() {
        return Err(Error::domain("quantile of an empty posterior"));
    }
    let pairs = posterior.sorted_marginal(parameter);
    let mut cumulative = 0.0;
    for &(v, w) in &pairs {
        cumulative += w;
        if cumulative >= q - MASS_TOL {
            return Ok(v);
        }
    }
    Ok(pairs[pairs.len() - 1].0)
}

/// Shortest interval between two draws holding at least `alpha` of the
/// weight; ties go to the smaller lower endpoint.
pub fn hpd_interval(posterior: &WeightedPosterior, parameter: Parameter, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("HPD mass must lie in (0, 1), got {alpha}")));
    }
    if posterior.is_empty() {
        return Err(Error::domain("HPD of an empty posterior"));
    }
    let pairs = posterior.sorted_marginal(parameter);
    let n = pairs.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &(_, w) in &pairs {
        prefix.push(prefix.last().copied().unwrap_or(0.0) + w);
    }
    let target = alpha - MASS_TOL;
    let mut best: Option<(f64, f64)> = None;
    let mut end = 0usize;
    for start in 0..n {
        end = end.max(start);
        while end < n && prefix[end + 1] - prefix[start] < target {
            end += 1;
        }
        if end == n {
            break;
        }
        let (lo, hi) = (pairs[start].0, pairs[end].0);
        if best.is_none_or(|(blo, bhi)| hi - lo < bhi - blo) {
            best = Some((lo, hi));
        }
    }
    Ok(best.unwrap_or((pairs[0].0, pairs[n - 1].0)))
}
