use serde::{Deserialize, Serialize};

use super::{CrossValReport, FitSpec, ReplicateRecord};
use crate::abc::{Method, Parameter, WeightedPosterior};

pub const HISTOGRAM_BINS: usize = 20;

/// Weight of draws strictly below `truth` plus half the weight equal to it.
pub fn coverage_p(posterior: &WeightedPosterior, param: Parameter, truth: f64) -> f64 {
    let k = param.index();
    let (mut below, mut equal) = (0.0, 0.0);
    for (d, &w) in posterior.draws.iter().zip(&posterior.weights) {
        if d[k] < truth {
            below += w;
        } else if d[k] == truth {
            equal += w;
        }
    }
    let total: f64 = posterior.weights.iter().sum();
    if total > 0.0 {
        ((below + 0.5 * equal) / total).clamp(0.0, 1.0)
    } else {
        0.5
    }
}

/// `[p_1, ..., p_n]` for paired posteriors and true values.
pub fn coverage_test(posteriors: &[WeightedPosterior], truths: &[f64], param: Parameter) -> Vec<f64> {
    posteriors.iter().zip(truths).map(|(p, &t)| coverage_p(p, param, t)).collect()
}

/// Fraction of records whose HPD interval contains the truth; 0 when empty.
pub fn empirical_coverage<'a>(records: impl IntoIterator<Item = &'a ReplicateRecord>) -> f64 {
    let (mut hit, mut n) = (0usize, 0usize);
    for r in records {
        n += 1;
        hit += usize::from(r.covered());
    }
    if n == 0 {
        0.0
    } else {
        hit as f64 / n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov tail probability with Stephens' small-sample
/// correction.
pub fn kolmogorov_p(statistic: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let t = (sn + 0.12 + 0.11 / sn) * statistic;
    if t < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * t * t).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS test against U(0, 1).
pub fn ks_uniform(ps: &[f64]) -> KsResult {
    if ps.is_empty() {
        return KsResult { statistic: 0.0, p_value: 1.0 };
    }
    let mut xs = ps.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = x.clamp(0.0, 1.0);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    KsResult { statistic: d, p_value: kolmogorov_p(d, xs.len()) }
}

/// Counts over `bins` equal-width bins of [0, 1]; 1 lands in the last bin.
pub fn histogram(ps: &[f64], bins: usize) -> Vec<usize> {
    let mut counts = vec![0usize; bins];
    if bins == 0 {
        return counts;
    }
    for &p in ps {
        let b = ((p.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageEntry {
    pub method: Method,
    pub epsilon: f64,
    pub param: Parameter,
    /// Share of replicates whose HPD interval contains the truth.
    pub coverage: f64,
    pub p_values: Vec<f64>,
    pub mean_p: f64,
    pub ks: KsResult,
    pub histogram: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub alpha: f64,
    pub entries: Vec<CoverageEntry>,
}

impl CoverageReport {
    pub fn entry(&self, spec: FitSpec, param: Parameter) -> Option<&CoverageEntry> {
        self.entries
            .iter()
            .find(|e| e.method == spec.method && e.epsilon == spec.epsilon && e.param == param)
    }
}

/// Coverage and uniformity diagnostics for every fit in a cross-validation.
pub fn coverage_report(cv: &CrossValReport) -> CoverageReport {
    let mut entries = Vec::new();
    for &spec in &cv.config.fits {
        for param in Parameter::ALL {
            let recs: Vec<&ReplicateRecord> = cv.records_for(spec, param).collect();
            let p_values: Vec<f64> = recs.iter().map(|r| r.p).collect();
            let mean_p = if p_values.is_empty() { f64::NAN } else { p_values.iter().sum::<f64>() / p_values.len() as f64 };
            entries.push(CoverageEntry {
                method: spec.method,
                epsilon: spec.epsilon,
                param,
                coverage: empirical_coverage(recs.iter().copied()),
                ks: ks_uniform(&p_values),
                histogram: histogram(&p_values, HISTOGRAM_BINS),
                mean_p,
                p_values,
            });
        }
    }
    CoverageReport { alpha: cv.config.alpha, entries }
}
