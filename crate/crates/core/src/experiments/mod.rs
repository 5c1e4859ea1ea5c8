//! Evaluation protocol: cross-validated error metrics, posterior coverage,
//! the relative-scale scan and a direct fit on known steps and turns.

mod coverage;
mod crossval;
mod direct;
mod rscan;

pub use coverage::{
    coverage_p, coverage_report, coverage_test, empirical_coverage, histogram, ks_uniform, kolmogorov_p,
    CoverageEntry, CoverageReport, KsResult, HISTOGRAM_BINS,
};
pub use crossval::{cross_validate, select_replicates, Constraint, CrossValConfig, CrossValReport, FitMetrics, ReplicateRecord};
pub use direct::{direct_fit, DirectFit, DirectFitOptions, DirectFitWarning, MarginalSummary};
pub use rscan::{r_scan, simulate_track_summary, RScanCell, RScanConfig, RScanMetrics, RScanRecord, RScanReport};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::abc::{AdjustOptions, Method, ReferenceTable};
use crate::summaries::SummaryVector;
use crate::{Error, Result};

/// One estimator configuration: a method at an acceptance proportion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub method: Method,
    pub epsilon: f64,
}

impl FitSpec {
    pub fn new(method: Method, epsilon: f64) -> Self {
        FitSpec { method, epsilon }
    }

    /// Every method at every epsilon, methods outermost.
    pub fn grid(methods: &[Method], epsilons: &[f64]) -> Vec<FitSpec> {
        methods.iter().flat_map(|&m| epsilons.iter().map(move |&e| FitSpec::new(m, e))).collect()
    }
}

impl fmt::Display for FitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.method, self.epsilon)
    }
}

/// A named pass/fail outcome with a human-readable detail line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn check_pairs(truth: &[f64], medians: &[f64]) -> Result<()> {
    if truth.len() != medians.len() {
        return Err(Error::domain(format!(
            "length mismatch: {} true values, {} medians",
            truth.len(),
            medians.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::domain("no replicates"));
    }
    Ok(())
}

/// Root mean squared error of the posterior medians.
pub fn prediction_error(truth: &[f64], medians: &[f64]) -> Result<f64> {
    check_pairs(truth, medians)?;
    let sse: f64 = truth.iter().zip(medians).map(|(t, m)| (m - t).powi(2)).sum();
    Ok((sse / truth.len() as f64).sqrt())
}

/// Mean relative absolute error `|median - truth| / truth`.
pub fn md_index(truth: &[f64], medians: &[f64]) -> Result<f64> {
    check_pairs(truth, medians)?;
    if let Some(i) = truth.iter().position(|&t| t == 0.0) {
        return Err(Error::domain(format!("true value {i} is zero; relative error undefined")));
    }
    let total: f64 = truth.iter().zip(medians).map(|(t, m)| ((m - t) / t).abs()).sum();
    Ok(total / truth.len() as f64)
}

/// Accept once per distinct epsilon and adjust for every spec; results are
/// in `specs` order.
pub(crate) fn fit_specs(
    table: &ReferenceTable,
    s_obs: &SummaryVector,
    specs: &[FitSpec],
    options: &AdjustOptions,
) -> Result<Vec<crate::abc::WeightedPosterior>> {
    let scales = crate::abc::summary_scales(&table.summaries);
    let d = crate::abc::distances_with_scales(&table.summaries, s_obs, &scales);
    let mut cache: Vec<(f64, crate::abc::Acceptance)> = Vec::new();
    let mut out = Vec::with_capacity(specs.len());
    for spec in specs {
        let pos = match cache.iter().position(|(e, _)| *e == spec.epsilon) {
            Some(p) => p,
            None => {
                cache.push((spec.epsilon, crate::abc::accept_nearest(&d, scales, spec.epsilon)?));
                cache.len() - 1
            }
        };
        out.push(crate::abc::adjust(table, &cache[pos].1, s_obs, spec.method, options)?);
    }
    Ok(out)
}

/// Salts keep experiment streams apart from reference-table rows drawn
/// under the same base seed.
pub(crate) const CROSSVAL_SALT: u64 = 0x6376_0000_0000_0000;
pub(crate) const RSCAN_SALT: u64 = 0x7273_0000_0000_0000;
