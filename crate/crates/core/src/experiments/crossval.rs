use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{fit_specs, md_index, prediction_error, FitSpec, CROSSVAL_SALT};
use crate::abc::{AdjustOptions, Method, Parameter, ReferenceTable};
use crate::exec::Exec;
use crate::rng::stream;
use crate::{Error, Result};

/// Pseudo-observations are drawn only from rows inside this box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub kappa_max: f64,
    pub lambda_max: f64,
}

impl Default for Constraint {
    fn default() -> Self {
        Constraint { kappa_max: 70.0, lambda_max: 25.0 }
    }
}

impl Constraint {
    pub const NONE: Constraint = Constraint { kappa_max: f64::INFINITY, lambda_max: f64::INFINITY };

    pub fn admits(&self, params: &[f64; 2]) -> bool {
        params[0] <= self.kappa_max && params[1] <= self.lambda_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValConfig {
    pub fits: Vec<FitSpec>,
    pub n_rep: usize,
    pub constraint: Constraint,
    pub seed: u64,
    /// HPD mass.
    pub alpha: f64,
    #[serde(default)]
    pub options: AdjustOptions,
}

impl CrossValConfig {
    pub fn new(fits: Vec<FitSpec>, n_rep: usize, seed: u64) -> Self {
        CrossValConfig { fits, n_rep, constraint: Constraint::default(), seed, alpha: 0.95, options: AdjustOptions::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fits.is_empty() {
            return Err(Error::domain("no (method, epsilon) pairs to evaluate"));
        }
        if self.n_rep == 0 {
            return Err(Error::domain("n_rep must be >= 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        for f in &self.fits {
            if !(f.epsilon > 0.0 && f.epsilon <= 1.0) {
                return Err(Error::domain(format!("epsilon must lie in (0, 1], got {}", f.epsilon)));
            }
        }
        Ok(())
    }
}

/// One parameter of one replicate under one fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub method: Method,
    pub epsilon: f64,
    pub rep: usize,
    /// Table row used as the pseudo-observation.
    pub row: usize,
    pub param: Parameter,
    pub truth: f64,
    pub median: f64,
    pub hpd_lo: f64,
    pub hpd_hi: f64,
    /// Posterior weight below the truth, plus half the weight at it.
    pub p: f64,
}

impl ReplicateRecord {
    pub fn covered(&self) -> bool {
        self.hpd_lo <= self.truth && self.truth <= self.hpd_hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitMetrics {
    pub method: Method,
    pub epsilon: f64,
    pub param: Parameter,
    pub prediction_error: f64,
    pub md_index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValReport {
    pub config: CrossValConfig,
    pub rows: Vec<usize>,
    /// Ordered by replicate, then fit, then parameter.
    pub records: Vec<ReplicateRecord>,
    pub metrics: Vec<FitMetrics>,
}

impl CrossValReport {
    pub fn records_for(&self, spec: FitSpec, param: Parameter) -> impl Iterator<Item = &ReplicateRecord> {
        self.records
            .iter()
            .filter(move |r| r.method == spec.method && r.epsilon == spec.epsilon && r.param == param)
    }

    pub fn metric(&self, spec: FitSpec, param: Parameter) -> Option<&FitMetrics> {
        self.metrics
            .iter()
            .find(|m| m.method == spec.method && m.epsilon == spec.epsilon && m.param == param)
    }
}

/// Draw `n_rep` distinct constrained rows, in draw order.
pub fn select_replicates(table: &ReferenceTable, constraint: Constraint, n_rep: usize, seed: u64) -> Result<Vec<usize>> {
    let eligible: Vec<usize> = (0..table.len()).filter(|&i| constraint.admits(&table.params[i])).collect();
    if eligible.len() < n_rep {
        return Err(Error::InsufficientRows { needed: n_rep, available: eligible.len() });
    }
    let mut rng = stream(seed ^ CROSSVAL_SALT, 0);
    Ok(sample(&mut rng, eligible.len(), n_rep).into_iter().map(|k| eligible[k]).collect())
}

/// Leave-one-out evaluation: each replicate takes a constrained row as the
/// observation, removes it from the table and fits every spec.
pub fn cross_validate(table: &ReferenceTable, config: &CrossValConfig, exec: Exec) -> Result<CrossValReport> {
    config.validate()?;
    table.validate()?;
    if table.len() < 2 {
        return Err(Error::InsufficientRows { needed: 2, available: table.len() });
    }
    let rows = select_replicates(table, config.constraint, config.n_rep, config.seed)?;

    let per_rep = exec.try_map(rows.len(), |rep| -> Result<Vec<ReplicateRecord>> {
        let row = rows[rep];
        let reduced = table.without_row(row);
        let s_obs = table.summaries[row];
        let truth = table.params[row];
        let posteriors = fit_specs(&reduced, &s_obs, &config.fits, &config.options)?;
        let mut out = Vec::with_capacity(config.fits.len() * 2);
        for (spec, post) in config.fits.iter().zip(&posteriors) {
            for param in Parameter::ALL {
                let t = truth[param.index()];
                let (hpd_lo, hpd_hi) = post.hpd(param, config.alpha)?;
                out.push(ReplicateRecord {
                    method: spec.method,
                    epsilon: spec.epsilon,
                    rep,
                    row,
                    param,
                    truth: t,
                    median: post.median(param)?,
                    hpd_lo,
                    hpd_hi,
                    p: super::coverage_p(post, param, t),
                });
            }
        }
        Ok(out)
    })?;
    let records: Vec<ReplicateRecord> = per_rep.into_iter().flatten().collect();

    let mut metrics = Vec::new();
    for spec in &config.fits {
        for param in Parameter::ALL {
            let (truth, med): (Vec<f64>, Vec<f64>) = records
                .iter()
                .filter(|r| r.method == spec.method && r.epsilon == spec.epsilon && r.param == param)
                .map(|r| (r.truth, r.median))
                .unzip();
            metrics.push(FitMetrics {
                method: spec.method,
                epsilon: spec.epsilon,
                param,
                prediction_error: prediction_error(&truth, &med)?,
                // Rows with a zero truth cannot occur under a positive prior;
                // report NaN rather than failing the whole run.
                md_index: md_index(&truth, &med).unwrap_or(f64::NAN),
            });
        }
    }
    Ok(CrossValReport { config: config.clone(), rows, records, metrics })
}
