use serde::{Deserialize, Serialize};

use super::{fit_specs, md_index, prediction_error, FitSpec, RSCAN_SALT};
use crate::abc::{AdjustOptions, Method, Parameter, ReferenceTable};
use crate::exec::Exec;
use crate::movement::{observe, simulate_until, MovementParams};
use crate::rng::retry_stream;
use crate::summaries::{summarize, SummaryVector};
use crate::{Error, Result};

const MAX_ATTEMPTS: u64 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RScanConfig {
    /// `R = lambda * dt`.
    pub r_values: Vec<f64>,
    pub kappa_values: Vec<f64>,
    pub n_per_cell: usize,
    pub dt: f64,
    pub n_obs: usize,
    pub fits: Vec<FitSpec>,
    pub seed: u64,
    #[serde(default)]
    pub options: AdjustOptions,
}

impl RScanConfig {
    pub fn new(r_values: Vec<f64>, kappa_values: Vec<f64>, fits: Vec<FitSpec>, seed: u64) -> Self {
        RScanConfig { r_values, kappa_values, n_per_cell: 50, dt: 0.5, n_obs: 1500, fits, seed, options: AdjustOptions::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r_values.is_empty() || self.kappa_values.is_empty() {
            return Err(Error::domain("the scan needs at least one R and one kappa"));
        }
        if let Some(r) = self.r_values.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::domain(format!("R must be > 0, got {r}")));
        }
        if let Some(k) = self.kappa_values.iter().find(|k| !(**k >= 0.0 && k.is_finite())) {
            return Err(Error::domain(format!("kappa must be >= 0, got {k}")));
        }
        if self.n_per_cell == 0 {
            return Err(Error::domain("n_per_cell must be >= 1"));
        }
        if self.fits.is_empty() {
            return Err(Error::domain("no (method, epsilon) pairs to evaluate"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::domain(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.n_obs < 3 {
            return Err(Error::domain("n_obs must be >= 3"));
        }
        Ok(())
    }

    /// `lambda = R / dt`.
    pub fn lambda_for(&self, r: f64) -> f64 {
        r / self.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RScanRecord {
    pub method: Method,
    #[serde(rename = "R")]
    pub r: f64,
    pub kappa_true: f64,
    pub rep: usize,
    pub param: Parameter,
    pub truth: f64,
    pub median: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RScanMetrics {
    pub method: Method,
    pub epsilon: f64,
    pub param: Parameter,
    pub prediction_error: f64,
    pub md_index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RScanCell {
    pub r: f64,
    pub kappa_true: f64,
    pub lambda_true: f64,
    /// Set when the cell lies outside the table's prior and was not run.
    pub skipped: Option<String>,
    pub metrics: Vec<RScanMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RScanReport {
    pub config: RScanConfig,
    /// Row-major over `(R, kappa)`.
    pub cells: Vec<RScanCell>,
    /// Ordered by cell, replicate, fit, parameter.
    pub records: Vec<RScanRecord>,
}

impl RScanReport {
    pub fn warnings(&self) -> impl Iterator<Item = &str> {
        self.cells.iter().filter_map(|c| c.skipped.as_deref())
    }

    pub fn cell(&self, r: f64, kappa: f64) -> Option<&RScanCell> {
        self.cells.iter().find(|c| c.r == r && c.kappa_true == kappa)
    }
}

/// Simulate and summarize one observed track for task `task`, redrawing on
/// a fresh stream when the track is degenerate.
pub fn simulate_track_summary(params: &MovementParams, dt: f64, n_obs: usize, seed: u64, task: u64) -> Result<SummaryVector> {
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = retry_stream(seed, task, attempt);
        let path = simulate_until(params, n_obs as f64 * dt, &mut rng)?;
        let track = observe(&path, dt, n_obs)?;
        match summarize(&track) {
            Ok(s) if s.is_finite() => return Ok(s),
            Ok(_) | Err(Error::DegenerateTrack) | Err(Error::TrackTooShort(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::domain(format!("task {task} produced no usable track in {MAX_ATTEMPTS} attempts")))
}

/// Fit tracks simulated at fixed `(R, kappa)` cells against one table.
pub fn r_scan(table: &ReferenceTable, config: &RScanConfig, exec: Exec) -> Result<RScanReport> {
    config.validate()?;
    table.validate()?;
    if (table.config.dt - config.dt).abs() > 1e-12 * config.dt {
        return Err(Error::domain(format!(
            "scan dt {} differs from the reference table's dt {}",
            config.dt, table.config.dt
        )));
    }

    let mut cells = Vec::new();
    let mut tasks = Vec::new();
    for &r in &config.r_values {
        for &kappa in &config.kappa_values {
            let lambda = config.lambda_for(r);
            let cell = cells.len();
            let skipped = if !table.prior.lambda.contains(lambda) || lambda <= 0.0 {
                Some(format!("R = {r}: lambda = {lambda} lies outside the prior [{}, {}]", table.prior.lambda.lo, table.prior.lambda.hi))
            } else if !table.prior.kappa.contains(kappa) {
                Some(format!("kappa = {kappa} lies outside the prior [{}, {}]", table.prior.kappa.lo, table.prior.kappa.hi))
            } else {
                tasks.extend((0..config.n_per_cell).map(|rep| (cell, rep)));
                None
            };
            cells.push(RScanCell { r, kappa_true: kappa, lambda_true: lambda, skipped, metrics: Vec::new() });
        }
    }

    let base = config.seed ^ RSCAN_SALT;
    let per_task = exec.try_map(tasks.len(), |t| -> Result<Vec<(usize, usize, [f64; 2])>> {
        let (cell, rep) = tasks[t];
        let c = &cells[cell];
        let params = MovementParams::new(c.kappa_true, c.lambda_true)?;
        let task_id = (cell * config.n_per_cell + rep) as u64;
        let s_obs = simulate_track_summary(&params, config.dt, config.n_obs, base, task_id)?;
        let posts = fit_specs(table, &s_obs, &config.fits, &config.options)?;
        posts
            .iter()
            .enumerate()
            .map(|(f, p)| Ok((f, rep, [p.median(Parameter::Kappa)?, p.median(Parameter::Lambda)?])))
            .collect()
    })?;

    let mut records = Vec::new();
    let mut per_cell: Vec<Vec<(usize, usize, [f64; 2])>> = vec![Vec::new(); cells.len()];
    for (t, fits) in per_task.into_iter().enumerate() {
        per_cell[tasks[t].0].extend(fits);
    }
    for (ci, cell) in cells.iter_mut().enumerate() {
        if cell.skipped.is_some() {
            continue;
        }
        let truth = [cell.kappa_true, cell.lambda_true];
        for &(f, rep, med) in &per_cell[ci] {
            for param in Parameter::ALL {
                records.push(RScanRecord {
                    method: config.fits[f].method,
                    r: cell.r,
                    kappa_true: cell.kappa_true,
                    rep,
                    param,
                    truth: truth[param.index()],
                    median: med[param.index()],
                });
            }
        }
        for (f, spec) in config.fits.iter().enumerate() {
            for param in Parameter::ALL {
                let meds: Vec<f64> =
                    per_cell[ci].iter().filter(|x| x.0 == f).map(|x| x.2[param.index()]).collect();
                let truths = vec![truth[param.index()]; meds.len()];
                cell.metrics.push(RScanMetrics {
                    method: spec.method,
                    epsilon: spec.epsilon,
                    param,
                    prediction_error: prediction_error(&truths, &meds)?,
                    md_index: md_index(&truths, &meds).unwrap_or(f64::NAN),
                });
            }
        }
    }
    Ok(RScanReport { config: config.clone(), cells, records })
}
