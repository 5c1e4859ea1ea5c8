use std::ops::Range;

use super::{PriorSpec, SimConfig};
use crate::movement::{observe, simulate_until, MovementParams, ObservedTrack};
use crate::rng::retry_stream;
use crate::summaries::{summarize, SummaryVector};
use crate::{Error, Exec, Result};

/// Retries allowed for a row whose track cannot be summarised.
const MAX_ATTEMPTS: u64 = 16;

/// Prior-predictive simulations paired with their summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTable {
    pub prior: PriorSpec,
    pub config: SimConfig,
    /// `[kappa, lambda]` per row.
    pub params: Vec<[f64; 2]>,
    pub summaries: Vec<SummaryVector>,
    /// Rows that had to be redrawn on a bumped stream.
    pub resamples: usize,
}

impl ReferenceTable {
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// The table with row `index` removed.
    pub fn without_row(&self, index: usize) -> ReferenceTable {
        let mut t = self.clone();
        t.params.remove(index);
        t.summaries.remove(index);
        t
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.len() != self.summaries.len() {
            return Err(Error::Schema(format!(
                "{} parameter rows but {} summary rows",
                self.params.len(),
                self.summaries.len()
            )));
        }
        if let Some(i) = self.summaries.iter().position(|s| !s.is_finite()) {
            return Err(Error::Schema(format!("row {i} has a non-finite summary")));
        }
        Ok(())
    }
}

/// One simulated row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowDraw {
    pub params: [f64; 2],
    pub summary: SummaryVector,
    /// Number of redraws before a usable track was produced.
    pub resamples: u64,
}

/// Draw parameters from the prior and simulate the observed track for row
/// `index` on retry stream `attempt`.
pub fn simulate_observation(
    prior: &PriorSpec,
    config: &SimConfig,
    index: u64,
    attempt: u64,
) -> Result<([f64; 2], ObservedTrack)> {
    let mut rng = retry_stream(config.seed, index, attempt);
    let theta = prior.sample(&mut rng);
    let params = MovementParams::new(theta[0], theta[1])?;
    let path = simulate_until(&params, config.horizon(), &mut rng)?;
    let track = observe(&path, config.dt, config.min_obs)?;
    Ok((theta, track))
}

pub fn simulate_row(prior: &PriorSpec, config: &SimConfig, index: u64) -> Result<RowDraw> {
    for attempt in 0..MAX_ATTEMPTS {
        let (params, track) = simulate_observation(prior, config, index, attempt)?;
        match summarize(&track) {
            Ok(summary) if summary.is_finite() => {
                return Ok(RowDraw { params, summary, resamples: attempt })
            }
            Ok(_) | Err(Error::DegenerateTrack) | Err(Error::TrackTooShort(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::domain(format!("row {index} produced no usable track in {MAX_ATTEMPTS} attempts")))
}

/// Simulate rows `range` in index order.
pub fn generate_rows(
    prior: &PriorSpec,
    config: &SimConfig,
    range: Range<usize>,
    exec: Exec,
) -> Result<Vec<RowDraw>> {
    prior.validate()?;
    config.validate()?;
    let start = range.start;
    exec.try_map(range.len(), |k| simulate_row(prior, config, (start + k) as u64))
}

pub fn table_from_rows(prior: PriorSpec, config: SimConfig, rows: &[RowDraw]) -> ReferenceTable {
    ReferenceTable {
        prior,
        config,
        params: rows.iter().map(|r| r.params).collect(),
        summaries: rows.iter().map(|r| r.summary).collect(),
        resamples: rows.iter().map(|r| r.resamples as usize).sum(),
    }
}

/// Build a reference table of `n_sims` rows. Row `i` depends only on
/// `(prior, config, i)`, so the table is identical for every [`Exec`].
pub fn generate_reference_table(
    prior: &PriorSpec,
    n_sims: usize,
    config: &SimConfig,
    exec: Exec,
) -> Result<ReferenceTable> {
    if n_sims == 0 {
        return Err(Error::domain("n_sims must be >= 1"));
    }
    let rows = generate_rows(prior, config, 0..n_sims, exec)?;
    Ok(table_from_rows(*prior, *config, &rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SimConfig {
        SimConfig { dt: 0.5, min_obs: 60, seed: 2024 }
    }

    #[test]
    fn worker_count_does_not_change_table() {
        let prior = PriorSpec::default();
        let a = generate_reference_table(&prior, 4, &small_config(), Exec::Sequential).unwrap();
        let b = generate_reference_table(&prior, 4, &small_config(), Exec::Workers(4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        a.validate().unwrap();
    }

    #[test]
    fn rows_are_independent_of_range_split() {
        let prior = PriorSpec::default();
        let cfg = small_config();
        let all = generate_rows(&prior, &cfg, 0..10, Exec::Sequential).unwrap();
        let tail = generate_rows(&prior, &cfg, 6..10, Exec::Sequential).unwrap();
        assert_eq!(&all[6..], &tail[..]);
    }

    #[test]
    fn zero_rows_rejected() {
        assert!(generate_reference_table(&PriorSpec::default(), 0, &small_config(), Exec::Sequential).is_err());
    }

    #[test]
    fn without_row_drops_one() {
        let t = generate_reference_table(&PriorSpec::default(), 5, &small_config(), Exec::Sequential).unwrap();
        let u = t.without_row(2);
        assert_eq!(u.len(), 4);
        assert_eq!(u.params[2], t.params[3]);
    }
}
