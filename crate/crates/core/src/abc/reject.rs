use super::distance::{distances_with_scales, summary_scales};
use super::posterior::normalize;
use super::{Method, ReferenceTable, WeightedPosterior};
use crate::summaries::SummaryVector;
use crate::{Error, Result};

/// The rows closest to an observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Acceptance {
    /// Accepted row indices, nearest first (ties by row index).
    pub indices: Vec<usize>,
    /// Distances of the accepted rows, aligned with `indices`.
    pub distances: Vec<f64>,
    /// Largest accepted distance.
    pub delta: f64,
    pub epsilon: f64,
    /// Column scales used for the distances.
    pub scales: [f64; 4],
}

/// Number of rows kept at acceptance proportion `epsilon`: `ceil(epsilon * n)`.
pub fn accepted_count(epsilon: f64, n: usize) -> usize {
    let k = (epsilon * n as f64 - 1e-9).ceil();
    (k.max(1.0) as usize).min(n)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::domain(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    Ok(())
}

/// Accept the `ceil(epsilon * n)` smallest of precomputed distances.
pub fn accept_nearest(distances: &[f64], scales: [f64; 4], epsilon: f64) -> Result<Acceptance> {
    check_epsilon(epsilon)?;
    if distances.is_empty() {
        return Err(Error::domain("cannot accept from an empty reference table"));
    }
    let k = accepted_count(epsilon, distances.len());
    let mut order: Vec<usize> = (0..distances.len()).collect();
    let by_distance = |a: &usize, b: &usize| distances[*a].total_cmp(&distances[*b]).then(a.cmp(b));
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, by_distance);
        order.truncate(k);
    }
    order.sort_unstable_by(by_distance);
    let accepted: Vec<f64> = order.iter().map(|&i| distances[i]).collect();
    Ok(Acceptance {
        delta: accepted.last().copied().unwrap_or(0.0),
        indices: order,
        distances: accepted,
        epsilon,
        scales,
    })
}

/// Rejection step: keep the rows nearest to `s_obs`.
pub fn accept(table: &ReferenceTable, s_obs: &SummaryVector, epsilon: f64) -> Result<Acceptance> {
    check_epsilon(epsilon)?;
    let scales = summary_scales(&table.summaries);
    let d = distances_with_scales(&table.summaries, s_obs, &scales);
    accept_nearest(&d, scales, epsilon)
}

impl Acceptance {
    /// Accepted parameters with uniform weights.
    pub fn rejection_posterior(&self, table: &ReferenceTable) -> WeightedPosterior {
        let mut weights = vec![1.0; self.indices.len()];
        normalize(&mut weights);
        WeightedPosterior {
            draws: self.indices.iter().map(|&i| table.params[i]).collect(),
            weights,
            method: Method::Rejection,
            epsilon: self.epsilon,
            delta: self.delta,
            projected: 0,
        }
    }

    /// Epanechnikov weights `1 - (d / delta)^2`, unnormalised.
    pub fn kernel_weights(&self) -> Vec<f64> {
        if self.delta > 0.0 {
            self.distances.iter().map(|d| (1.0 - (d / self.delta).powi(2)).max(0.0)).collect()
        } else {
            vec![1.0; self.distances.len()]
        }
    }
}

/// Rejection ABC with uniform weights on the accepted rows.
pub fn abc_reject(table: &ReferenceTable, s_obs: &SummaryVector, epsilon: f64) -> Result<WeightedPosterior> {
    Ok(accept(table, s_obs, epsilon)?.rejection_posterior(table))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(accepted_count(0.001, 100_000), 100);
        assert_eq!(accepted_count(0.001, 99_999), 100);
        assert_eq!(accepted_count(1.0, 7), 7);
        assert_eq!(accepted_count(1.0 / 7.0, 7), 1);
        assert_eq!(accepted_count(0.1, 1000), 100);
    }

    #[test]
    fn ties_broken_by_index() {
        let d = [1.0, 0.5, 0.5, 0.2, 0.5];
        let a = accept_nearest(&d, [1.0; 4], 0.6).unwrap();
        assert_eq!(a.indices, vec![3, 1, 2]);
        assert_eq!(a.delta, 0.5);
    }

    #[test]
    fn bad_epsilon() {
        assert!(accept_nearest(&[1.0], [1.0; 4], 0.0).is_err());
        assert!(accept_nearest(&[1.0], [1.0; 4], 1.5).is_err());
    }

    #[test]
    fn kernel_weights_vanish_at_threshold() {
        let a = accept_nearest(&[0.0, 1.0, 2.0], [1.0; 4], 1.0).unwrap();
        assert_eq!(a.kernel_weights(), vec![1.0, 0.75, 0.0]);
    }
}
