use super::{Acceptance, AdjustOptions, Method, ReferenceTable, WeightedPosterior};
use crate::summaries::{SummaryVector, SUMMARY_NAMES};
use crate::{Error, Result};

/// Relative residual norm below which a column counts as a combination of
/// the columns before it.
const RANK_TOL: f64 = 1e-10;

/// Thin QR factorisation of `diag(sqrt(w)) X` by modified Gram–Schmidt with
/// one re-orthogonalisation pass.
#[derive(Debug, Clone)]
pub struct WeightedQr {
    sqrt_w: Vec<f64>,
    /// Orthonormal columns, each of length n.
    q: Vec<Vec<f64>>,
    /// Upper-triangular factor, row-major p x p.
    r: Vec<Vec<f64>>,
}

impl WeightedQr {
    /// `columns[j][i]` is entry (i, j) of the design. Fails with the names of
    /// every column that is (numerically) spanned by the columns before it.
    pub fn new(columns: &[Vec<f64>], weights: &[f64], names: &[String]) -> Result<Self> {
        let p = columns.len();
        let sqrt_w: Vec<f64> = weights.iter().map(|w| w.max(0.0).sqrt()).collect();
        let mut q: Vec<Vec<f64>> = Vec::with_capacity(p);
        let mut r = vec![vec![0.0; p]; p];
        let mut collinear = Vec::new();
        for (j, col) in columns.iter().enumerate() {
            let mut v: Vec<f64> = col.iter().zip(&sqrt_w).map(|(x, s)| x * s).collect();
            let original = norm(&v);
            for _pass in 0..2 {
                for (i, qi) in q.iter().enumerate() {
                    let proj = dot(qi, &v);
                    r[i][j] += proj;
                    v.iter_mut().zip(qi).for_each(|(vk, qk)| *vk -= proj * qk);
                }
            }
            let remaining = norm(&v);
            if original == 0.0 || remaining <= RANK_TOL * original {
                collinear.push(names.get(j).cloned().unwrap_or_else(|| format!("column {j}")));
                q.push(vec![0.0; v.len()]);
                continue;
            }
            r[j][j] = remaining;
            v.iter_mut().for_each(|x| *x /= remaining);
            q.push(v);
        }
        if !collinear.is_empty() {
            return Err(Error::SingularRegression { columns: collinear });
        }
        Ok(WeightedQr { sqrt_w, q, r })
    }

    /// Weighted least-squares coefficients for response `y`.
    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        let wy: Vec<f64> = y.iter().zip(&self.sqrt_w).map(|(a, s)| a * s).collect();
        let p = self.q.len();
        let z: Vec<f64> = self.q.iter().map(|qj| dot(qj, &wy)).collect();
        let mut beta = vec![0.0; p];
        for j in (0..p).rev() {
            let tail: f64 = (j + 1..p).map(|k| self.r[j][k] * beta[k]).sum();
            beta[j] = (z[j] - tail) / self.r[j][j];
        }
        beta
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Design columns `[1, (s_k - s_obs_k) / scale_k ...]` for the accepted rows.
pub(crate) fn centered_design(
    summaries: &[SummaryVector],
    s_obs: &SummaryVector,
    scales: &[f64; 4],
) -> Vec<Vec<f64>> {
    let obs = s_obs.to_array();
    let mut columns = vec![vec![1.0; summaries.len()]];
    for k in 0..4 {
        columns.push(summaries.iter().map(|s| (s.to_array()[k] - obs[k]) / scales[k]).collect());
    }
    columns
}

pub(crate) fn design_names() -> Vec<String> {
    std::iter::once("intercept").chain(SUMMARY_NAMES).map(String::from).collect()
}

/// Local-linear regression adjustment of the accepted draws.
///
/// Each parameter is regressed on the standardised summaries with
/// Epanechnikov weights; the accepted draws are shifted to
/// `m(s_obs) + residual`.
pub fn loclinear_adjust(
    table: &ReferenceTable,
    acceptance: &Acceptance,
    s_obs: &SummaryVector,
    options: &AdjustOptions,
) -> Result<WeightedPosterior> {
    let n = acceptance.indices.len();
    let p = 5;
    if n <= p {
        return Err(Error::InsufficientRows { needed: p + 1, available: n });
    }
    let summaries: Vec<SummaryVector> = acceptance.indices.iter().map(|&i| table.summaries[i]).collect();
    let design = centered_design(&summaries, s_obs, &acceptance.scales);
    let kernel = acceptance.kernel_weights();
    let qr = WeightedQr::new(&design, &kernel, &design_names())?;

    let mut draws = vec![[0.0; 2]; n];
    for k in 0..2 {
        let y: Vec<f64> = acceptance
            .indices
            .iter()
            .map(|&i| options.transform.forward(table.params[i][k]))
            .collect();
        let beta = qr.solve(&y);
        for (row, draw) in draws.iter_mut().enumerate() {
            let fitted: f64 = (0..p).map(|c| beta[c] * design[c][row]).sum();
            draw[k] = beta[0] + (y[row] - fitted);
        }
    }
    Ok(super::finish_adjusted(table, acceptance, draws, kernel, Method::Loclinear, options))
}
