//! Approximate Bayesian computation against a prior-predictive reference
//! table: rejection, local-linear adjustment and neural-network adjustment.

mod distance;
mod loclinear;
mod neuralnet;
mod posterior;
mod prior;
mod reject;
mod table;

pub use distance::{distances_with_scales, scaled_distance, standardized_distances, summary_scales};
pub use loclinear::{loclinear_adjust, WeightedQr};
pub use neuralnet::{fit_network, neuralnet_adjust, FittedNet, Mlp, NetConfig};
pub use posterior::{hpd_interval, weighted_quantile, Method, Parameter, WeightedPosterior};
pub use prior::{Interval, PriorSpec, SimConfig};
pub use reject::{abc_reject, accept, accept_nearest, accepted_count, Acceptance};
pub use table::{
    generate_reference_table, generate_rows, simulate_observation, simulate_row, table_from_rows,
    ReferenceTable, RowDraw,
};

use serde::{Deserialize, Serialize};

use crate::summaries::SummaryVector;
use crate::Result;

/// Scale on which the regression adjustments operate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    #[default]
    None,
    /// Regress `ln(theta)` and exponentiate the adjusted draws.
    Log,
}

impl Transform {
    pub fn forward(self, v: f64) -> f64 {
        match self {
            Transform::None => v,
            Transform::Log => v.max(f64::MIN_POSITIVE).ln(),
        }
    }

    pub fn inverse(self, v: f64) -> f64 {
        match self {
            Transform::None => v,
            Transform::Log => v.exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AdjustOptions {
    pub transform: Transform,
    pub net: NetConfig,
}

/// Map adjusted draws back from the regression scale, project them onto the
/// prior support and attach normalised kernel weights.
pub(crate) fn finish_adjusted(
    table: &ReferenceTable,
    acceptance: &Acceptance,
    mut draws: Vec<[f64; 2]>,
    mut weights: Vec<f64>,
    method: Method,
    options: &AdjustOptions,
) -> WeightedPosterior {
    let mut projected = 0;
    for d in &mut draws {
        let mut moved = false;
        for (k, v) in d.iter_mut().enumerate() {
            let support = table.prior.support(k);
            let raw = options.transform.inverse(*v);
            let clamped = if raw.is_nan() { support.lo } else { support.clamp(raw) };
            moved |= clamped != raw;
            *v = clamped;
        }
        projected += usize::from(moved);
    }
    posterior::normalize(&mut weights);
    WeightedPosterior { draws, weights, method, epsilon: acceptance.epsilon, delta: acceptance.delta, projected }
}

/// Posterior from an existing acceptance step.
pub fn adjust(
    table: &ReferenceTable,
    acceptance: &Acceptance,
    s_obs: &SummaryVector,
    method: Method,
    options: &AdjustOptions,
) -> Result<WeightedPosterior> {
    match method {
        Method::Rejection => Ok(acceptance.rejection_posterior(table)),
        Method::Loclinear => loclinear_adjust(table, acceptance, s_obs, options),
        Method::Neuralnet => neuralnet_adjust(table, acceptance, s_obs, &options.net, options),
    }
}

/// Full pipeline: accept at `epsilon`, then adjust with `method`.
pub fn fit(
    table: &ReferenceTable,
    s_obs: &SummaryVector,
    method: Method,
    epsilon: f64,
    options: &AdjustOptions,
) -> Result<WeightedPosterior> {
    let acceptance = accept(table, s_obs, epsilon)?;
    adjust(table, &acceptance, s_obs, method, options)
}
