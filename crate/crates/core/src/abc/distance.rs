use crate::summaries::{sample_sd, SummaryVector};

/// Median of `xs` (mean of the two middle values for even length).
/// Reorders `xs`.
pub(crate) fn median_in_place(xs: &mut [f64]) -> f64 {
    let n = xs.len();
    assert!(n > 0, "median of empty slice");
    let mid = n / 2;
    let (left, upper, _) = xs.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = left.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Median absolute deviation from the median (no consistency constant).
pub(crate) fn mad(xs: &[f64]) -> f64 {
    let mut buf = xs.to_vec();
    let m = median_in_place(&mut buf);
    for (b, x) in buf.iter_mut().zip(xs) {
        *b = (x - m).abs();
    }
    median_in_place(&mut buf)
}

/// Scale of one column: MAD, else sample standard deviation, else 1.
pub(crate) fn robust_scale(xs: &[f64]) -> f64 {
    let m = mad(xs);
    if m > 0.0 {
        return m;
    }
    let sd = sample_sd(xs);
    if sd > 0.0 {
        sd
    } else {
        1.0
    }
}

/// Per-column scales used to standardise summaries.
pub fn summary_scales(summaries: &[SummaryVector]) -> [f64; 4] {
    let mut out = [1.0; 4];
    let mut column = Vec::with_capacity(summaries.len());
    for (k, scale) in out.iter_mut().enumerate() {
        column.clear();
        column.extend(summaries.iter().map(|s| s.to_array()[k]));
        *scale = robust_scale(&column);
    }
    out
}

pub fn scaled_distance(s: &SummaryVector, s_obs: &SummaryVector, scales: &[f64; 4]) -> f64 {
    let (a, b) = (s.to_array(), s_obs.to_array());
    (0..4).map(|k| ((a[k] - b[k]) / scales[k]).powi(2)).sum::<f64>().sqrt()
}

/// Standardised Euclidean distances from `s_obs` to each summary row.
pub fn distances_with_scales(summaries: &[SummaryVector], s_obs: &SummaryVector, scales: &[f64; 4]) -> Vec<f64> {
    summaries.iter().map(|s| scaled_distance(s, s_obs, scales)).collect()
}

/// Standardised Euclidean distance of every table row to `s_obs`, with
/// column scales taken over the whole table.
pub fn standardized_distances(table: &super::ReferenceTable, s_obs: &SummaryVector) -> Vec<f64> {
    let scales = summary_scales(&table.summaries);
    distances_with_scales(&table.summaries, s_obs, &scales)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median_in_place(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median_in_place(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(mad(&[1.0, 2.0, 3.0, 4.0, 100.0]), 1.0);
    }

    #[test]
    fn scale_fallbacks() {
        // MAD is 0 but the column varies: falls back to the sd.
        let xs = [1.0, 1.0, 1.0, 1.0, 5.0];
        assert_eq!(mad(&xs), 0.0);
        assert!((robust_scale(&xs) - sample_sd(&xs)).abs() < 1e-15);
        assert_eq!(robust_scale(&[2.0, 2.0, 2.0]), 1.0);
    }

    #[test]
    fn symmetric_rows_are_equidistant() {
        let obs = SummaryVector::from_array([1.0, 2.0, 3.0, 4.0]);
        let up = SummaryVector::from_array([1.5, 2.5, 3.5, 4.5]);
        let down = SummaryVector::from_array([0.5, 1.5, 2.5, 3.5]);
        let d = distances_with_scales(&[up, down, obs], &obs, &summary_scales(&[up, down, obs]));
        assert_eq!(d[0], d[1]);
        assert_eq!(d[2], 0.0);
    }
}
