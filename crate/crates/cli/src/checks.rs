//! Trend checks run by `--check`; any failure exits with code 3.

use stepturn::abc::{Method, Parameter};
use stepturn::experiments::{Check, CoverageReport, CrossValReport, FitSpec, RScanReport};

fn epsilons(fits: &[FitSpec], method: Method) -> Vec<f64> {
    let mut e: Vec<f64> = fits.iter().filter(|f| f.method == method).map(|f| f.epsilon).collect();
    e.sort_by(f64::total_cmp);
    e.dedup();
    e
}

/// Rejection error falls as epsilon shrinks; at the smallest rejection
/// epsilon the corrected methods do at least as well on lambda.
pub fn crossval_checks(cv: &CrossValReport) -> Vec<Check> {
    let mut out = Vec::new();
    let rej = epsilons(&cv.config.fits, Method::Rejection);
    let (Some(&small), Some(&large)) = (rej.first(), rej.last()) else {
        return out;
    };
    let pe = |m: Method, e: f64, p: Parameter| cv.metric(FitSpec::new(m, e), p).map(|x| x.prediction_error);
    if small < large {
        for p in Parameter::ALL {
            if let (Some(a), Some(b)) = (pe(Method::Rejection, large, p), pe(Method::Rejection, small, p)) {
                out.push(Check::new(
                    format!("rejection {p} error ordered by epsilon"),
                    a > b,
                    format!("{a:.4} at {large} vs {b:.4} at {small}"),
                ));
            }
        }
    }
    if let Some(r) = pe(Method::Rejection, small, Parameter::Lambda) {
        for m in [Method::Loclinear, Method::Neuralnet] {
            if let Some(c) = pe(m, small, Parameter::Lambda) {
                out.push(Check::new(
                    format!("{m} lambda error <= rejection at {small}"),
                    c <= r,
                    format!("{c:.4} vs {r:.4}"),
                ));
            }
        }
    }
    out
}

/// Corrected methods reach 90% HPD coverage; rejection at its largest
/// epsilon is left-skewed; loclinear at its smallest is centred.
pub fn coverage_checks(cov: &CoverageReport) -> Vec<Check> {
    let mut out = Vec::new();
    for e in &cov.entries {
        if e.method.is_corrected() {
            out.push(Check::new(
                format!("{} {} coverage", FitSpec::new(e.method, e.epsilon), e.param),
                e.coverage >= 0.90,
                format!("{:.3} (need >= 0.90)", e.coverage),
            ));
        }
    }
    let fits: Vec<FitSpec> = cov.entries.iter().map(|e| FitSpec::new(e.method, e.epsilon)).collect();
    let mean_p = |m: Method, eps: f64, p: Parameter| cov.entry(FitSpec::new(m, eps), p).map(|e| e.mean_p);
    if let Some(&large) = epsilons(&fits, Method::Rejection).last() {
        for p in Parameter::ALL {
            if let Some(m) = mean_p(Method::Rejection, large, p) {
                out.push(Check::new(
                    format!("rejection@{large} {p} mean p"),
                    m > 0.55,
                    format!("{m:.3} (need > 0.55)"),
                ));
            }
        }
    }
    if let Some(&small) = epsilons(&fits, Method::Loclinear).first() {
        for p in Parameter::ALL {
            if let Some(m) = mean_p(Method::Loclinear, small, p) {
                out.push(Check::new(
                    format!("loclinear@{small} {p} mean p"),
                    (0.40..=0.60).contains(&m),
                    format!("{m:.3} (need 0.40..0.60)"),
                ));
            }
        }
    }
    out
}

/// Lambda error grows from the smallest to the largest R for every method;
/// corrected methods keep relative lambda error below 0.5 at R = 1.
pub fn rscan_checks(scan: &RScanReport) -> Vec<Check> {
    let mut out = Vec::new();
    let mean_lambda = |r: f64, m: Method, md: bool| {
        let v: Vec<f64> = scan
            .cells
            .iter()
            .filter(|c| c.r == r)
            .flat_map(|c| &c.metrics)
            .filter(|x| x.method == m && x.param == Parameter::Lambda)
            .map(|x| if md { x.md_index } else { x.prediction_error })
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let mut rs = scan.config.r_values.clone();
    rs.sort_by(f64::total_cmp);
    let methods: Vec<Method> = Method::ALL.into_iter().filter(|m| scan.config.fits.iter().any(|f| f.method == *m)).collect();
    if let (Some(&lo), Some(&hi)) = (rs.first(), rs.last()) {
        if lo < hi {
            for &m in &methods {
                if let (Some(a), Some(b)) = (mean_lambda(lo, m, false), mean_lambda(hi, m, false)) {
                    out.push(Check::new(
                        format!("{m} lambda error grows with R"),
                        b > a,
                        format!("{a:.4} at R={lo} vs {b:.4} at R={hi}"),
                    ));
                }
            }
        }
    }
    for &m in methods.iter().filter(|m| m.is_corrected()) {
        if let Some(md) = mean_lambda(1.0, m, true) {
            out.push(Check::new(format!("{m} lambda MD at R=1"), md < 0.5, format!("{md:.4} (need < 0.5)")));
        }
    }
    out
}
