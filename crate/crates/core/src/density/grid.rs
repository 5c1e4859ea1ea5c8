//! Tabulated densities with a quadrature-backed CDF.

use serde::{Deserialize, Serialize};

use super::quadrature::{integrate, Tolerance};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeLayout {
    /// Chebyshev points of the first kind; dense at both ends.
    Chebyshev,
    /// `x = a sinh(beta t) / sinh(beta)` for uniform `t`; dense around 0.
    Sinh { beta: f64 },
    Uniform,
}

impl NodeLayout {
    /// `n` strictly interior nodes of `(lo, hi)`.
    fn nodes(self, lo: f64, hi: f64, n: usize) -> Vec<f64> {
        let t = |k: usize| -1.0 + 2.0 * (k as f64 + 0.5) / n as f64;
        let mut xs: Vec<f64> = match self {
            NodeLayout::Chebyshev => {
                let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                (0..n)
                    .map(|k| mid - half * ((2 * k + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos())
                    .collect()
            }
            NodeLayout::Uniform => (0..n).map(|k| lo + (hi - lo) * (t(k) + 1.0) / 2.0).collect(),
            NodeLayout::Sinh { beta } => {
                let a = lo.abs().max(hi.abs());
                (0..n).map(|k| a * (beta * t(k)).sinh() / beta.sinh()).collect()
            }
        };
        xs.retain(|&x| x > lo && x < hi);
        xs
    }
}

/// Density values at interior nodes with the CDF at the same nodes.
///
/// `support` carries the full mass; `cdf` is a monotone cubic Hermite
/// interpolant between nodes (slopes from `f`), linear in the two end
/// intervals, and is anchored at 0 on `support.0` and at `mass` on `support.1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub support: (f64, f64),
    pub layout: NodeLayout,
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    pub cdf: Vec<f64>,
    /// `∫ f` over the support.
    pub mass: f64,
}

const REFINE_LEVELS: i32 = 16;

fn cdf_tolerance() -> Tolerance {
    Tolerance::new(1e-11, 1e-9)
}

/// `∫_a^b f`, using `x = end + w t^2` next to a singular endpoint.
fn integrate_piece<F>(f: &F, a: f64, b: f64, sing_a: bool, sing_b: bool) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let err = std::cell::Cell::new(None);
    let eval = |x: f64| match f(x) {
        Ok(v) => v,
        Err(e) => {
            err.set(Some(e.to_string()));
            f64::NAN
        }
    };
    let tol = cdf_tolerance();
    let value = match (sing_a, sing_b) {
        (false, false) => integrate(eval, a, b, tol)?.value,
        (true, false) => {
            let w = b - a;
            integrate(|t| eval(a + w * t * t) * 2.0 * w * t, 0.0, 1.0, tol)?.value
        }
        (false, true) => {
            let w = b - a;
            integrate(|t| eval(b - w * t * t) * 2.0 * w * t, 0.0, 1.0, tol)?.value
        }
        (true, true) => {
            let m = 0.5 * (a + b);
            return Ok(integrate_piece(f, a, m, true, false)? + integrate_piece(f, m, b, false, true)?);
        }
    };
    match err.take() {
        Some(msg) => Err(Error::domain(format!("density evaluation failed: {msg}"))),
        None => Ok(value),
    }
}

/// Layout nodes plus geometric refinement toward each singular point, which
/// keeps the linear CDF interpolation accurate where the density blows up.
fn grid_nodes(support: (f64, f64), singular: &[f64], layout: NodeLayout, n_nodes: usize) -> Result<Vec<f64>> {
    let (lo, hi) = support;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::domain(format!("bad support ({lo}, {hi})")));
    }
    if n_nodes < 2 {
        return Err(Error::domain("a density grid needs at least 2 nodes"));
    }
    let mut x = layout.nodes(lo, hi, n_nodes);
    let h = (hi - lo) / n_nodes as f64;
    for &p in singular {
        for k in 0..REFINE_LEVELS {
            let d = h * 0.5f64.powi(k);
            x.extend([p - d, p + d].into_iter().filter(|&v| v > lo && v < hi));
        }
    }
    x.retain(|v| !singular.contains(v));
    x.sort_by(f64::total_cmp);
    x.dedup();
    Ok(x)
}

impl DensityGrid {
    /// Tabulates `f` on `n_nodes` interior points of `support`. Points in
    /// `singular` (and support ends, if listed) are never evaluated.
    pub fn build<F>(f: F, support: (f64, f64), singular: &[f64], layout: NodeLayout, n_nodes: usize) -> Result<Self>
    where
        F: Fn(f64) -> Result<f64>,
    {
        let x = grid_nodes(support, singular, layout, n_nodes)?;
        let f_vals = x.iter().map(|&v| f(v)).collect::<Result<Vec<f64>>>()?;
        let (lo, hi) = support;
        let is_singular = |x: f64| singular.contains(&x);

        let mut knots: Vec<f64> = vec![lo, hi];
        knots.extend(x.iter().copied());
        knots.extend(singular.iter().copied().filter(|&s| s > lo && s < hi));
        knots.sort_by(f64::total_cmp);
        knots.dedup();

        let mut cdf = Vec::with_capacity(x.len());
        let mut acc = 0.0;
        let mut next = 0;
        for w in knots.windows(2) {
            acc += integrate_piece(&f, w[0], w[1], is_singular(w[0]), is_singular(w[1]))?;
            if next < x.len() && w[1] == x[next] {
                cdf.push(acc);
                next += 1;
            }
        }
        Ok(DensityGrid { support, layout, x, f: f_vals, cdf, mass: acc })
    }

    /// As [`DensityGrid::build`], with the CDF supplied in closed form.
    /// `mass` is `cdf(hi) - cdf(lo)`.
    pub fn build_with_cdf<F, C>(
        f: F,
        cdf: C,
        support: (f64, f64),
        singular: &[f64],
        layout: NodeLayout,
        n_nodes: usize,
    ) -> Result<Self>
    where
        F: Fn(f64) -> Result<f64>,
        C: Fn(f64) -> Result<f64>,
    {
        let x = grid_nodes(support, singular, layout, n_nodes)?;
        let f_vals = x.iter().map(|&v| f(v)).collect::<Result<Vec<f64>>>()?;
        let base = cdf(support.0)?;
        let cdf_vals = x.iter().map(|&v| Ok(cdf(v)? - base)).collect::<Result<Vec<f64>>>()?;
        let mass = cdf(support.1)? - base;
        Ok(DensityGrid { support, layout, x, f: f_vals, cdf: cdf_vals, mass })
    }

    /// Linearly interpolated density; 0 outside the support.
    pub fn pdf(&self, at: f64) -> f64 {
        let (lo, hi) = self.support;
        if !(at >= lo && at <= hi) || self.x.is_empty() {
            return 0.0;
        }
        let i = self.x.partition_point(|&v| v <= at);
        if i == 0 {
            self.f[0]
        } else if i == self.x.len() {
            self.f[i - 1]
        } else {
            lerp(self.x[i - 1], self.f[i - 1], self.x[i], self.f[i], at)
        }
    }

    /// Interpolated CDF, not renormalized.
    pub fn cdf(&self, at: f64) -> f64 {
        let (lo, hi) = self.support;
        if at <= lo {
            return 0.0;
        }
        if at >= hi {
            return self.mass;
        }
        let i = self.x.partition_point(|&v| v <= at);
        if i == 0 {
            return lerp(lo, 0.0, self.x[0], self.cdf[0], at);
        }
        if i == self.x.len() {
            return lerp(self.x[i - 1], self.cdf[i - 1], hi, self.mass, at);
        }
        hermite(
            (self.x[i - 1], self.cdf[i - 1], self.f[i - 1]),
            (self.x[i], self.cdf[i], self.f[i]),
            at,
        )
    }
}

/// Cubic Hermite on `(x, y, dy/dx)` end data, with the slopes limited so the
/// result stays monotone (Fritsch and Carlson).
fn hermite((x0, y0, d0): (f64, f64, f64), (x1, y1, d1): (f64, f64, f64), at: f64) -> f64 {
    let h = x1 - x0;
    let secant = (y1 - y0) / h;
    if !(h > 0.0) || !(secant > 0.0) || !d0.is_finite() || !d1.is_finite() {
        return lerp(x0, y0, x1, y1, at);
    }
    let (mut a, mut b) = ((d0 / secant).max(0.0), (d1 / secant).max(0.0));
    let r = a.hypot(b);
    if r > 3.0 {
        a *= 3.0 / r;
        b *= 3.0 / r;
    }
    let t = (at - x0) / h;
    let (t2, t3) = (t * t, t * t * t);
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h10 = t3 - 2.0 * t2 + t;
    let h11 = t3 - t2;
    y0 + (y1 - y0) * h01 + secant * h * (a * h10 + b * h11)
}

fn lerp(x0: f64, y0: f64, x1: f64, y1: f64, at: f64) -> f64 {
    if x1 == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (at - x0) / (x1 - x0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McCheck {
    pub n: usize,
    /// `sup |F_n - F| / mass`.
    pub ks: f64,
    /// 1% Kolmogorov critical value `1.63 / sqrt(n)`.
    pub critical: f64,
    pub mass: f64,
}

impl McCheck {
    pub fn passed(&self) -> bool {
        self.ks <= self.critical
    }
}

pub const MIN_DRAWS: usize = 1000;
/// Largest normalization defect accepted by [`density_mc_check`].
pub const MASS_TOLERANCE: f64 = 1e-3;

/// Kolmogorov–Smirnov distance between `samples` and the gridded CDF.
pub fn density_mc_check(grid: &DensityGrid, samples: &[f64]) -> Result<McCheck> {
    if samples.len() < MIN_DRAWS {
        return Err(Error::domain(format!("need at least {MIN_DRAWS} draws, got {}", samples.len())));
    }
    if !((grid.mass - 1.0).abs() <= MASS_TOLERANCE) {
        return Err(Error::domain(format!("grid is not normalized: mass {}", grid.mass)));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut ks: f64 = 0.0;
    for (i, &v) in xs.iter().enumerate() {
        let f = grid.cdf(v) / grid.mass;
        ks = ks.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    Ok(McCheck { n: xs.len(), ks, critical: 1.63 / n.sqrt(), mass: grid.mass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_density_grid() {
        let g = DensityGrid::build(|_| Ok(0.5), (-1.0, 1.0), &[], NodeLayout::Uniform, 10).unwrap();
        assert!((g.mass - 1.0).abs() < 1e-14);
        assert!((g.cdf(0.0) - 0.5).abs() < 1e-14);
        assert!((g.cdf(-0.95) - 0.025).abs() < 1e-14);
        assert_eq!(g.pdf(2.0), 0.0);
    }

    #[test]
    fn singular_endpoints_not_evaluated() {
        let f = |x: f64| {
            if x.abs() >= 1.0 {
                Err(Error::domain("endpoint"))
            } else {
                Ok(1.0 / (std::f64::consts::PI * (1.0 - x * x).sqrt()))
            }
        };
        let g = DensityGrid::build(f, (-1.0, 1.0), &[-1.0, 1.0], NodeLayout::Chebyshev, 64).unwrap();
        assert!((g.mass - 1.0).abs() < 1e-9, "{}", g.mass);
        for (x, c) in g.x.iter().zip(&g.cdf) {
            let exact = 0.5 + x.asin() / std::f64::consts::PI;
            assert!((c - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn cdf_between_nodes_is_cubic_accurate() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let n = Normal::new(0.0, 1.0).unwrap();
        let pdf = |x: f64| Ok((-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt());
        let g = DensityGrid::build(pdf, (-9.0, 9.0), &[], NodeLayout::Uniform, 60).unwrap();
        // Spacing 0.3: a linear interpolant would be off by ~h^2 f' / 8 ~ 3e-3.
        let worst = (0..1000)
            .map(|k| -4.0 + 8.0 * k as f64 / 999.0)
            .map(|x| (g.cdf(x) - n.cdf(x)).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-4, "{worst}");
        assert!(g.x.windows(2).all(|w| g.cdf(w[0]) <= g.cdf(0.5 * (w[0] + w[1]))));
    }

    #[test]
    fn sinh_nodes_cluster_at_zero() {
        let xs = NodeLayout::Sinh { beta: 6.0 }.nodes(-10.0, 10.0, 100);
        let near = xs.iter().filter(|v| v.abs() < 1.0).count();
        assert!(near > 30, "{near}");
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn mc_check_uniform() {
        let g = DensityGrid::build(|_| Ok(1.0), (0.0, 1.0), &[], NodeLayout::Uniform, 8).unwrap();
        let samples: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let c = density_mc_check(&g, &samples).unwrap();
        assert!(c.passed());
        assert!(c.ks <= 1e-3 + 1e-12);
        assert!(density_mc_check(&g, &samples[..999]).is_err());
        let shifted: Vec<f64> = samples.iter().map(|x| x * 0.9).collect();
        assert!(!density_mc_check(&g, &shifted).unwrap().passed());
    }

    #[test]
    fn unnormalized_grid_rejected() {
        let g = DensityGrid::build(|_| Ok(2.0), (0.0, 1.0), &[], NodeLayout::Uniform, 8).unwrap();
        let samples: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(density_mc_check(&g, &samples).is_err());
    }
}
