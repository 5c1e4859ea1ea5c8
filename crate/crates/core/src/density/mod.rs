//! Change-of-variable densities for a single displacement of the walk.
//!
//! With a turn `phi ~ vM(0, kappa)` and `V = cos(phi)`:
//!
//! * `f_V` is the density of `V`,
//! * `f_Z` the density of `Z = V t` with `t ~ Exp(lambda)`,
//! * `f_S` the density of `S = V (c - W)` with `W ~ Gamma(n, lambda)`.
//!
//! The product densities are `f(s) = ∫ f_V(s / y) g(y) / |y| dy` over
//! `|y| > |s|`. Substituting `|y| = |s| + u^2` cancels the inverse square-root
//! singularity of `f_V` at `±1`, leaving a smooth integrand in `u`.

mod grid;
pub mod quadrature;

pub use grid::{density_mc_check, DensityGrid, McCheck, NodeLayout, MASS_TOLERANCE, MIN_DRAWS};

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use crate::summaries::bessel_i0_scaled;
use crate::{Error, Result};
use quadrature::{integrate_breakpoints, Tolerance};

/// Von Mises density with mean 0 at angle `phi`.
pub fn von_mises_pdf(phi: f64, kappa: f64) -> f64 {
    (kappa * (phi.cos() - 1.0)).exp() / (2.0 * PI * bessel_i0_scaled(kappa))
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::domain(format!("kappa must be >= 0, got {kappa}")));
    }
    Ok(())
}

fn check_rate(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("lambda must be > 0, got {lambda}")));
    }
    Ok(())
}

/// `f_V(v) = (f_phi(-acos v) + f_phi(acos v)) / sqrt(1 - v^2)` on `(-1, 1)`.
pub fn f_v_density(v: f64, kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    if !(v > -1.0 && v < 1.0) {
        return Err(Error::domain(format!("f_V is defined on (-1, 1), got {v}")));
    }
    Ok(v_numerator(v, kappa) / (1.0 - v * v).sqrt())
}

/// `f_phi(-acos v) + f_phi(acos v)`.
fn v_numerator(v: f64, kappa: f64) -> f64 {
    let a = v.clamp(-1.0, 1.0).acos();
    von_mises_pdf(-a, kappa) + von_mises_pdf(a, kappa)
}

/// Density `g` of the scale variable `y` multiplying `V`.
trait ScaleLaw {
    fn pdf(&self, y: f64) -> f64;
    /// Interval outside which the law carries negligible mass.
    fn support(&self) -> (f64, f64);
    /// Points where `g` changes scale; used as quadrature breaks.
    fn breakpoints(&self) -> Vec<f64>;
}

const QUANTILE_BREAKS: [f64; 11] = [1e-6, 1e-3, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.999, 1.0 - 1e-6];

/// Tail mass beyond the truncated support.
pub const TRUNCATION_MASS: f64 = 1e-16;

struct ExponentialLaw {
    rate: f64,
}

impl ScaleLaw for ExponentialLaw {
    fn pdf(&self, y: f64) -> f64 {
        if y < 0.0 {
            0.0
        } else {
            self.rate * (-self.rate * y).exp()
        }
    }

    fn support(&self) -> (f64, f64) {
        (0.0, -TRUNCATION_MASS.ln() / self.rate)
    }

    fn breakpoints(&self) -> Vec<f64> {
        QUANTILE_BREAKS.iter().map(|p| -(1.0 - p).ln() / self.rate).collect()
    }
}

/// `y = c - W` with `W ~ Gamma(shape, rate)`.
struct ShiftedGammaLaw {
    shape: f64,
    rate: f64,
    c: f64,
    ln_norm: f64,
}

impl ShiftedGammaLaw {
    fn new(shape: f64, rate: f64, c: f64) -> Self {
        ShiftedGammaLaw { shape, rate, c, ln_norm: shape * rate.ln() - ln_gamma(shape) }
    }

    fn gamma_pdf(&self, w: f64) -> f64 {
        if w < 0.0 {
            0.0
        } else if w == 0.0 {
            if self.shape == 1.0 {
                self.rate
            } else {
                0.0
            }
        } else {
            (self.ln_norm + (self.shape - 1.0) * w.ln() - self.rate * w).exp()
        }
    }

    /// Generous upper bound on `W`: tail mass far below `TRUNCATION_MASS`.
    fn w_max(&self) -> f64 {
        (self.shape + 12.0 * self.shape.sqrt() + 40.0) / self.rate
    }
}

impl ScaleLaw for ShiftedGammaLaw {
    fn pdf(&self, y: f64) -> f64 {
        self.gamma_pdf(self.c - y)
    }

    fn support(&self) -> (f64, f64) {
        (self.c - self.w_max(), self.c)
    }

    fn breakpoints(&self) -> Vec<f64> {
        use statrs::distribution::{ContinuousCDF, Gamma};
        match Gamma::new(self.shape, self.rate) {
            Ok(g) => QUANTILE_BREAKS.iter().map(|&p| self.c - g.inverse_cdf(p)).collect(),
            Err(_) => Vec::new(),
        }
    }
}

fn inner_tolerance() -> Tolerance {
    Tolerance::new(1e-13, 1e-10)
}

/// `∫ f_V(s / y) g(y) / |y| dy` over `|y| > |s|`.
fn product_density(s: f64, kappa: f64, law: &dyn ScaleLaw) -> Result<f64> {
    if s == 0.0 {
        return Ok(f64::INFINITY);
    }
    let abs_s = s.abs();
    let (lo, hi) = law.support();
    let breaks = law.breakpoints();
    let mut total = 0.0;
    for sign in [1.0f64, -1.0] {
        // Range of |y| on this branch.
        let (near, far) = if sign > 0.0 { (lo.max(0.0), hi) } else { ((-hi).max(0.0), -lo) };
        let near = near.max(abs_s);
        if far <= near {
            continue;
        }
        let to_u = |m: f64| (m - abs_s).max(0.0).sqrt();
        let (u0, u1) = (to_u(near), to_u(far));
        let mut points = vec![u0];
        points.extend(
            breaks
                .iter()
                .map(|&y| sign * y)
                .filter(|&m| m > near && m < far)
                .map(to_u),
        );
        points.push(u1);
        points.sort_by(f64::total_cmp);
        points.dedup();
        let integrand = |u: f64| {
            let m = abs_s + u * u;
            let y = sign * m;
            2.0 * v_numerator(s / y, kappa) * law.pdf(y) / (m + abs_s).sqrt()
        };
        total += integrate_breakpoints(integrand, &points, inner_tolerance())?.value;
    }
    Ok(total)
}

/// Density of `Z = cos(phi) t`, `t ~ Exp(lambda)`. Infinite at `z = 0`.
pub fn f_z_density(z: f64, kappa: f64, lambda: f64) -> Result<f64> {
    check_kappa(kappa)?;
    check_rate(lambda)?;
    product_density(z, kappa, &ExponentialLaw { rate: lambda })
}

fn check_shape(n: u32, c: f64) -> Result<()> {
    if n < 1 {
        return Err(Error::domain("gamma shape n must be >= 1"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::domain(format!("elapsed-time constant c must be > 0, got {c}")));
    }
    Ok(())
}

/// Density of `S = cos(phi) (c - W)`, `W ~ Gamma(n, lambda)`. Infinite at `s = 0`.
pub fn f_s_density(s: f64, kappa: f64, lambda: f64, n: u32, c: f64) -> Result<f64> {
    check_kappa(kappa)?;
    check_rate(lambda)?;
    check_shape(n, c)?;
    product_density(s, kappa, &ShiftedGammaLaw::new(n as f64, lambda, c))
}

/// Truncated support of `Z`.
pub fn z_support(lambda: f64) -> (f64, f64) {
    let l = ExponentialLaw { rate: lambda }.support().1;
    (-l, l)
}

/// Truncated support of `S`.
pub fn s_support(lambda: f64, n: u32, c: f64) -> (f64, f64) {
    let law = ShiftedGammaLaw::new(n as f64, lambda, c);
    let l = c.max(law.w_max() - c);
    (-l, l)
}

/// `P(cos(phi) <= v) = 2 ∫_{acos v}^{pi} f_phi`, integrated in angle space
/// where the integrand is smooth.
pub fn f_v_cdf(v: f64, kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    if !(-1.0..=1.0).contains(&v) {
        return Err(Error::domain(format!("f_V CDF is defined on [-1, 1], got {v}")));
    }
    let tol = Tolerance::new(1e-15, 1e-13);
    Ok(2.0 * quadrature::integrate(|t| von_mises_pdf(t, kappa), v.acos(), PI, tol)?.value)
}

/// Gridded `f_V` on `(-1, 1)` with nodes clustered at the singular ends.
pub fn f_v_grid(kappa: f64, n_nodes: usize) -> Result<DensityGrid> {
    check_kappa(kappa)?;
    DensityGrid::build_with_cdf(
        |v| f_v_density(v, kappa),
        |v| f_v_cdf(v, kappa),
        (-1.0, 1.0),
        &[-1.0, 1.0],
        NodeLayout::Chebyshev,
        n_nodes,
    )
}

/// Gridded `f_Z`, nodes clustered around the logarithmic peak at 0.
pub fn f_z_grid(kappa: f64, lambda: f64, n_nodes: usize) -> Result<DensityGrid> {
    check_kappa(kappa)?;
    check_rate(lambda)?;
    DensityGrid::build(
        |z| f_z_density(z, kappa, lambda),
        z_support(lambda),
        &[0.0],
        NodeLayout::Sinh { beta: 8.0 },
        n_nodes,
    )
}

/// Gridded `f_S`.
pub fn f_s_grid(kappa: f64, lambda: f64, n: u32, c: f64, n_nodes: usize) -> Result<DensityGrid> {
    check_kappa(kappa)?;
    check_rate(lambda)?;
    check_shape(n, c)?;
    DensityGrid::build(
        |s| f_s_density(s, kappa, lambda, n, c),
        s_support(lambda, n, c),
        &[-c, 0.0, c],
        NodeLayout::Uniform,
        n_nodes,
    )
}
