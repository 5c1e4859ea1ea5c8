//! Modified Bessel functions of the first kind, orders 0 and 1, and the
//! ratio `A(x) = I1(x) / I0(x)` with its inverse.

use crate::{Error, Result};

/// Above this argument `A` switches from the continued fraction to the
/// large-argument expansion.
const RATIO_ASYMPTOTIC_FROM: f64 = 200.0;
/// Above this argument `I0` uses the large-argument expansion.
const I0_ASYMPTOTIC_FROM: f64 = 25.0;

/// `A(x) = I1(x) / I0(x)`, the mean resultant length of a von Mises
/// distribution with concentration `x`.
pub fn bessel_ratio(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain(format!("Bessel ratio needs x >= 0, got {x}")));
    }
    Ok(ratio(x))
}

fn ratio(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else if x < RATIO_ASYMPTOTIC_FROM {
        ratio_continued_fraction(x)
    } else {
        ratio_asymptotic(x)
    }
}

/// `I1/I0 = x / (2 + x^2 / (4 + x^2 / (6 + ...)))`, evaluated with the
/// modified Lentz algorithm.
fn ratio_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let x2 = x * x;
    let mut f = TINY;
    let mut c = f;
    let mut d = 0.0;
    for k in 1..100_000 {
        let a = if k == 1 { x } else { x2 };
        let b = 2.0 * k as f64;
        d = b + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    f
}

/// Sum of the Hankel expansion `sum_k (-1)^k a_k(nu) / x^k` for
/// `e^{-x} sqrt(2 pi x) I_nu(x)`, stopped at the smallest term.
fn hankel_sum(order: f64, x: f64) -> f64 {
    let mu = 4.0 * order * order;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (8.0 * k as f64 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn ratio_asymptotic(x: f64) -> f64 {
    hankel_sum(1.0, x) / hankel_sum(0.0, x)
}

/// `A'(x) = 1 - A(x)/x - A(x)^2`.
fn ratio_derivative(x: f64, a: f64) -> f64 {
    if x == 0.0 {
        0.5
    } else {
        1.0 - a / x - a * a
    }
}

/// Initial guess for the inverse of `A` (Best & Fisher's approximation).
fn inverse_guess(y: f64) -> f64 {
    if y < 0.53 {
        2.0 * y + y.powi(3) + 5.0 * y.powi(5) / 6.0
    } else if y < 0.85 {
        -0.4 + 1.39 * y + 0.43 / (1.0 - y)
    } else {
        1.0 / (y.powi(3) - 4.0 * y * y + 3.0 * y)
    }
}

/// The concentration `x` with `A(x) = y`, for `0 <= y < 1`.
pub fn bessel_ratio_inverse(y: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&y) {
        return Err(Error::domain(format!("Bessel ratio inverse needs 0 <= y < 1, got {y}")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = (1.0 / (1.0 - y)).max(1.0);
    while ratio(hi) < y {
        hi *= 2.0;
    }
    let mut x = inverse_guess(y).clamp(lo, hi);
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }
    for _ in 0..300 {
        let a = ratio(x);
        let err = a - y;
        if err.abs() <= 1e-15 {
            break;
        }
        if err > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - err / ratio_derivative(x, a);
        x = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(x)
}

/// `e^{-x} I0(x)` for `x >= 0`.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    let x = x.abs();
    if x < I0_ASYMPTOTIC_FROM {
        // sum_k (x/2)^{2k} / (k!)^2
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > 1e-17 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        hankel_sum(0.0, x) / (2.0 * std::f64::consts::PI * x).sqrt()
    }
}

/// `ln I0(x)`, finite for all finite `x`.
pub fn ln_bessel_i0(x: f64) -> f64 {
    bessel_i0_scaled(x).ln() + x.abs()
}
