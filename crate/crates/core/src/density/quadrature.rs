//! Globally adaptive Gauss–Kronrod (7, 15) quadrature.
//!
//! Nodes are strictly interior to every subinterval, so integrable endpoint
//! singularities are never evaluated.

use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
/// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_subdivisions: usize,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel, max_subdivisions: 4000 }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::new(1e-11, 1e-10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Piece {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let (value, gauss) = (kron * half, gauss * half);
    let error = (value - gauss).abs();
    let error = if error.is_finite() { error } else { f64::INFINITY };
    Piece { a, b, value, error }
}

/// `∫_a^b f`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    integrate_pieces(&f, &[a, b], tol)
}

/// `∫ f` over `points[0]..points[last]`, with every listed point used as a
/// break between subintervals.
pub fn integrate_breakpoints<F: Fn(f64) -> f64>(f: F, points: &[f64], tol: Tolerance) -> Result<Estimate> {
    integrate_pieces(&f, points, tol)
}

fn integrate_pieces<F: Fn(f64) -> f64>(f: &F, points: &[f64], tol: Tolerance) -> Result<Estimate> {
    let mut pieces: Vec<Piece> = points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| kronrod(f, w[0], w[1]))
        .collect();
    if pieces.is_empty() {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let mut frozen = 0.0;
    loop {
        let value: f64 = pieces.iter().map(|p| p.value).sum();
        let error: f64 = pieces.iter().map(|p| p.error).sum::<f64>() + frozen;
        if value.is_finite() && error <= tol.abs.max(tol.rel * value.abs()) {
            return Ok(Estimate { value, error });
        }
        if pieces.len() >= tol.max_subdivisions {
            return Err(Error::QuadratureNoConvergence { achieved: error });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("nonempty");
        let p = pieces[worst];
        if p.error == 0.0 {
            return Err(Error::QuadratureNoConvergence { achieved: error });
        }
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) || p.b - p.a <= 4.0 * f64::EPSILON * p.a.abs().max(p.b.abs()) {
            // Cannot be split further: accept it and record its error.
            if !p.error.is_finite() {
                return Err(Error::QuadratureNoConvergence { achieved: p.error });
            }
            frozen += p.error;
            pieces[worst].error = 0.0;
            continue;
        }
        pieces[worst] = kronrod(f, p.a, mid);
        pieces.push(kronrod(f, mid, p.b));
    }
}
