use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::{wrap_angle, MovementParams};
use crate::{Error, Result};

/// One draw from `Exp(lambda)`; always strictly positive.
pub fn sample_exponential<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<f64> {
    let exp = exponential(lambda)?;
    Ok(draw_positive(&exp, rng))
}

/// One draw from the von Mises distribution `vM(nu, kappa)`, in `(-pi, pi]`.
pub fn sample_von_mises<R: Rng + ?Sized>(kappa: f64, nu: f64, rng: &mut R) -> Result<f64> {
    Ok(VonMises::new(kappa, nu)?.sample(rng))
}

fn exponential(lambda: f64) -> Result<Exp<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("exponential rate must be > 0, got {lambda}")));
    }
    Exp::new(lambda).map_err(|e| Error::domain(e.to_string()))
}

fn draw_positive<R: Rng + ?Sized>(exp: &Exp<f64>, rng: &mut R) -> f64 {
    loop {
        let t = exp.sample(rng);
        if t > 0.0 {
            return t;
        }
    }
}

/// Below this concentration the distribution is treated as circular uniform.
const UNIFORM_KAPPA: f64 = 1e-9;

/// Von Mises sampler using the Best–Fisher wrapped-Cauchy envelope.
#[derive(Debug, Clone, Copy)]
pub struct VonMises {
    kappa: f64,
    nu: f64,
    r: f64,
}

impl VonMises {
    pub fn new(kappa: f64, nu: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::domain(format!("von Mises kappa must be >= 0, got {kappa}")));
        }
        if !nu.is_finite() {
            return Err(Error::domain(format!("von Mises mean must be finite, got {nu}")));
        }
        let r = if kappa < UNIFORM_KAPPA {
            0.0
        } else {
            let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
            let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
            (1.0 + rho * rho) / (2.0 * rho)
        };
        Ok(VonMises { kappa, nu, r })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.kappa < UNIFORM_KAPPA {
            let u: f64 = rng.random();
            return wrap_angle(self.nu + PI * (2.0 * u - 1.0));
        }
        let r = self.r;
        let f = loop {
            let u1: f64 = rng.random();
            let u2: f64 = rng.random();
            let z = (PI * u1).cos();
            let f = (1.0 + r * z) / (r + z);
            let c = self.kappa * (r - f);
            if c * (2.0 - c) > u2 || (c / u2).ln() + 1.0 - c >= 0.0 {
                break f.clamp(-1.0, 1.0);
            }
        };
        let theta = f.acos();
        let signed = if rng.random::<bool>() { theta } else { -theta };
        wrap_angle(signed + self.nu)
    }
}

/// Draws step durations and turning angles for one parameter set.
#[derive(Debug, Clone, Copy)]
pub struct StepSampler {
    duration: Exp<f64>,
    turn: VonMises,
}

impl StepSampler {
    pub fn new(params: &MovementParams) -> Result<Self> {
        Ok(StepSampler {
            duration: exponential(params.lambda)?,
            turn: VonMises::new(params.kappa, params.nu)?,
        })
    }

    pub fn duration<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        draw_positive(&self.duration, rng)
    }

    pub fn turn<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.turn.sample(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn mean_and_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    #[test]
    fn exponential_mean_and_median() {
        let mut rng = stream(11, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| sample_exponential(2.0, &mut rng).unwrap()).collect();
        let (mean, se) = mean_and_se(&xs);
        assert!((mean - 0.5).abs() < 3.0 * se, "mean {mean} se {se}");
        assert!(xs.iter().all(|&x| x > 0.0));

        let mut rng = stream(12, 0);
        let n = 100_000;
        let below = (0..n)
            .filter(|_| sample_exponential(1.0, &mut rng).unwrap() <= std::f64::consts::LN_2)
            .count() as f64
            / n as f64;
        let se = (0.25 / n as f64).sqrt();
        assert!((below - 0.5).abs() < 3.0 * se, "P(X<=ln2) = {below}");
    }

    #[test]
    fn exponential_rejects_bad_rate() {
        let mut rng = stream(0, 0);
        assert!(matches!(sample_exponential(0.0, &mut rng), Err(Error::Domain(_))));
        assert!(sample_exponential(-1.0, &mut rng).is_err());
    }

    #[test]
    fn von_mises_uniform_at_zero_concentration() {
        let mut rng = stream(21, 0);
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n).map(|_| sample_von_mises(0.0, 0.0, &mut rng).unwrap()).collect();
        xs.sort_by(f64::total_cmp);
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = (x + PI) / (2.0 * PI);
                (f - i as f64 / n as f64).abs().max((f - (i + 1) as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.63 / (n as f64).sqrt(), "KS distance {d}");
        assert!(xs.iter().all(|&x| x > -PI && x <= PI));
    }

    #[test]
    fn von_mises_mean_resultant_length() {
        // I1(2)/I0(2) from the power series.
        let a2 = 0.697_774_657_964_007_8;
        let mut rng = stream(2202, 0);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_von_mises(2.0, 0.0, &mut rng).unwrap().cos())
            .collect();
        let (mean, se) = mean_and_se(&xs);
        assert!((mean - a2).abs() < 3.0 * se, "mean cos {mean} se {se}");
    }

    #[test]
    fn von_mises_concentrated_mean_direction() {
        let mut rng = stream(23, 0);
        let (s, c) = (0..10_000).fold((0.0, 0.0), |(s, c), _| {
            let (ds, dc) = sample_von_mises(50.0, 0.0, &mut rng).unwrap().sin_cos();
            (s + ds, c + dc)
        });
        assert!(f64::atan2(s, c).abs() < 0.05);
    }

    #[test]
    fn von_mises_respects_mean_and_rejects_negative_kappa() {
        let mut rng = stream(24, 0);
        let (s, c) = (0..10_000).fold((0.0, 0.0), |(s, c), _| {
            let (ds, dc) = sample_von_mises(10.0, 3.0, &mut rng).unwrap().sin_cos();
            (s + ds, c + dc)
        });
        assert!((f64::atan2(s, c) - 3.0).abs() < 0.02);
        assert!(sample_von_mises(-0.1, 0.0, &mut rng).is_err());
    }

    #[test]
    fn von_mises_very_large_concentration() {
        let mut rng = stream(25, 0);
        let small = (0..10_000)
            .filter(|_| sample_von_mises(1e4, 0.0, &mut rng).unwrap().abs() < 0.1)
            .count();
        assert!(small as f64 / 10_000.0 > 0.99);
    }
}
