use rand::Rng;

use super::{wrap_angle, MovementParams, Point, StepSampler};
use crate::{Error, Result};

/// The continuous-time walk between its turn points.
///
/// Segment `i` starts at `positions[i]`, heads along `headings[i]` and lasts
/// `durations[i]`. The turn `turns[i]` (stored 0-based, i.e. the turn
/// completing segment `i`) gives `headings[i + 1] = wrap(headings[i] + turns[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPath {
    pub positions: Vec<Point>,
    pub headings: Vec<f64>,
    pub durations: Vec<f64>,
    pub turns: Vec<f64>,
    pub speed: f64,
}

impl LatentPath {
    /// Build a unit-speed path from explicit durations and turns, starting at
    /// the origin with heading 0. `turns` may have the same length as
    /// `durations` or one fewer (the final turn is then taken as 0).
    pub fn from_steps(durations: &[f64], turns: &[f64]) -> Result<Self> {
        Self::from_steps_with_speed(durations, turns, 1.0)
    }

    pub fn from_steps_with_speed(durations: &[f64], turns: &[f64], speed: f64) -> Result<Self> {
        if durations.is_empty() {
            return Err(Error::domain("a path needs at least one step"));
        }
        if turns.len() != durations.len() && turns.len() + 1 != durations.len() {
            return Err(Error::domain(format!(
                "{} durations need {} or {} turns, got {}",
                durations.len(),
                durations.len(),
                durations.len() - 1,
                turns.len()
            )));
        }
        if let Some(bad) = durations.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::domain(format!("step durations must be > 0, got {bad}")));
        }
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(Error::domain(format!("speed must be > 0, got {speed}")));
        }
        let mut path = LatentPath::with_capacity(durations.len(), speed);
        for (i, &t) in durations.iter().enumerate() {
            path.push(t, turns.get(i).copied().unwrap_or(0.0));
        }
        Ok(path)
    }

    fn with_capacity(n: usize, speed: f64) -> Self {
        let mut positions = Vec::with_capacity(n + 1);
        let mut headings = Vec::with_capacity(n + 1);
        positions.push(Point::ORIGIN);
        headings.push(0.0);
        LatentPath {
            positions,
            headings,
            durations: Vec::with_capacity(n),
            turns: Vec::with_capacity(n),
            speed,
        }
    }

    fn push(&mut self, duration: f64, turn: f64) {
        let last = *self.positions.last().expect("path always has an origin");
        let heading = *self.headings.last().expect("path always has a heading");
        let turn = wrap_angle(turn);
        self.positions.push(last.advance(heading, self.speed * duration));
        self.headings.push(wrap_angle(heading + turn));
        self.durations.push(duration);
        self.turns.push(turn);
    }

    pub fn n_steps(&self) -> usize {
        self.durations.len()
    }

    pub fn total_time(&self) -> f64 {
        self.durations.iter().sum()
    }
}

/// Simulate `n_steps` segments of the walk.
pub fn simulate_latent<R: Rng + ?Sized>(
    params: &MovementParams,
    n_steps: usize,
    rng: &mut R,
) -> Result<LatentPath> {
    if n_steps == 0 {
        return Err(Error::domain("n_steps must be >= 1"));
    }
    let sampler = StepSampler::new(params)?;
    let mut path = LatentPath::with_capacity(n_steps, params.speed);
    for _ in 0..n_steps {
        let t = sampler.duration(rng);
        let w = sampler.turn(rng);
        path.push(t, w);
    }
    Ok(path)
}

/// Simulate until the elapsed time strictly exceeds `horizon`.
///
/// Draws are consumed in the same order as [`simulate_latent`], so the result
/// equals `simulate_latent` run for the number of steps it ended up with.
pub fn simulate_until<R: Rng + ?Sized>(
    params: &MovementParams,
    horizon: f64,
    rng: &mut R,
) -> Result<LatentPath> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::domain(format!("horizon must be finite and >= 0, got {horizon}")));
    }
    let sampler = StepSampler::new(params)?;
    let expected = (params.lambda * horizon * 1.1) as usize + 8;
    let mut path = LatentPath::with_capacity(expected, params.speed);
    let mut elapsed = 0.0;
    while elapsed <= horizon {
        let t = sampler.duration(rng);
        let w = sampler.turn(rng);
        path.push(t, w);
        elapsed += t;
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::summaries::bessel_ratio;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn right_angle_example() {
        let path = LatentPath::from_steps(&[1.0, 1.0], &[FRAC_PI_2]).unwrap();
        assert_eq!(path.positions[0], Point::ORIGIN);
        assert_eq!(path.positions[1], Point::new(1.0, 0.0));
        assert!(path.positions[2].distance(Point::new(1.0, 1.0)) < 1e-15);
    }

    #[test]
    fn straight_path_stays_on_axis() {
        let path = LatentPath::from_steps(&[0.3, 1.2, 0.7, 2.0], &[0.0; 4]).unwrap();
        assert!(path.positions.iter().all(|p| p.y == 0.0));
        assert!((path.positions[4].x - 4.2).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_durations() {
        assert!(LatentPath::from_steps(&[1.0, 0.0], &[0.0]).is_err());
        assert!(LatentPath::from_steps(&[], &[]).is_err());
        assert!(LatentPath::from_steps(&[1.0], &[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn simulated_path_invariants() {
        let params = MovementParams::new(3.0, 1.5).unwrap();
        let path = simulate_latent(&params, 500, &mut stream(5, 0)).unwrap();
        assert_eq!(path.positions.len(), 501);
        assert_eq!(path.headings[0], 0.0);
        for i in 1..=500 {
            let expect = path.positions[i - 1].advance(path.headings[i - 1], path.durations[i - 1]);
            assert!(path.positions[i].distance(expect) < 1e-12);
            assert!((path.headings[i] - wrap_angle(path.headings[i - 1] + path.turns[i - 1])).abs() < 1e-12);
            assert!(path.durations[i - 1] > 0.0);
            assert!(path.headings[i] > -PI && path.headings[i] <= PI);
            assert!(path.turns[i - 1] > -PI && path.turns[i - 1] <= PI);
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let params = MovementParams::new(8.0, 2.0).unwrap();
        let a = simulate_latent(&params, 200, &mut stream(99, 1)).unwrap();
        let b = simulate_latent(&params, 200, &mut stream(99, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn until_matches_fixed_length() {
        let params = MovementParams::new(8.0, 2.0).unwrap();
        let a = simulate_until(&params, 30.0, &mut stream(3, 3)).unwrap();
        assert!(a.total_time() > 30.0);
        assert!(a.total_time() - a.durations.last().unwrap() <= 30.0);
        let b = simulate_latent(&params, a.n_steps(), &mut stream(3, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn step_moments_match_parameters() {
        let params = MovementParams::new(10.0, 2.0).unwrap();
        let path = simulate_latent(&params, 10_000, &mut stream(42, 0)).unwrap();
        let n = 10_000.0;
        let mean_t = path.durations.iter().sum::<f64>() / n;
        // Exp(2) has sd 0.5.
        assert!((mean_t - 0.5).abs() < 3.0 * 0.5 / n.sqrt(), "mean duration {mean_t}");

        let cos: Vec<f64> = path.turns.iter().map(|w| w.cos()).collect();
        let mean_c = cos.iter().sum::<f64>() / n;
        let sd_c = (cos.iter().map(|c| (c - mean_c).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let a10 = bessel_ratio(10.0).unwrap();
        assert!((mean_c - a10).abs() < 3.0 * sd_c / n.sqrt(), "mean cos {mean_c} vs {a10}");
    }

    #[test]
    fn huge_concentration_gives_small_turns() {
        let params = MovementParams::new(1e4, 1.0).unwrap();
        let path = simulate_latent(&params, 10_000, &mut stream(8, 0)).unwrap();
        let small = path.turns.iter().filter(|w| w.abs() < 0.1).count();
        assert!(small as f64 / 10_000.0 > 0.99);
    }
}
