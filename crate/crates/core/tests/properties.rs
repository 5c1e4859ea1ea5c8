use std::f64::consts::PI;

use proptest::prelude::*;
use stepturn::abc::{Interval, Method, Parameter, PriorSpec, ReferenceTable, SimConfig, WeightedPosterior};
use stepturn::experiments::{coverage_p, md_index, prediction_error, RScanRecord, ReplicateRecord};
use stepturn::io;
use stepturn::movement::{change_counts, observe, wrap_angle, LatentPath, Point};
use stepturn::summaries::{summarize_positions, SummaryVector};

fn durations() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..3.0, 2..60)
}

fn finite() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn wrapped_angles_stay_in_half_open_range(a in -1e4f64..1e4) {
        let w = wrap_angle(a);
        prop_assert!(w > -PI && w <= PI);
        prop_assert!(((a - w) / (2.0 * PI) - ((a - w) / (2.0 * PI)).round()).abs() < 1e-9);
    }

    #[test]
    fn latent_path_invariants(d in durations(), seed in any::<u64>()) {
        let turns: Vec<f64> = (0..d.len()).map(|i| ((seed.wrapping_mul(i as u64 + 1) % 6283) as f64 / 1000.0) - PI).collect();
        let path = LatentPath::from_steps(&d, &turns).unwrap();
        prop_assert_eq!(path.positions[0], Point::ORIGIN);
        prop_assert_eq!(path.headings[0], 0.0);
        for i in 1..path.positions.len() {
            let (p, q) = (path.positions[i - 1], path.positions[i]);
            let h = path.headings[i - 1];
            prop_assert!((q.x - p.x - h.cos() * d[i - 1]).abs() < 1e-12);
            prop_assert!((q.y - p.y - h.sin() * d[i - 1]).abs() < 1e-12);
            prop_assert!((path.headings[i] - wrap_angle(h + path.turns[i - 1])).abs() < 1e-12);
        }
    }

    #[test]
    fn change_counts_match_definition(d in durations(), dt in 0.05f64..2.0) {
        let total: f64 = d.iter().sum();
        let n_obs = ((total / dt).floor() as usize).saturating_sub(1).max(1);
        prop_assume!(n_obs as f64 * dt <= total);
        let counts = change_counts(&d, dt, n_obs).unwrap();
        prop_assert_eq!(counts.len(), n_obs);
        let mut cum = Vec::new();
        let mut acc = 0.0;
        for t in &d {
            acc += t;
            cum.push(acc);
        }
        for (j, &n) in counts.iter().enumerate() {
            let time = (j + 1) as f64 * dt;
            let brute = cum.iter().rposition(|&c| c <= time * (1.0 + 1e-12)).map_or(-1, |m| m as i64);
            prop_assert_eq!(n, brute);
            prop_assert!(n >= -1);
        }
        prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn observations_within_reach(d in durations(), dt in 0.05f64..1.0) {
        let total: f64 = d.iter().sum();
        let n_obs = ((total / dt).floor() as usize).saturating_sub(1);
        prop_assume!(n_obs >= 1);
        let path = LatentPath::from_steps(&d, &vec![1.0; d.len()]).unwrap();
        let track = observe(&path, dt, n_obs).unwrap();
        prop_assert_eq!(track.positions[0], Point::ORIGIN);
        for w in track.positions.windows(2) {
            prop_assert!(w[0].distance(w[1]) <= dt * (1.0 + 1e-9));
        }
    }

    #[test]
    fn summaries_invariant_under_rigid_motion(
        d in prop::collection::vec(0.1f64..2.0, 6..40),
        angle in -PI..PI,
        shift in (-50.0f64..50.0, -50.0f64..50.0),
        seed in any::<u64>(),
    ) {
        let turns: Vec<f64> = (0..d.len()).map(|i| ((seed.wrapping_add(7919 * i as u64) % 3000) as f64 / 1000.0) - 1.5).collect();
        let path = LatentPath::from_steps(&d, &turns).unwrap();
        let moved: Vec<Point> = path
            .positions
            .iter()
            .map(|p| Point::new(
                angle.cos() * p.x - angle.sin() * p.y + shift.0,
                angle.sin() * p.x + angle.cos() * p.y + shift.1,
            ))
            .collect();
        let a = summarize_positions(&path.positions).unwrap().to_array();
        let b = summarize_positions(&moved).unwrap().to_array();
        for k in 0..4 {
            prop_assert!((a[k] - b[k]).abs() < 1e-7 * a[k].abs().max(1.0), "{k}: {} vs {}", a[k], b[k]);
        }
    }

    #[test]
    fn coverage_p_invariant_under_monotone_maps(
        values in prop::collection::vec(-10.0f64..10.0, 1..50),
        truth in -10.0f64..10.0,
    ) {
        let n = values.len();
        let post = |f: &dyn Fn(f64) -> f64| WeightedPosterior {
            draws: values.iter().map(|&v| [f(v), 0.0]).collect(),
            weights: (0..n).map(|i| (i + 1) as f64).collect(),
            method: Method::Rejection,
            epsilon: 1.0,
            delta: 0.0,
            projected: 0,
        };
        let g = |x: f64| x.powi(3) + 2.0 * x;
        let a = coverage_p(&post(&|x| x), Parameter::Kappa, truth);
        let b = coverage_p(&post(&g), Parameter::Kappa, g(truth));
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn metrics_vanish_only_at_equality(
        truth in prop::collection::vec(0.1f64..100.0, 1..30),
        idx in any::<prop::sample::Index>(),
        bump in 1e-6f64..1e3,
    ) {
        prop_assert_eq!(prediction_error(&truth, &truth).unwrap(), 0.0);
        prop_assert_eq!(md_index(&truth, &truth).unwrap(), 0.0);
        let mut med = truth.clone();
        let i = idx.index(med.len());
        med[i] += bump;
        prop_assert!(prediction_error(&truth, &med).unwrap() > 0.0);
        prop_assert!(md_index(&truth, &med).unwrap() > 0.0);
    }

    #[test]
    fn quantiles_monotone_and_hpd_holds_mass(
        values in prop::collection::vec(-5.0f64..5.0, 1..40),
        alpha in 0.05f64..0.99,
    ) {
        let n = values.len();
        let post = WeightedPosterior {
            draws: values.iter().map(|&v| [v, v]).collect(),
            weights: vec![1.0 / n as f64; n],
            method: Method::Rejection,
            epsilon: 1.0,
            delta: 0.0,
            projected: 0,
        };
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=20 {
            let q = post.quantile(Parameter::Kappa, k as f64 / 20.0).unwrap();
            prop_assert!(q >= prev);
            prev = q;
        }
        let (lo, hi) = post.hpd(Parameter::Lambda, alpha).unwrap();
        let mass: f64 = values.iter().filter(|&&v| v >= lo && v <= hi).count() as f64 / n as f64;
        prop_assert!(mass >= alpha - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn track_and_latent_round_trip(d in durations(), dt in 0.05f64..1.0) {
        let dir = tempfile::tempdir().unwrap();
        let path = LatentPath::from_steps(&d, &vec![0.7; d.len()]).unwrap();
        let lp = dir.path().join("latent.csv");
        io::write_latent(&lp, &path, None).unwrap();
        prop_assert_eq!(io::read_latent(&lp).unwrap(), path.clone());

        let total: f64 = d.iter().sum();
        let n_obs = ((total / dt).floor() as usize).saturating_sub(1);
        prop_assume!(n_obs >= 1);
        let track = observe(&path, dt, n_obs).unwrap();
        let tp = dir.path().join("nested/track.csv");
        io::write_track(&tp, &track, None).unwrap();
        prop_assert_eq!(io::read_track(&tp).unwrap(), track);
    }

    #[test]
    fn table_and_posterior_round_trip(
        rows in prop::collection::vec((finite(), finite(), [finite(), finite(), finite(), finite()]), 0..30),
        seed in any::<u64>(),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let table = ReferenceTable {
            prior: PriorSpec { kappa: Interval::new(0.0, 100.0), lambda: Interval::new(0.0, 50.0) },
            config: SimConfig { dt: 0.5, min_obs: 1500, seed },
            params: rows.iter().map(|r| [r.0, r.1]).collect(),
            summaries: rows.iter().map(|r| SummaryVector::from_array(r.2)).collect(),
            resamples: 3,
        };
        let p = dir.path().join("table.csv");
        io::write_table(&p, &table, Some(&serde_json::json!({"command": "test"}))).unwrap();
        prop_assert_eq!(io::read_table(&p).unwrap(), table.clone());

        let post = WeightedPosterior {
            draws: table.params.clone(),
            weights: rows.iter().map(|r| r.2[0]).collect(),
            method: Method::Neuralnet,
            epsilon: 0.001,
            delta: 1.25,
            projected: 2,
        };
        let q = dir.path().join("post.csv");
        io::write_posterior(&q, &post, None).unwrap();
        prop_assert_eq!(io::read_posterior(&q).unwrap(), post);

        let s = dir.path().join("s.csv");
        io::write_summaries(&s, &table.summaries).unwrap();
        prop_assert_eq!(io::read_summaries(&s).unwrap(), table.summaries);
    }

    #[test]
    fn report_rows_round_trip(vals in prop::collection::vec((finite(), finite(), finite(), 0usize..1000), 0..30)) {
        let dir = tempfile::tempdir().unwrap();
        let recs: Vec<ReplicateRecord> = vals
            .iter()
            .enumerate()
            .map(|(i, v)| ReplicateRecord {
                method: Method::ALL[i % 3],
                epsilon: 0.01,
                rep: v.3,
                row: 0,
                param: Parameter::ALL[i % 2],
                truth: v.0,
                median: v.1,
                hpd_lo: v.2,
                hpd_hi: v.0,
                p: 0.5,
            })
            .collect();
        let p = dir.path().join("cv.csv");
        io::write_crossval(&p, &recs).unwrap();
        let back = io::read_crossval(&p).unwrap();
        let want: Vec<io::CrossvalRow> = recs.iter().map(io::CrossvalRow::from).collect();
        prop_assert_eq!(back, want);

        let rs: Vec<RScanRecord> = vals
            .iter()
            .enumerate()
            .map(|(i, v)| RScanRecord {
                method: Method::ALL[i % 3],
                r: v.0,
                kappa_true: v.1,
                rep: v.3,
                param: Parameter::ALL[i % 2],
                truth: v.2,
                median: v.0,
            })
            .collect();
        let q = dir.path().join("rs.csv");
        io::write_rscan(&q, &rs).unwrap();
        prop_assert_eq!(io::read_rscan(&q).unwrap(), rs);

        let cov: Vec<io::CoverageRow> = vals
            .iter()
            .enumerate()
            .map(|(i, v)| io::CoverageRow { method: Method::ALL[i % 3], epsilon: v.1, param: Parameter::ALL[i % 2], rep: v.3, p: v.2 })
            .collect();
        let c = dir.path().join("cov.csv");
        io::write_coverage(&c, &cov).unwrap();
        prop_assert_eq!(io::read_coverage(&c).unwrap(), cov);
    }
}

#[test]
fn density_grid_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = stepturn::density::f_v_grid(2.0, 50).unwrap();
    let p = dir.path().join("fv.csv");
    io::write_density_grid(&p, &g, serde_json::json!({"density": "f_v", "kappa": 2.0}), 1e-6, None).unwrap();
    let (back, meta) = io::read_density_grid(&p).unwrap();
    assert_eq!(back, g);
    assert_eq!(meta.tolerance, 1e-6);
}

#[test]
fn sidecar_kind_is_checked() {
    let dir = tempfile::tempdir().unwrap();
    let g = stepturn::density::f_v_grid(2.0, 20).unwrap();
    let p = dir.path().join("fv.csv");
    io::write_density_grid(&p, &g, serde_json::Value::Null, 1e-6, None).unwrap();
    assert!(matches!(io::read_table(&p), Err(stepturn::Error::Schema(_))));
}
