#![allow(clippy::needless_range_loop)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use stepturn::abc::{accept, PriorSpec, SimConfig};
use stepturn::io;
use stepturn::summaries::{summarize, SummaryVector};
use tempfile::TempDir;

fn stepturn(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stepturn"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("STEPTURN_WORKERS")
        .output()
        .expect("spawn stepturn")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = stepturn(out, args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// File contents; equal contents is equal digests.
fn digest(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn small_table(dir: &Path, n: usize, seed: u64, extra: &[&str]) -> PathBuf {
    let n = n.to_string();
    let seed = seed.to_string();
    let mut args = vec!["reftable", "--n-sims", &n, "--min-obs", "300", "--shard-size", "250", "--seed", &seed];
    args.extend_from_slice(extra);
    ok(dir, &args);
    dir.join("table.csv")
}

#[test]
fn simulate_is_deterministic_and_worker_independent() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let args = ["simulate", "--kappa", "20", "--lambda", "2", "--dt", "0.5", "--n-obs", "1500", "--seed", "7"];
    ok(a.path(), &args);
    ok(b.path(), &[&args[..], &["--workers", "3"]].concat());
    for f in ["track.csv", "track.json", "latent.csv", "latent.json"] {
        assert_eq!(digest(&a.path().join(f)), digest(&b.path().join(f)), "{f}");
    }
}

#[test]
fn simulated_track_round_trips_through_summaries() {
    let dir = TempDir::new().unwrap();
    let stdout = ok(dir.path(), &["simulate", "--seed", "11", "--n-obs", "800"]);
    let line = stdout.lines().find(|l| l.starts_with("summaries:")).expect("summary line");
    let printed: Vec<f64> = line.split_whitespace().skip(1).collect::<Vec<_>>().chunks(2).map(|c| c[1].parse().unwrap()).collect();
    let track = io::read_track(&dir.path().join("track.csv")).unwrap();
    let again = summarize(&track).unwrap().to_array();
    for (p, q) in printed.iter().zip(again) {
        assert!((p - q).abs() <= 1e-12 * p.abs().max(1.0), "{p} vs {q}");
    }
}

#[test]
fn output_directory_handling() {
    let dir = TempDir::new().unwrap();
    let nested = dir.path().join("a/b/c");
    ok(&nested, &["simulate", "--n-obs", "50"]);
    assert!(nested.join("track.csv").exists());

    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "not a directory").unwrap();
    let o = stepturn(&blocker.join("sub"), &["simulate", "--n-obs", "50"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("file"), "{err}");
    assert!(!err.contains("panicked"), "{err}");
}

#[test]
fn rerun_from_sidecar_reproduces_outputs() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    ok(a.path(), &["simulate", "--kappa", "5", "--lambda", "3", "--n-obs", "200", "--seed", "99"]);
    let sidecar = a.path().join("track.json");
    ok(b.path(), &["--config", sidecar.to_str().unwrap(), "simulate"]);
    assert_eq!(digest(&a.path().join("track.csv")), digest(&b.path().join("track.csv")));
    assert_eq!(digest(&a.path().join("track.json")), digest(&b.path().join("track.json")));

    let o = stepturn(b.path(), &["--config", sidecar.to_str().unwrap(), "observe"]);
    assert_eq!(code(&o), 1, "sidecar from another command is rejected");
}

#[test]
fn manifest_records_match_files() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["simulate", "--n-obs", "100", "--gnuplot"]);
    ok(dir.path(), &["summarize", dir.path().join("track.csv").to_str().unwrap()]);
    let text = std::fs::read_to_string(dir.path().join("manifest.jsonl")).unwrap();
    let records: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let paths: Vec<&str> = records.iter().map(|r| r["path"].as_str().unwrap()).collect();
    for want in ["latent.csv", "latent.json", "track.csv", "track.json", "track.gp", "summaries.csv", "summaries.json"] {
        assert!(paths.contains(&want), "{want} missing from {paths:?}");
    }
    for r in &records {
        let bytes = std::fs::read(dir.path().join(r["path"].as_str().unwrap())).unwrap();
        assert_eq!(r["sha256"].as_str().unwrap(), coreutils_sha256(&bytes));
        assert!(r["config_sha256"].as_str().unwrap().len() == 64);
        assert!(r["duration_s"].as_f64().unwrap() >= 0.0);
    }
    assert!(records.iter().any(|r| r["command"] == "summarize"));
}

/// Digest from `sha256sum`, independent of the binary's own hashing.
fn coreutils_sha256(bytes: &[u8]) -> String {
    use std::io::Write;
    use std::process::Stdio;
    let mut child = Command::new("sha256sum").stdin(Stdio::piped()).stdout(Stdio::piped()).spawn().expect("sha256sum");
    child.stdin.take().unwrap().write_all(bytes).unwrap();
    let out = child.wait_with_output().unwrap();
    String::from_utf8(out.stdout).unwrap().split_whitespace().next().unwrap().to_string()
}

#[test]
fn reftable_validation_and_worker_independence() {
    let dir = TempDir::new().unwrap();
    let o = stepturn(dir.path(), &["reftable", "--n-sims", "0"]);
    assert_eq!(code(&o), 1);

    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let ta = small_table(a.path(), 1000, 5, &["--workers", "1"]);
    let tb = small_table(b.path(), 1000, 5, &["--workers", "8"]);
    assert_eq!(digest(&ta), digest(&tb));
    assert_eq!(digest(&a.path().join("table.json")), digest(&b.path().join("table.json")));
}

#[test]
fn reftable_resumes_to_the_same_digest() {
    let (full, part) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let whole = small_table(full.path(), 1000, 3, &[]);

    ok(part.path(), &["reftable", "--n-sims", "1000", "--min-obs", "300", "--shard-size", "250", "--seed", "3", "--stop-after", "2"]);
    assert!(!part.path().join("table.csv").exists());
    assert!(part.path().join("table.shards/shard-00001.csv").exists());
    assert!(!part.path().join("table.shards/shard-00002.csv").exists());
    let resumed = small_table(part.path(), 1000, 3, &[]);
    assert_eq!(digest(&whole), digest(&resumed));
}

#[test]
fn reftable_refuses_tampered_or_foreign_shards() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["reftable", "--n-sims", "500", "--min-obs", "300", "--shard-size", "250", "--stop-after", "1"]);
    let shard = dir.path().join("table.shards/shard-00000.csv");
    let mut text = std::fs::read_to_string(&shard).unwrap();
    let row = text.lines().nth(1).unwrap().to_owned();
    text.push_str(&row);
    text.push('\n');
    std::fs::write(&shard, text).unwrap();
    let o = stepturn(dir.path(), &["reftable", "--n-sims", "500", "--min-obs", "300", "--shard-size", "250"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("refusing to resume"));

    let o = stepturn(dir.path(), &["reftable", "--n-sims", "600", "--min-obs", "300", "--shard-size", "250"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("different configuration"));
}

fn fmt4(s: &SummaryVector) -> String {
    s.to_array().map(|v| v.to_string()).join(",")
}

#[test]
fn fit_recovers_its_own_generating_row() {
    let dir = TempDir::new().unwrap();
    let path = small_table(dir.path(), 1000, 21, &[]);
    let table = io::read_table(&path).unwrap();
    let row = 137;
    let s = fmt4(&table.summaries[row]);
    ok(dir.path(), &["fit", "--table", path.to_str().unwrap(), "--s-obs", &s, "--method", "rejection", "--epsilon", "0.001"]);
    let post = io::read_posterior(&dir.path().join("posterior-rejection.csv")).unwrap();
    assert_eq!(post.len(), 1);
    assert_eq!(post.median(stepturn::abc::Parameter::Kappa).unwrap(), table.params[row][0]);
    assert_eq!(post.median(stepturn::abc::Parameter::Lambda).unwrap(), table.params[row][1]);
}

/// Weighted least squares by normal equations and Gaussian elimination.
fn wls(x: &[[f64; 5]], y: &[f64], w: &[f64]) -> [f64; 5] {
    let mut a = [[0.0; 6]; 5];
    for ((xi, yi), wi) in x.iter().zip(y).zip(w) {
        for r in 0..5 {
            for c in 0..5 {
                a[r][c] += wi * xi[r] * xi[c];
            }
            a[r][5] += wi * xi[r] * yi;
        }
    }
    for col in 0..5 {
        let piv = (col..5).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        for r in 0..5 {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..6 {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    std::array::from_fn(|k| a[k][5] / a[k][k])
}

#[test]
fn loclinear_matches_independent_recomputation() {
    let dir = TempDir::new().unwrap();
    let path = small_table(dir.path(), 2000, 8, &[]);
    let table = io::read_table(&path).unwrap();
    let s_obs = table.summaries[17];
    let eps = 0.1;
    ok(dir.path(), &["fit", "--table", path.to_str().unwrap(), "--s-obs", &fmt4(&s_obs), "--epsilon", "0.1"]);
    let post = io::read_posterior(&dir.path().join("posterior-loclinear.csv")).unwrap();

    let acc = accept(&table, &s_obs, eps).unwrap();
    let w = acc.kernel_weights();
    let o = s_obs.to_array();
    let x: Vec<[f64; 5]> = acc
        .indices
        .iter()
        .map(|&i| {
            let s = table.summaries[i].to_array();
            [1.0, s[0] - o[0], s[1] - o[1], s[2] - o[2], s[3] - o[3]]
        })
        .collect();
    assert_eq!(post.len(), x.len());
    for k in 0..2 {
        let y: Vec<f64> = acc.indices.iter().map(|&i| table.params[i][k]).collect();
        let beta = wls(&x, &y, &w);
        let support = table.prior.support(k);
        for (j, xi) in x.iter().enumerate() {
            let adj = y[j] - (1..5).map(|c| beta[c] * xi[c]).sum::<f64>();
            let want = support.clamp(adj);
            let got = post.draws[j][k];
            assert!((got - want).abs() <= 1e-8 * want.abs().max(1.0), "param {k} draw {j}: {got} vs {want}");
        }
    }
}

#[test]
fn usage_and_schema_errors() {
    let dir = TempDir::new().unwrap();
    let o = stepturn(dir.path(), &["fit", "--method", "bogus"]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    for m in ["rejection", "loclinear", "neuralnet"] {
        assert!(err.contains(m), "{err}");
    }

    let path = small_table(dir.path(), 300, 2, &[]);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "s1,s2,s3,s5\n1,2,3,4\n").unwrap();
    let o = stepturn(dir.path(), &["fit", "--table", path.to_str().unwrap(), "--summary", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).to_lowercase().contains("schema"));

    let o = stepturn(dir.path(), &["fit", "--table", path.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn worker_env_is_a_default_the_flag_overrides() {
    let dir = TempDir::new().unwrap();
    let run = |flag: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_stepturn"));
        c.arg("--out").arg(dir.path()).args(["simulate", "--n-obs", "20"]).env("STEPTURN_WORKERS", "0");
        if let Some(f) = flag {
            c.args(["--workers", f]);
        }
        c.output().unwrap()
    };
    assert_eq!(code(&run(None)), 1);
    assert_eq!(code(&run(Some("2"))), 0);
}

#[test]
fn experiment_pipeline_and_rscan_rerun() {
    let dir = TempDir::new().unwrap();
    let table = small_table(dir.path(), 2000, 13, &["--kappa-hi", "40", "--lambda-hi", "10"]);
    let t = table.to_str().unwrap();
    let out = ok(dir.path(), &["crossval", "--table", t, "--methods", "rejection,loclinear", "--epsilons", "0.2,0.05", "--n-rep", "10", "--gnuplot"]);
    assert!(out.contains("rejection@0.2"));
    let records = io::read_crossval(&dir.path().join("crossval.csv")).unwrap();
    assert_eq!(records.len(), 2 * 2 * 10 * 2);
    let report = dir.path().join("crossval-report.json");
    ok(dir.path(), &["coverage", "--report", report.to_str().unwrap()]);
    let rows = io::read_coverage(&dir.path().join("coverage.csv")).unwrap();
    assert_eq!(rows.len(), records.len());
    assert!(dir.path().join("coverage-hist.csv").exists());

    let scan = ["rscan", "--table", t, "--r-values", "1", "--kappa-values", "20", "--n-per-cell", "3", "--n-obs", "300", "--epsilons", "0.05", "--seed", "4"];
    let (a, b) = (dir.path().join("scan-a"), dir.path().join("scan-b"));
    ok(&a, &scan);
    ok(&b, &[&scan[..], &["--workers", "4"]].concat());
    for f in ["rscan.csv", "rscan.json", "rscan-report.json"] {
        assert_eq!(digest(&a.join(f)), digest(&b.join(f)), "{f}");
    }
}

#[test]
fn directfit_reports_both_parameters() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["simulate", "--kappa", "20", "--lambda", "2", "--n-steps", "5000", "--n-obs", "100", "--seed", "12"]);
    let stdout = ok(dir.path(), &["directfit", "--latent", dir.path().join("latent.csv").to_str().unwrap()]);
    assert!(stdout.contains("kappa") && stdout.contains("lambda"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("directfit.json")).unwrap()).unwrap();
    let k = v["fit"]["kappa"]["median"].as_f64().unwrap();
    let l = v["fit"]["lambda"]["median"].as_f64().unwrap();
    assert!((k / 20.0 - 1.0).abs() < 0.1 && (l / 2.0 - 1.0).abs() < 0.1, "{k} {l}");
}

#[test]
fn oracle_check_passes_and_fails_with_codes() {
    let dir = TempDir::new().unwrap();
    let stdout = ok(dir.path(), &["oracle-check"]);
    assert!(!stdout.contains("FAIL"));
    assert_eq!(stdout.matches("PASS").count(), 19);
    let (grid, meta) = io::read_density_grid(&dir.path().join("density-z-3.csv")).unwrap();
    assert!((grid.mass - 1.0).abs() < 1e-5 && meta.params["density"] == "Z");

    let cfg = dir.path().join("strict.json");
    std::fs::write(&cfg, r#"{"zs_tolerance": 1e-30, "n_draws": 2000}"#).unwrap();
    let o = stepturn(&dir.path().join("strict"), &["--config", cfg.to_str().unwrap(), "oracle-check"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn default_prior_matches_library() {
    // The CLI's reftable defaults are the library's.
    let dir = TempDir::new().unwrap();
    small_table(dir.path(), 10, 1, &[]);
    let table = io::read_table(&dir.path().join("table.csv")).unwrap();
    assert_eq!(table.prior, PriorSpec::default());
    assert_eq!(table.config, SimConfig { dt: 0.5, min_obs: 300, seed: 1 });
}
