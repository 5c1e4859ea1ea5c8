use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use stepturn::abc::{
    self, generate_rows, AdjustOptions, Method, Parameter, PriorSpec, ReferenceTable, SimConfig, Transform,
    WeightedPosterior,
};
use stepturn::density::{self, density_mc_check, DensityGrid};
use stepturn::experiments::{
    coverage_report, cross_validate, direct_fit, r_scan, Check, Constraint, CoverageReport, CrossValConfig,
    CrossValReport, DirectFitOptions, FitSpec, RScanConfig, RScanReport,
};
use stepturn::io::{self, Sidecar};
use stepturn::movement::{
    observe as observe_path, sample_exponential, sample_von_mises, simulate_latent, simulate_until, MovementParams,
};
use stepturn::rng::stream;
use stepturn::summaries::{summarize as summarize_track, SummaryVector};

use crate::checks;
use crate::error::{io_error, CliError, CliResult};
use crate::run::{file_digest, load_params, Run};
use crate::Global;

const DEFAULT_SEED: u64 = 1;

/// Parameters from `--config` (or defaults) plus the resolved seed.
fn base<P: DeserializeOwned + Default>(g: &Global, command: &str) -> CliResult<(P, u64)> {
    let (params, seed) = match &g.config {
        Some(path) => load_params(path, command)?,
        None => (P::default(), None),
    };
    Ok((params, g.seed.or(seed).unwrap_or(DEFAULT_SEED)))
}

macro_rules! overlay {
    ($p:expr, $a:expr; $($field:ident),*) => {
        $( if let Some(v) = $a.$field.clone() { $p.$field = v.into(); } )*
    };
}

fn method_parser() -> impl TypedValueParser<Value = Method> {
    PossibleValuesParser::new(Method::ALL.map(Method::name)).map(|s| s.parse::<Method>().expect("listed method"))
}

fn required(value: &Option<PathBuf>, flag: &str) -> CliResult<PathBuf> {
    value.clone().ok_or_else(|| CliError::Validation(format!("{flag} is required")))
}

fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

/// Sidecar for writers that do not take a run record themselves.
fn write_sidecar(run: &Run, path: &Path, format: &str, meta: Value) -> CliResult<()> {
    let sidecar = Sidecar { format: format.to_string(), meta, run: Some(run.record().clone()) };
    io::write_json(&io::sidecar_path(path), &sidecar)?;
    Ok(())
}

fn read_report<T: DeserializeOwned>(path: &Path, key: &str) -> CliResult<T> {
    let mut v: Value = io::read_json(path)?;
    let inner = v
        .get_mut(key)
        .map(Value::take)
        .ok_or_else(|| validation(format!("{} has no `{key}` field", path.display())))?;
    serde_json::from_value(inner).map_err(|e| validation(format!("{}: {e}", path.display())))
}

fn report_checks(list: &[Check]) -> CliResult<()> {
    for c in list {
        println!("{c}");
    }
    let failed = list.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::CheckFailed(format!("{failed} of {} checks failed", list.len())));
    }
    Ok(())
}

// ------------------------------------------------------------- simulate

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateParams {
    pub kappa: f64,
    pub lambda: f64,
    pub dt: f64,
    pub n_obs: usize,
    /// Simulate exactly this many steps instead of just covering the track.
    pub n_steps: Option<usize>,
}

impl Default for SimulateParams {
    fn default() -> Self {
        SimulateParams { kappa: 20.0, lambda: 2.0, dt: 0.5, n_obs: 1500, n_steps: None }
    }
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    n_obs: Option<usize>,
    #[arg(long)]
    n_steps: Option<usize>,
}

fn check_observation(dt: f64, n_obs: usize) -> CliResult<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(validation(format!("dt must be > 0, got {dt}")));
    }
    if n_obs == 0 {
        return Err(validation("n_obs must be >= 1"));
    }
    Ok(())
}

fn track_script(name: &str) -> String {
    format!(
        "set datafile separator ','\nset key autotitle columnhead\nset size ratio -1\n\
         plot '{name}' using 2:3 with lines title 'observed track'\n"
    )
}

pub fn simulate(g: &Global, a: SimulateArgs) -> CliResult<()> {
    let (mut p, seed): (SimulateParams, u64) = base(g, "simulate")?;
    overlay!(p, a; kappa, lambda, dt, n_obs);
    if a.n_steps.is_some() {
        p.n_steps = a.n_steps;
    }
    let params = MovementParams::new(p.kappa, p.lambda)?;
    check_observation(p.dt, p.n_obs)?;
    let mut run = Run::new("simulate", g.out.clone(), seed, &p, g.gnuplot)?;
    let mut rng = stream(seed, 0);
    let path = match p.n_steps {
        Some(n) => simulate_latent(&params, n, &mut rng)?,
        None => simulate_until(&params, p.dt * p.n_obs as f64, &mut rng)?,
    };
    let track = observe_path(&path, p.dt, p.n_obs)?;
    let latent_path = run.path("latent.csv");
    io::write_latent(&latent_path, &path, Some(run.record()))?;
    run.wrote(latent_path);
    let track_path = run.path("track.csv");
    io::write_track(&track_path, &track, Some(run.record()))?;
    run.wrote(track_path);
    run.gnuplot_script("track.gp", || track_script("track.csv"))?;
    println!("simulated {} steps, {} observations", path.n_steps(), track.n_obs());
    if let Ok(s) = summarize_track(&track) {
        println!("summaries: s1 {} s2 {} s3 {} s4 {}", s.s1, s.s2, s.s3, s.s4);
    }
    run.finish()
}

// -------------------------------------------------------------- observe

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObserveParams {
    pub latent: Option<PathBuf>,
    pub dt: f64,
    pub n_obs: usize,
}

impl Default for ObserveParams {
    fn default() -> Self {
        ObserveParams { latent: None, dt: 0.5, n_obs: 1500 }
    }
}

#[derive(Args)]
pub struct ObserveArgs {
    /// Latent path CSV written by `simulate`.
    #[arg(long)]
    latent: Option<PathBuf>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    n_obs: Option<usize>,
}

pub fn observe(g: &Global, a: ObserveArgs) -> CliResult<()> {
    let (mut p, seed): (ObserveParams, u64) = base(g, "observe")?;
    if a.latent.is_some() {
        p.latent = a.latent;
    }
    overlay!(p, a; dt, n_obs);
    let latent = required(&p.latent, "--latent")?;
    check_observation(p.dt, p.n_obs)?;
    let path = io::read_latent(&latent)?;
    let track = observe_path(&path, p.dt, p.n_obs)?;
    let mut run = Run::new("observe", g.out.clone(), seed, &p, g.gnuplot)?;
    let out = run.path("track.csv");
    io::write_track(&out, &track, Some(run.record()))?;
    run.wrote(out);
    run.gnuplot_script("track.gp", || track_script("track.csv"))?;
    println!("observed {} positions at dt = {}", track.n_obs(), p.dt);
    run.finish()
}

// ------------------------------------------------------------ summarize

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SummarizeParams {
    pub tracks: Vec<PathBuf>,
}

#[derive(Args)]
pub struct SummarizeArgs {
    /// Observed track CSVs; one summary row each.
    tracks: Vec<PathBuf>,
}

pub fn summarize(g: &Global, a: SummarizeArgs) -> CliResult<()> {
    let (mut p, seed): (SummarizeParams, u64) = base(g, "summarize")?;
    if !a.tracks.is_empty() {
        p.tracks = a.tracks;
    }
    if p.tracks.is_empty() {
        return Err(validation("no track files given"));
    }
    let mut rows = Vec::with_capacity(p.tracks.len());
    for path in &p.tracks {
        let track = io::read_track(path)?;
        let s = summarize_track(&track).map_err(|e| CliError::from(e).context(&path.display().to_string()))?;
        println!("{}: s1 {} s2 {} s3 {} s4 {}", path.display(), s.s1, s.s2, s.s3, s.s4);
        rows.push(s);
    }
    let mut run = Run::new("summarize", g.out.clone(), seed, &p, g.gnuplot)?;
    let out = run.path("summaries.csv");
    io::write_summaries(&out, &rows)?;
    write_sidecar(&run, &out, "summaries", json!({ "rows": rows.len() }))?;
    run.wrote(out);
    run.finish()
}

// ------------------------------------------------------------- reftable

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReftableParams {
    pub prior: PriorSpec,
    pub n_sims: usize,
    pub dt: f64,
    pub min_obs: usize,
    /// Rows per shard; each shard is written and recorded before the next.
    pub shard_size: usize,
}

impl Default for ReftableParams {
    fn default() -> Self {
        ReftableParams { prior: PriorSpec::default(), n_sims: 100_000, dt: 0.5, min_obs: 1500, shard_size: 10_000 }
    }
}

#[derive(Args)]
pub struct ReftableArgs {
    #[arg(long)]
    n_sims: Option<usize>,
    #[arg(long)]
    kappa_lo: Option<f64>,
    #[arg(long)]
    kappa_hi: Option<f64>,
    #[arg(long)]
    lambda_lo: Option<f64>,
    #[arg(long)]
    lambda_hi: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    min_obs: Option<usize>,
    #[arg(long)]
    shard_size: Option<usize>,
    /// Stop after writing this many new shards (rerun to resume).
    #[arg(long, hide = true)]
    stop_after: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ShardIndex {
    config_sha256: String,
    shards: BTreeMap<usize, ShardEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ShardEntry {
    start: usize,
    rows: usize,
    sha256: String,
    resamples: usize,
}

fn save_index(path: &Path, index: &ShardIndex) -> CliResult<()> {
    let tmp = path.with_extension("json.tmp");
    io::write_json(&tmp, index)?;
    std::fs::rename(&tmp, path).map_err(|e| io_error(path, e))
}

pub fn reftable(g: &Global, a: ReftableArgs) -> CliResult<()> {
    let (mut p, seed): (ReftableParams, u64) = base(g, "reftable")?;
    overlay!(p, a; n_sims, dt, min_obs, shard_size);
    if let Some(v) = a.kappa_lo {
        p.prior.kappa.lo = v;
    }
    if let Some(v) = a.kappa_hi {
        p.prior.kappa.hi = v;
    }
    if let Some(v) = a.lambda_lo {
        p.prior.lambda.lo = v;
    }
    if let Some(v) = a.lambda_hi {
        p.prior.lambda.hi = v;
    }
    if p.n_sims == 0 {
        return Err(validation("n_sims must be >= 1"));
    }
    if p.shard_size == 0 {
        return Err(validation("shard_size must be >= 1"));
    }
    p.prior.validate()?;
    let config = SimConfig { dt: p.dt, min_obs: p.min_obs, seed };
    config.validate()?;

    let mut run = Run::new("reftable", g.out.clone(), seed, &p, g.gnuplot)?;
    let dir = run.path("table.shards");
    std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    let index_path = dir.join("index.json");
    let mut index = if index_path.exists() {
        let index: ShardIndex = io::read_json(&index_path)?;
        if index.config_sha256 != run.config_digest() {
            return Err(CliError::Runtime(format!(
                "{} holds shards from a different configuration (config sha256 {} vs {}); \
                 remove it or choose another --out",
                dir.display(),
                index.config_sha256,
                run.config_digest()
            )));
        }
        index
    } else {
        ShardIndex { config_sha256: run.config_digest().to_string(), shards: BTreeMap::new() }
    };

    let n_shards = p.n_sims.div_ceil(p.shard_size);
    let shard_path = |k: usize| dir.join(format!("shard-{k:05}.csv"));
    let mut fresh = 0;
    for k in 0..n_shards {
        let path = shard_path(k);
        if let Some(entry) = index.shards.get(&k) {
            let found = file_digest(&path)?;
            if found != entry.sha256 {
                return Err(CliError::Runtime(format!(
                    "shard {k} ({}) has sha256 {found} but the index records {}; refusing to resume",
                    path.display(),
                    entry.sha256
                )));
            }
            continue;
        }
        if a.stop_after == Some(fresh) {
            eprintln!("stopped after {fresh} new shards; rerun the same command to resume");
            return Ok(());
        }
        let t0 = Instant::now();
        let start = k * p.shard_size;
        let end = (start + p.shard_size).min(p.n_sims);
        let rows = generate_rows(&p.prior, &config, start..end, g.exec)?;
        let part = abc::table_from_rows(p.prior, config, &rows);
        io::write_table_rows(&path, &part.params, &part.summaries)?;
        let entry = ShardEntry { start, rows: end - start, sha256: file_digest(&path)?, resamples: part.resamples };
        index.shards.insert(k, entry);
        save_index(&index_path, &index)?;
        fresh += 1;
        eprintln!("shard {}/{n_shards}: rows {start}..{end} in {:.1?}", k + 1, t0.elapsed());
    }

    let mut table = ReferenceTable { prior: p.prior, config, params: Vec::new(), summaries: Vec::new(), resamples: 0 };
    for k in 0..n_shards {
        let (params, summaries) = io::read_table_rows(&shard_path(k))?;
        table.params.extend(params);
        table.summaries.extend(summaries);
        table.resamples += index.shards[&k].resamples;
    }
    table.validate()?;
    let out = run.path("table.csv");
    io::write_table(&out, &table, Some(run.record()))?;
    run.wrote(out);
    println!("table.csv: {} rows ({} redrawn)", table.len(), table.resamples);
    run.finish()
}

// ------------------------------------------------------------------ fit

fn parse_transform(s: &str) -> Result<Transform, String> {
    match s {
        "none" => Ok(Transform::None),
        "log" => Ok(Transform::Log),
        _ => Err(format!("unknown transform '{s}'; valid: none, log")),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitParams {
    pub table: Option<PathBuf>,
    pub track: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub s_obs: Option<[f64; 4]>,
    pub method: Method,
    pub epsilon: f64,
    pub alpha: f64,
    pub options: AdjustOptions,
}

impl Default for FitParams {
    fn default() -> Self {
        FitParams {
            table: None,
            track: None,
            summary: None,
            s_obs: None,
            method: Method::Loclinear,
            epsilon: 0.001,
            alpha: 0.95,
            options: AdjustOptions::default(),
        }
    }
}

#[derive(Args)]
pub struct FitArgs {
    /// Reference table CSV.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Observed track CSV.
    #[arg(long)]
    track: Option<PathBuf>,
    /// Summary CSV; its single row is the observation.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Observed summaries inline: s1,s2,s3,s4.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    s_obs: Option<Vec<f64>>,
    #[arg(long, value_parser = method_parser())]
    method: Option<Method>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// HPD probability.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_parser = parse_transform)]
    transform: Option<Transform>,
}

fn observation(p: &FitParams) -> CliResult<SummaryVector> {
    match (&p.track, &p.summary, &p.s_obs) {
        (Some(t), None, None) => Ok(summarize_track(&io::read_track(t)?)?),
        (None, Some(s), None) => {
            let rows = io::read_summaries(s)?;
            match rows.as_slice() {
                [one] => Ok(*one),
                _ => Err(validation(format!("{} must hold exactly one summary row, found {}", s.display(), rows.len()))),
            }
        }
        (None, None, Some(a)) => Ok(SummaryVector::from_array(*a)),
        (None, None, None) => Err(validation("one of --track, --summary or --s-obs is required")),
        _ => Err(validation("give only one of --track, --summary or --s-obs")),
    }
}

fn print_posterior(post: &WeightedPosterior, alpha: f64) -> CliResult<()> {
    println!("{} posterior: {} draws, epsilon {}, delta {:.6e}", post.method, post.len(), post.epsilon, post.delta);
    for param in Parameter::ALL {
        let (lo, hi) = post.hpd(param, alpha)?;
        println!("  {param:<7} median {:.6}  {:.0}% HPD [{lo:.6}, {hi:.6}]", post.median(param)?, alpha * 100.0);
    }
    if post.projected > 0 {
        println!("  {} adjusted draws were projected onto the prior support", post.projected);
    }
    Ok(())
}

pub fn fit(g: &Global, a: FitArgs) -> CliResult<()> {
    let (mut p, seed): (FitParams, u64) = base(g, "fit")?;
    for (dst, src) in [(&mut p.table, a.table), (&mut p.track, a.track), (&mut p.summary, a.summary)] {
        if src.is_some() {
            *dst = src;
        }
    }
    if let Some(v) = a.s_obs {
        let v: [f64; 4] = v
            .try_into()
            .map_err(|v: Vec<f64>| validation(format!("--s-obs needs 4 comma-separated values, got {}", v.len())))?;
        p.s_obs = Some(v);
    }
    overlay!(p, a; method, epsilon, alpha);
    if let Some(t) = a.transform {
        p.options.transform = t;
    }
    if !(p.alpha > 0.0 && p.alpha < 1.0) {
        return Err(validation(format!("alpha must lie in (0, 1), got {}", p.alpha)));
    }
    let table = io::read_table(&required(&p.table, "--table")?)?;
    let s_obs = observation(&p)?;
    let post = abc::fit(&table, &s_obs, p.method, p.epsilon, &p.options)?;
    let mut run = Run::new("fit", g.out.clone(), seed, &p, g.gnuplot)?;
    let name = format!("posterior-{}.csv", p.method);
    let out = run.path(&name);
    io::write_posterior(&out, &post, Some(run.record()))?;
    run.wrote(out);
    run.gnuplot_script(&format!("posterior-{}.gp", p.method), || {
        format!(
            "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'kappa'\nset ylabel 'lambda'\n\
             plot '{name}' using 1:2:(0.5 + 20 * $3) with points pt 7 ps variable title 'weighted draws'\n"
        )
    })?;
    print_posterior(&post, p.alpha)?;
    run.finish()
}

// ------------------------------------------------------------- crossval

fn default_fits() -> Vec<FitSpec> {
    vec![
        FitSpec::new(Method::Rejection, 0.1),
        FitSpec::new(Method::Rejection, 0.001),
        FitSpec::new(Method::Loclinear, 0.001),
        FitSpec::new(Method::Neuralnet, 0.001),
    ]
}

fn fits_from(methods: &Option<Vec<Method>>, epsilons: &Option<Vec<f64>>) -> Option<Vec<FitSpec>> {
    if methods.is_none() && epsilons.is_none() {
        return None;
    }
    let m = methods.clone().unwrap_or_else(|| Method::ALL.to_vec());
    let e = epsilons.clone().unwrap_or_else(|| vec![0.001]);
    Some(FitSpec::grid(&m, &e))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossvalParams {
    pub table: Option<PathBuf>,
    pub fits: Vec<FitSpec>,
    pub n_rep: usize,
    pub constraint: Constraint,
    pub alpha: f64,
    pub options: AdjustOptions,
}

impl Default for CrossvalParams {
    fn default() -> Self {
        CrossvalParams {
            table: None,
            fits: default_fits(),
            n_rep: 100,
            constraint: Constraint::default(),
            alpha: 0.95,
            options: AdjustOptions::default(),
        }
    }
}

#[derive(Args)]
pub struct CrossvalArgs {
    #[arg(long)]
    table: Option<PathBuf>,
    /// Methods to evaluate (crossed with --epsilons).
    #[arg(long, value_delimiter = ',', value_parser = method_parser())]
    methods: Option<Vec<Method>>,
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    #[arg(long)]
    n_rep: Option<usize>,
    /// Run the trend checks and exit with code 3 if any fails.
    #[arg(long)]
    check: bool,
}

pub fn crossval(g: &Global, a: CrossvalArgs) -> CliResult<()> {
    let (mut p, seed): (CrossvalParams, u64) = base(g, "crossval")?;
    if a.table.is_some() {
        p.table = a.table.clone();
    }
    if let Some(f) = fits_from(&a.methods, &a.epsilons) {
        p.fits = f;
    }
    overlay!(p, a; n_rep);
    let cfg = CrossValConfig {
        fits: p.fits.clone(),
        n_rep: p.n_rep,
        constraint: p.constraint,
        seed,
        alpha: p.alpha,
        options: p.options,
    };
    cfg.validate()?;
    let table = io::read_table(&required(&p.table, "--table")?)?;
    let report = cross_validate(&table, &cfg, g.exec)?;
    let mut run = Run::new("crossval", g.out.clone(), seed, &p, g.gnuplot)?;
    let out = run.path("crossval.csv");
    io::write_crossval(&out, &report.records)?;
    write_sidecar(&run, &out, "crossval", json!({ "n_rep": report.rows.len(), "fits": report.config.fits }))?;
    run.wrote(out);
    run.write_report("crossval-report.json", "report", &report)?;
    run.gnuplot_script("crossval.gp", crossval_script)?;
    print_crossval(&report);
    let list = if a.check { checks::crossval_checks(&report) } else { Vec::new() };
    run.finish()?;
    report_checks(&list)
}

fn crossval_script() -> String {
    "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'true value'\nset ylabel 'posterior median'\n\
     plot 'crossval.csv' using 5:6 with points pt 7 ps 0.5 title 'median vs truth', x with lines title 'y = x'\n"
        .to_string()
}

fn print_crossval(report: &CrossValReport) {
    println!("{:<20} {:<7} {:>12} {:>12}", "fit", "param", "pred. error", "MD index");
    for m in &report.metrics {
        println!(
            "{:<20} {:<7} {:>12.5} {:>12.5}",
            FitSpec::new(m.method, m.epsilon).to_string(),
            m.param.to_string(),
            m.prediction_error,
            m.md_index
        );
    }
}

// ------------------------------------------------------------- coverage

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageParams {
    /// `crossval-report.json` from `crossval`.
    pub report: Option<PathBuf>,
}

#[derive(Args)]
pub struct CoverageArgs {
    /// Cross-validation report JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Run the coverage checks and exit with code 3 if any fails.
    #[arg(long)]
    check: bool,
}

fn histogram_csv(cov: &CoverageReport) -> String {
    let mut s = String::from("method,epsilon,param,bin_lo,bin_hi,count\n");
    for e in &cov.entries {
        let bins = e.histogram.len();
        for (b, count) in e.histogram.iter().enumerate() {
            let lo = b as f64 / bins as f64;
            let hi = (b + 1) as f64 / bins as f64;
            let _ = writeln!(s, "{},{},{},{},{},{count}", e.method, io::format_f64(e.epsilon), e.param, io::format_f64(lo), io::format_f64(hi));
        }
    }
    s
}

pub fn coverage(g: &Global, a: CoverageArgs) -> CliResult<()> {
    let (mut p, seed): (CoverageParams, u64) = base(g, "coverage")?;
    if a.report.is_some() {
        p.report = a.report;
    }
    let cv: CrossValReport = read_report(&required(&p.report, "--report")?, "report")?;
    let cov = coverage_report(&cv);
    let mut run = Run::new("coverage", g.out.clone(), seed, &p, g.gnuplot)?;
    let out = run.path("coverage.csv");
    io::write_coverage(&out, &io::coverage_rows(&cov))?;
    write_sidecar(&run, &out, "coverage", json!({ "alpha": cov.alpha }))?;
    run.wrote(out);
    run.write_report("coverage-summary.json", "report", &cov)?;
    run.write_text("coverage-hist.csv", &histogram_csv(&cov))?;
    run.gnuplot_script("coverage.gp", || {
        "set datafile separator ','\nset style data boxes\nset style fill solid 0.5\nset xlabel 'p'\nset ylabel 'count'\n\
         plot 'coverage-hist.csv' using (($4 + $5) / 2):6 every ::1 title 'coverage p-values'\n"
            .to_string()
    })?;
    println!("{:<20} {:<7} {:>9} {:>8} {:>8} {:>9}", "fit", "param", "coverage", "mean p", "KS D", "KS p");
    for e in &cov.entries {
        println!(
            "{:<20} {:<7} {:>9.3} {:>8.3} {:>8.4} {:>9.4}",
            FitSpec::new(e.method, e.epsilon).to_string(),
            e.param.to_string(),
            e.coverage,
            e.mean_p,
            e.ks.statistic,
            e.ks.p_value
        );
    }
    let list = if a.check { checks::coverage_checks(&cov) } else { Vec::new() };
    run.finish()?;
    report_checks(&list)
}

// ---------------------------------------------------------------- rscan

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RscanParams {
    pub table: Option<PathBuf>,
    pub r_values: Vec<f64>,
    pub kappa_values: Vec<f64>,
    pub n_per_cell: usize,
    pub n_obs: usize,
    pub fits: Vec<FitSpec>,
    pub options: AdjustOptions,
}

impl Default for RscanParams {
    fn default() -> Self {
        RscanParams {
            table: None,
            r_values: vec![0.25, 1.0, 4.5],
            kappa_values: vec![10.0, 40.0, 70.0],
            n_per_cell: 25,
            n_obs: 1500,
            fits: Method::ALL.iter().map(|&m| FitSpec::new(m, 0.001)).collect(),
            options: AdjustOptions::default(),
        }
    }
}

#[derive(Args)]
pub struct RscanArgs {
    #[arg(long)]
    table: Option<PathBuf>,
    /// Observation ratios R = lambda * dt.
    #[arg(long, value_delimiter = ',')]
    r_values: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    kappa_values: Option<Vec<f64>>,
    #[arg(long)]
    n_per_cell: Option<usize>,
    #[arg(long)]
    n_obs: Option<usize>,
    #[arg(long, value_delimiter = ',', value_parser = method_parser())]
    methods: Option<Vec<Method>>,
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    /// Run the trend checks and exit with code 3 if any fails.
    #[arg(long)]
    check: bool,
}

pub fn rscan(g: &Global, a: RscanArgs) -> CliResult<()> {
    let (mut p, seed): (RscanParams, u64) = base(g, "rscan")?;
    if a.table.is_some() {
        p.table = a.table.clone();
    }
    if let Some(f) = fits_from(&a.methods, &a.epsilons) {
        p.fits = f;
    }
    overlay!(p, a; r_values, kappa_values, n_per_cell, n_obs);
    let table = io::read_table(&required(&p.table, "--table")?)?;
    let cfg = RScanConfig {
        r_values: p.r_values.clone(),
        kappa_values: p.kappa_values.clone(),
        n_per_cell: p.n_per_cell,
        dt: table.config.dt,
        n_obs: p.n_obs,
        fits: p.fits.clone(),
        seed,
        options: p.options,
    };
    cfg.validate()?;
    let report = r_scan(&table, &cfg, g.exec)?;
    let mut run = Run::new("rscan", g.out.clone(), seed, &p, g.gnuplot)?;
    let out = run.path("rscan.csv");
    io::write_rscan(&out, &report.records)?;
    write_sidecar(&run, &out, "rscan", json!({ "dt": cfg.dt, "fits": cfg.fits }))?;
    run.wrote(out);
    run.write_report("rscan-report.json", "report", &report)?;
    run.gnuplot_script("rscan.gp", || {
        "set datafile separator ','\nset key autotitle columnhead\nset logscale x\nset xlabel 'R'\n\
         set ylabel 'posterior median / truth'\n\
         plot 'rscan.csv' using 2:($7 / $6) with points pt 7 ps 0.5 title 'relative estimate'\n"
            .to_string()
    })?;
    print_rscan(&report);
    let list = if a.check { checks::rscan_checks(&report) } else { Vec::new() };
    run.finish()?;
    report_checks(&list)
}

fn print_rscan(report: &RScanReport) {
    for w in report.warnings() {
        eprintln!("warning: {w}");
    }
    println!("{:>6} {:>7} {:<20} {:<7} {:>12} {:>10}", "R", "kappa", "fit", "param", "pred. error", "MD index");
    for c in &report.cells {
        for m in &c.metrics {
            println!(
                "{:>6} {:>7} {:<20} {:<7} {:>12.5} {:>10.5}",
                c.r,
                c.kappa_true,
                FitSpec::new(m.method, m.epsilon).to_string(),
                m.param.to_string(),
                m.prediction_error,
                m.md_index
            );
        }
    }
}

// ------------------------------------------------------------ directfit

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DirectfitParams {
    pub latent: Option<PathBuf>,
    pub options: DirectFitOptions,
}

#[derive(Args)]
pub struct DirectfitArgs {
    /// Latent path CSV with known durations and turns.
    #[arg(long)]
    latent: Option<PathBuf>,
    /// Upper end of the concentration grid.
    #[arg(long)]
    kappa_max: Option<f64>,
}

pub fn directfit(g: &Global, a: DirectfitArgs) -> CliResult<()> {
    let (mut p, seed): (DirectfitParams, u64) = base(g, "directfit")?;
    if a.latent.is_some() {
        p.latent = a.latent;
    }
    if let Some(k) = a.kappa_max {
        p.options.kappa_max = k;
    }
    let path = io::read_latent(&required(&p.latent, "--latent")?)?;
    let fit = direct_fit(&path.durations, &path.turns, &p.options)?;
    let mut run = Run::new("directfit", g.out.clone(), seed, &p, g.gnuplot)?;
    run.write_report("directfit.json", "fit", &fit)?;
    println!("direct fit on {} steps, {} turns", fit.n_steps, fit.n_turns);
    let pct = p.options.alpha * 100.0;
    for (name, m) in [("kappa", &fit.kappa), ("lambda", &fit.lambda)] {
        println!("  {name:<7} MLE {:.6}  median {:.6}  {pct:.0}% interval [{:.6}, {:.6}]", m.mle, m.median, m.lo, m.hi);
    }
    for w in &fit.warnings {
        eprintln!("warning: {w:?}");
    }
    run.finish()
}

// --------------------------------------------------------- oracle-check

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SSetting {
    pub kappa: f64,
    pub lambda: f64,
    pub n: u32,
    pub c: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleParams {
    pub n_draws: usize,
    pub n_nodes: usize,
    pub v_kappas: Vec<f64>,
    /// `[kappa, lambda]` pairs.
    pub z: Vec<[f64; 2]>,
    pub s: Vec<SSetting>,
    pub v_tolerance: f64,
    pub zs_tolerance: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams {
            n_draws: 100_000,
            n_nodes: 400,
            v_kappas: vec![0.5, 2.0, 8.0],
            z: vec![[0.0, 1.0], [5.0, 2.0], [20.0, 0.5]],
            s: vec![
                SSetting { kappa: 5.0, lambda: 2.0, n: 3, c: 4.0 },
                SSetting { kappa: 1.0, lambda: 1.0, n: 2, c: 3.0 },
                SSetting { kappa: 10.0, lambda: 4.0, n: 5, c: 2.0 },
            ],
            v_tolerance: 1e-6,
            zs_tolerance: 1e-5,
        }
    }
}

#[derive(Args)]
pub struct OracleArgs {
    /// Monte Carlo draws per density.
    #[arg(long)]
    n_draws: Option<usize>,
    #[arg(long)]
    n_nodes: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
enum Target {
    V(f64),
    Z([f64; 2]),
    S(SSetting),
}

impl Target {
    fn label(&self, i: usize) -> String {
        match self {
            Target::V(_) => format!("v-{i}"),
            Target::Z(_) => format!("z-{i}"),
            Target::S(_) => format!("s-{i}"),
        }
    }

    fn params(&self) -> Value {
        match *self {
            Target::V(kappa) => json!({ "density": "V", "kappa": kappa }),
            Target::Z([kappa, lambda]) => json!({ "density": "Z", "kappa": kappa, "lambda": lambda }),
            Target::S(s) => json!({ "density": "S", "kappa": s.kappa, "lambda": s.lambda, "n": s.n, "c": s.c }),
        }
    }

    fn grid(&self, n_nodes: usize) -> stepturn::Result<DensityGrid> {
        match *self {
            Target::V(kappa) => density::f_v_grid(kappa, n_nodes),
            Target::Z([kappa, lambda]) => density::f_z_grid(kappa, lambda, n_nodes),
            Target::S(s) => density::f_s_grid(s.kappa, s.lambda, s.n, s.c, n_nodes),
        }
    }

    fn draws(&self, n: usize, seed: u64, task: u64) -> stepturn::Result<Vec<f64>> {
        let mut rng = stream(seed, task);
        (0..n)
            .map(|_| {
                Ok(match *self {
                    Target::V(kappa) => sample_von_mises(kappa, 0.0, &mut rng)?.cos(),
                    Target::Z([kappa, lambda]) => {
                        sample_von_mises(kappa, 0.0, &mut rng)?.cos() * sample_exponential(lambda, &mut rng)?
                    }
                    Target::S(s) => {
                        let mut w = 0.0;
                        for _ in 0..s.n {
                            w += sample_exponential(s.lambda, &mut rng)?;
                        }
                        sample_von_mises(s.kappa, 0.0, &mut rng)?.cos() * (s.c - w)
                    }
                })
            })
            .collect()
    }
}

pub fn oracle_check(g: &Global, a: OracleArgs) -> CliResult<()> {
    let (mut p, seed): (OracleParams, u64) = base(g, "oracle-check")?;
    overlay!(p, a; n_draws, n_nodes);
    if p.n_draws < density::MIN_DRAWS {
        return Err(validation(format!("n_draws must be >= {}", density::MIN_DRAWS)));
    }
    let targets: Vec<Target> = p
        .v_kappas
        .iter()
        .map(|&k| Target::V(k))
        .chain(p.z.iter().map(|&z| Target::Z(z)))
        .chain(p.s.iter().map(|&s| Target::S(s)))
        .collect();
    let results = g.exec.try_map(targets.len(), |i| -> stepturn::Result<_> {
        let t = targets[i];
        let grid = t.grid(p.n_nodes)?;
        let draws = t.draws(p.n_draws, seed, i as u64)?;
        let mc = density_mc_check(&grid, &draws)?;
        Ok((grid, mc))
    })?;

    let mut run = Run::new("oracle-check", g.out.clone(), seed, &p, g.gnuplot)?;
    let mut list = Vec::new();
    let mut plots = Vec::new();
    for (i, (t, (grid, mc))) in targets.iter().zip(&results).enumerate() {
        let tol = if matches!(t, Target::V(_)) { p.v_tolerance } else { p.zs_tolerance };
        let label = t.label(i);
        let name = format!("density-{label}.csv");
        let out = run.path(&name);
        io::write_density_grid(&out, grid, t.params(), tol, Some(run.record()))?;
        run.wrote(out);
        plots.push(format!("'{name}' using 1:2 with lines title '{label}'"));
        list.push(Check::new(
            format!("{label} normalization"),
            (grid.mass - 1.0).abs() <= tol,
            format!("mass {:.12} (tolerance {tol:.0e})", grid.mass),
        ));
        list.push(Check::new(
            format!("{label} Monte Carlo KS"),
            mc.passed(),
            format!("D = {:.5} vs critical {:.5} over {} draws", mc.ks, mc.critical, mc.n),
        ));
    }
    let mut arcsine: f64 = 0.0;
    for i in 0..=180 {
        let v = -0.9 + 0.01 * f64::from(i);
        let exact = 1.0 / (std::f64::consts::PI * (1.0 - v * v).sqrt());
        arcsine = arcsine.max((density::f_v_density(v, 1e-6)? - exact).abs());
    }
    list.push(Check::new("V arcsine limit", arcsine < 1e-6, format!("max deviation {arcsine:.2e} at kappa = 1e-6")));
    run.write_report("oracle-check.json", "checks", &list)?;
    run.gnuplot_script("oracle-check.gp", || {
        format!("set datafile separator ','\nset key autotitle columnhead\nplot {}\n", plots.join(", \\\n     "))
    })?;
    run.finish()?;
    report_checks(&list)
}
