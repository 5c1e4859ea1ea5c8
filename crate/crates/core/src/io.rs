//! CSV and JSON persistence.
//!
//! Every CSV has a fixed header and floats are written with 17 significant
//! digits, so reading back reproduces the in-memory values bit for bit.
//! Format metadata lives in a JSON sidecar next to the CSV (`x.csv` ->
//! `x.json`), optionally carrying the producing run's configuration.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::abc::{Method, Parameter, PriorSpec, ReferenceTable, SimConfig, WeightedPosterior};
use crate::density::{DensityGrid, NodeLayout};
use crate::experiments::{CoverageReport, RScanRecord, ReplicateRecord};
use crate::movement::{LatentPath, ObservedTrack, Point};
use crate::summaries::SummaryVector;
use crate::{Error, Result};

pub const TRACK_HEADER: [&str; 4] = ["j", "x", "y", "nj"];
pub const LATENT_HEADER: [&str; 6] = ["i", "x", "y", "phi", "t_dur", "omega"];
pub const SUMMARY_HEADER: [&str; 4] = ["s1", "s2", "s3", "s4"];
pub const TABLE_HEADER: [&str; 6] = ["kappa", "lambda", "s1", "s2", "s3", "s4"];
pub const POSTERIOR_HEADER: [&str; 3] = ["kappa", "lambda", "weight"];
pub const CROSSVAL_HEADER: [&str; 8] = ["method", "epsilon", "rep", "param", "truth", "median", "hpd_lo", "hpd_hi"];
pub const RSCAN_HEADER: [&str; 7] = ["method", "R", "kappa_true", "rep", "param", "truth", "median"];
pub const COVERAGE_HEADER: [&str; 5] = ["method", "epsilon", "param", "rep", "p"];
pub const DENSITY_HEADER: [&str; 2] = ["x", "f"];

/// 17 significant digits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: display(path), source }
}

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv { path: display(path), source }
}

fn create_file(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    File::create(path).map_err(|e| io_err(path, e))
}

/// Pretty-printed JSON, creating parent directories.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(create_file(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Json { path: display(path), source: e })?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| io_err(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::Json { path: display(path), source: e })
}

/// Sidecar contents: format metadata plus the producing run, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar<M> {
    pub format: String,
    pub meta: M,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<serde_json::Value>,
}

fn write_sidecar<M: Serialize>(path: &Path, format: &str, meta: M, run: Option<&serde_json::Value>) -> Result<()> {
    let side = Sidecar { format: format.to_string(), meta, run: run.cloned() };
    write_json(&sidecar_path(path), &side)
}

fn read_sidecar<M: DeserializeOwned>(path: &Path, format: &str) -> Result<Sidecar<M>> {
    let side_path = sidecar_path(path);
    let raw: Sidecar<serde_json::Value> = read_json(&side_path)?;
    if raw.format != format {
        return Err(Error::Schema(format!(
            "{}: expected a '{format}' sidecar, found '{}'",
            display(&side_path),
            raw.format
        )));
    }
    let meta = serde_json::from_value(raw.meta).map_err(|e| Error::Json { path: display(&side_path), source: e })?;
    Ok(Sidecar { format: raw.format, meta, run: raw.run })
}

struct CsvOut<'a> {
    path: &'a Path,
    writer: csv::Writer<File>,
}

impl<'a> CsvOut<'a> {
    fn create(path: &'a Path, header: &[&str]) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(create_file(path)?);
        writer.write_record(header).map_err(|e| csv_err(path, e))?;
        Ok(CsvOut { path, writer })
    }

    fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|e| csv_err(self.path, e))
    }

    fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| io_err(self.path, e))
    }
}

/// Rows of a CSV whose header must equal `header` exactly.
struct CsvIn<'a> {
    path: &'a Path,
    records: Vec<csv::StringRecord>,
}

impl<'a> CsvIn<'a> {
    fn open(path: &'a Path, header: &[&str]) -> Result<Self> {
        let f = File::open(path).map_err(|e| io_err(path, e))?;
        let mut reader = csv::Reader::from_reader(BufReader::new(f));
        let found = reader.headers().map_err(|e| csv_err(path, e))?.clone();
        if found.iter().ne(header.iter().copied()) {
            return Err(Error::Schema(format!(
                "{}: expected columns {}, found {}",
                display(path),
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let records = reader.records().collect::<std::result::Result<Vec<_>, _>>().map_err(|e| csv_err(path, e))?;
        Ok(CsvIn { path, records })
    }

    fn field<'r>(&self, rec: &'r csv::StringRecord, line: usize, col: usize) -> Result<&'r str> {
        rec.get(col)
            .ok_or_else(|| Error::Schema(format!("{} row {}: missing column {}", display(self.path), line + 1, col + 1)))
    }

    fn parse<T: std::str::FromStr>(&self, rec: &csv::StringRecord, line: usize, col: usize) -> Result<T> {
        let s = self.field(rec, line, col)?;
        s.trim().parse().map_err(|_| {
            Error::Schema(format!("{} row {} column {}: cannot parse '{s}'", display(self.path), line + 1, col + 1))
        })
    }

    fn optional(&self, rec: &csv::StringRecord, line: usize, col: usize) -> Result<Option<f64>> {
        if self.field(rec, line, col)?.trim().is_empty() {
            Ok(None)
        } else {
            self.parse(rec, line, col).map(Some)
        }
    }

    fn floats<const N: usize>(&self, rec: &csv::StringRecord, line: usize, first: usize) -> Result<[f64; N]> {
        let mut out = [0.0; N];
        for (k, v) in out.iter_mut().enumerate() {
            *v = self.parse(rec, line, first + k)?;
        }
        Ok(out)
    }
}

fn method_field(input: &CsvIn, rec: &csv::StringRecord, line: usize, col: usize) -> Result<Method> {
    input.field(rec, line, col)?.parse()
}

fn param_field(input: &CsvIn, rec: &csv::StringRecord, line: usize, col: usize) -> Result<Parameter> {
    match input.field(rec, line, col)? {
        "kappa" => Ok(Parameter::Kappa),
        "lambda" => Ok(Parameter::Lambda),
        other => Err(Error::Schema(format!("{}: unknown parameter '{other}'", display(input.path)))),
    }
}

// ---------------------------------------------------------------- tracks

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackMeta {
    pub dt: f64,
    pub n_obs: usize,
}

/// `j,x,y,nj`; row 0 is the origin with `nj = -1`.
pub fn write_track(path: &Path, track: &ObservedTrack, run: Option<&serde_json::Value>) -> Result<()> {
    let mut out = CsvOut::create(path, &TRACK_HEADER)?;
    for (j, p) in track.positions.iter().enumerate() {
        let nj = if j == 0 { -1 } else { track.change_counts[j - 1] };
        out.row([j.to_string(), format_f64(p.x), format_f64(p.y), nj.to_string()])?;
    }
    out.finish()?;
    write_sidecar(path, "track", TrackMeta { dt: track.dt, n_obs: track.n_obs() }, run)
}

pub fn read_track(path: &Path) -> Result<ObservedTrack> {
    let meta: TrackMeta = read_sidecar(path, "track")?.meta;
    let input = CsvIn::open(path, &TRACK_HEADER)?;
    let mut positions = Vec::with_capacity(input.records.len());
    let mut change_counts = Vec::with_capacity(input.records.len());
    for (line, rec) in input.records.iter().enumerate() {
        let j: usize = input.parse(rec, line, 0)?;
        if j != line {
            return Err(Error::Schema(format!("{}: row {} has j = {j}", display(path), line + 1)));
        }
        let [x, y] = input.floats(rec, line, 1)?;
        positions.push(Point::new(x, y));
        if line > 0 {
            change_counts.push(input.parse(rec, line, 3)?);
        }
    }
    if positions.is_empty() {
        return Err(Error::Schema(format!("{}: empty track", display(path))));
    }
    Ok(ObservedTrack { dt: meta.dt, positions, change_counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentMeta {
    pub speed: f64,
    pub n_steps: usize,
}

/// `i,x,y,phi,t_dur,omega` for turn points `0..=N`; `t_dur` is empty on
/// the last row and `omega` on the first.
pub fn write_latent(path: &Path, latent: &LatentPath, run: Option<&serde_json::Value>) -> Result<()> {
    let mut out = CsvOut::create(path, &LATENT_HEADER)?;
    for (i, p) in latent.positions.iter().enumerate() {
        let t = latent.durations.get(i).map(|&t| format_f64(t)).unwrap_or_default();
        let w = if i == 0 { String::new() } else { format_f64(latent.turns[i - 1]) };
        out.row([i.to_string(), format_f64(p.x), format_f64(p.y), format_f64(latent.headings[i]), t, w])?;
    }
    out.finish()?;
    write_sidecar(path, "latent", LatentMeta { speed: latent.speed, n_steps: latent.n_steps() }, run)
}

pub fn read_latent(path: &Path) -> Result<LatentPath> {
    let meta: LatentMeta = read_sidecar(path, "latent")?.meta;
    let input = CsvIn::open(path, &LATENT_HEADER)?;
    let n = input.records.len();
    if n < 2 {
        return Err(Error::Schema(format!("{}: a latent path needs at least 2 rows", display(path))));
    }
    let mut latent = LatentPath {
        positions: Vec::with_capacity(n),
        headings: Vec::with_capacity(n),
        durations: Vec::with_capacity(n - 1),
        turns: Vec::with_capacity(n - 1),
        speed: meta.speed,
    };
    for (line, rec) in input.records.iter().enumerate() {
        let [x, y, phi] = input.floats(rec, line, 1)?;
        latent.positions.push(Point::new(x, y));
        latent.headings.push(phi);
        match (input.optional(rec, line, 4)?, line + 1 < n) {
            (Some(t), true) => latent.durations.push(t),
            (None, false) => {}
            _ => return Err(Error::Schema(format!("{}: row {} t_dur misplaced", display(path), line + 1))),
        }
        match (input.optional(rec, line, 5)?, line > 0) {
            (Some(w), true) => latent.turns.push(w),
            (None, false) => {}
            _ => return Err(Error::Schema(format!("{}: row {} omega misplaced", display(path), line + 1))),
        }
    }
    Ok(latent)
}

// ------------------------------------------------------------- summaries

pub fn write_summaries(path: &Path, rows: &[SummaryVector]) -> Result<()> {
    let mut out = CsvOut::create(path, &SUMMARY_HEADER)?;
    for s in rows {
        out.row(s.to_array().map(format_f64))?;
    }
    out.finish()
}

pub fn read_summaries(path: &Path) -> Result<Vec<SummaryVector>> {
    let input = CsvIn::open(path, &SUMMARY_HEADER)?;
    input.records.iter().enumerate().map(|(l, r)| Ok(SummaryVector::from_array(input.floats(r, l, 0)?))).collect()
}

// -------------------------------------------------------------- tables

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub prior: PriorSpec,
    pub sim_config: SimConfig,
    pub rows: usize,
    pub resamples: usize,
}

/// Bare `kappa,lambda,s1,s2,s3,s4` rows without a sidecar.
pub fn write_table_rows(path: &Path, params: &[[f64; 2]], summaries: &[SummaryVector]) -> Result<()> {
    let mut out = CsvOut::create(path, &TABLE_HEADER)?;
    for (p, s) in params.iter().zip(summaries) {
        let a = s.to_array();
        out.row([p[0], p[1], a[0], a[1], a[2], a[3]].map(format_f64))?;
    }
    out.finish()
}

pub fn read_table_rows(path: &Path) -> Result<(Vec<[f64; 2]>, Vec<SummaryVector>)> {
    let input = CsvIn::open(path, &TABLE_HEADER)?;
    let mut params = Vec::with_capacity(input.records.len());
    let mut summaries = Vec::with_capacity(input.records.len());
    for (line, rec) in input.records.iter().enumerate() {
        let v: [f64; 6] = input.floats(rec, line, 0)?;
        params.push([v[0], v[1]]);
        summaries.push(SummaryVector::from_array([v[2], v[3], v[4], v[5]]));
    }
    Ok((params, summaries))
}

pub fn write_table(path: &Path, table: &ReferenceTable, run: Option<&serde_json::Value>) -> Result<()> {
    write_table_rows(path, &table.params, &table.summaries)?;
    let meta = TableMeta { prior: table.prior, sim_config: table.config, rows: table.len(), resamples: table.resamples };
    write_sidecar(path, "reftable", meta, run)
}

pub fn read_table(path: &Path) -> Result<ReferenceTable> {
    let meta: TableMeta = read_sidecar(path, "reftable")?.meta;
    let (params, summaries) = read_table_rows(path)?;
    if params.len() != meta.rows {
        return Err(Error::Schema(format!(
            "{}: sidecar declares {} rows, file has {}",
            display(path),
            meta.rows,
            params.len()
        )));
    }
    let table = ReferenceTable { prior: meta.prior, config: meta.sim_config, params, summaries, resamples: meta.resamples };
    table.validate()?;
    Ok(table)
}

// ------------------------------------------------------------ posteriors

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorMeta {
    pub method: Method,
    pub epsilon: f64,
    pub delta: f64,
    pub projected: usize,
}

pub fn write_posterior(path: &Path, post: &WeightedPosterior, run: Option<&serde_json::Value>) -> Result<()> {
    let mut out = CsvOut::create(path, &POSTERIOR_HEADER)?;
    for (d, &w) in post.draws.iter().zip(&post.weights) {
        out.row([d[0], d[1], w].map(format_f64))?;
    }
    out.finish()?;
    let meta = PosteriorMeta { method: post.method, epsilon: post.epsilon, delta: post.delta, projected: post.projected };
    write_sidecar(path, "posterior", meta, run)
}

pub fn read_posterior(path: &Path) -> Result<WeightedPosterior> {
    let meta: PosteriorMeta = read_sidecar(path, "posterior")?.meta;
    let input = CsvIn::open(path, &POSTERIOR_HEADER)?;
    let mut draws = Vec::with_capacity(input.records.len());
    let mut weights = Vec::with_capacity(input.records.len());
    for (line, rec) in input.records.iter().enumerate() {
        let [k, l, w] = input.floats(rec, line, 0)?;
        draws.push([k, l]);
        weights.push(w);
    }
    Ok(WeightedPosterior {
        draws,
        weights,
        method: meta.method,
        epsilon: meta.epsilon,
        delta: meta.delta,
        projected: meta.projected,
    })
}

// --------------------------------------------------------------- reports

/// One line of the cross-validation CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossvalRow {
    pub method: Method,
    pub epsilon: f64,
    pub rep: usize,
    pub param: Parameter,
    pub truth: f64,
    pub median: f64,
    pub hpd_lo: f64,
    pub hpd_hi: f64,
}

impl From<&ReplicateRecord> for CrossvalRow {
    fn from(r: &ReplicateRecord) -> Self {
        CrossvalRow {
            method: r.method,
            epsilon: r.epsilon,
            rep: r.rep,
            param: r.param,
            truth: r.truth,
            median: r.median,
            hpd_lo: r.hpd_lo,
            hpd_hi: r.hpd_hi,
        }
    }
}

pub fn write_crossval<'a>(path: &Path, rows: impl IntoIterator<Item = &'a ReplicateRecord>) -> Result<()> {
    let mut out = CsvOut::create(path, &CROSSVAL_HEADER)?;
    for r in rows {
        out.row([
            r.method.name().to_string(),
            format_f64(r.epsilon),
            r.rep.to_string(),
            r.param.name().to_string(),
            format_f64(r.truth),
            format_f64(r.median),
            format_f64(r.hpd_lo),
            format_f64(r.hpd_hi),
        ])?;
    }
    out.finish()
}

pub fn read_crossval(path: &Path) -> Result<Vec<CrossvalRow>> {
    let input = CsvIn::open(path, &CROSSVAL_HEADER)?;
    input
        .records
        .iter()
        .enumerate()
        .map(|(l, r)| {
            let [truth, median, hpd_lo, hpd_hi] = input.floats(r, l, 4)?;
            Ok(CrossvalRow {
                method: method_field(&input, r, l, 0)?,
                epsilon: input.parse(r, l, 1)?,
                rep: input.parse(r, l, 2)?,
                param: param_field(&input, r, l, 3)?,
                truth,
                median,
                hpd_lo,
                hpd_hi,
            })
        })
        .collect()
}

pub fn write_rscan<'a>(path: &Path, rows: impl IntoIterator<Item = &'a RScanRecord>) -> Result<()> {
    let mut out = CsvOut::create(path, &RSCAN_HEADER)?;
    for r in rows {
        out.row([
            r.method.name().to_string(),
            format_f64(r.r),
            format_f64(r.kappa_true),
            r.rep.to_string(),
            r.param.name().to_string(),
            format_f64(r.truth),
            format_f64(r.median),
        ])?;
    }
    out.finish()
}

pub fn read_rscan(path: &Path) -> Result<Vec<RScanRecord>> {
    let input = CsvIn::open(path, &RSCAN_HEADER)?;
    input
        .records
        .iter()
        .enumerate()
        .map(|(l, r)| {
            Ok(RScanRecord {
                method: method_field(&input, r, l, 0)?,
                r: input.parse(r, l, 1)?,
                kappa_true: input.parse(r, l, 2)?,
                rep: input.parse(r, l, 3)?,
                param: param_field(&input, r, l, 4)?,
                truth: input.parse(r, l, 5)?,
                median: input.parse(r, l, 6)?,
            })
        })
        .collect()
}

/// One line of the coverage CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub method: Method,
    pub epsilon: f64,
    pub param: Parameter,
    pub rep: usize,
    pub p: f64,
}

pub fn coverage_rows(report: &CoverageReport) -> Vec<CoverageRow> {
    report
        .entries
        .iter()
        .flat_map(|e| {
            e.p_values.iter().enumerate().map(|(rep, &p)| CoverageRow {
                method: e.method,
                epsilon: e.epsilon,
                param: e.param,
                rep,
                p,
            })
        })
        .collect()
}

pub fn write_coverage(path: &Path, rows: &[CoverageRow]) -> Result<()> {
    let mut out = CsvOut::create(path, &COVERAGE_HEADER)?;
    for r in rows {
        out.row([
            r.method.name().to_string(),
            format_f64(r.epsilon),
            r.param.name().to_string(),
            r.rep.to_string(),
            format_f64(r.p),
        ])?;
    }
    out.finish()
}

pub fn read_coverage(path: &Path) -> Result<Vec<CoverageRow>> {
    let input = CsvIn::open(path, &COVERAGE_HEADER)?;
    input
        .records
        .iter()
        .enumerate()
        .map(|(l, r)| {
            Ok(CoverageRow {
                method: method_field(&input, r, l, 0)?,
                epsilon: input.parse(r, l, 1)?,
                param: param_field(&input, r, l, 2)?,
                rep: input.parse(r, l, 3)?,
                p: input.parse(r, l, 4)?,
            })
        })
        .collect()
}

// --------------------------------------------------------------- density

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMeta {
    /// Which density and its arguments.
    pub params: serde_json::Value,
    pub support: (f64, f64),
    pub layout: NodeLayout,
    /// Integrated mass over the support.
    pub mass: f64,
    /// Normalization tolerance the grid was checked against.
    pub tolerance: f64,
    pub cdf: Vec<f64>,
}

pub fn write_density_grid(
    path: &Path,
    grid: &DensityGrid,
    params: serde_json::Value,
    tolerance: f64,
    run: Option<&serde_json::Value>,
) -> Result<()> {
    let mut out = CsvOut::create(path, &DENSITY_HEADER)?;
    for (x, f) in grid.x.iter().zip(&grid.f) {
        out.row([format_f64(*x), format_f64(*f)])?;
    }
    out.finish()?;
    let meta = DensityMeta {
        params,
        support: grid.support,
        layout: grid.layout,
        mass: grid.mass,
        tolerance,
        cdf: grid.cdf.clone(),
    };
    write_sidecar(path, "density", meta, run)
}

pub fn read_density_grid(path: &Path) -> Result<(DensityGrid, DensityMeta)> {
    let meta: DensityMeta = read_sidecar(path, "density")?.meta;
    let input = CsvIn::open(path, &DENSITY_HEADER)?;
    let mut x = Vec::with_capacity(input.records.len());
    let mut f = Vec::with_capacity(input.records.len());
    for (line, rec) in input.records.iter().enumerate() {
        let [a, b] = input.floats(rec, line, 0)?;
        x.push(a);
        f.push(b);
    }
    if meta.cdf.len() != x.len() {
        return Err(Error::Schema(format!("{}: CDF length does not match the grid", display(path))));
    }
    let grid = DensityGrid { support: meta.support, layout: meta.layout, x, f, cdf: meta.cdf.clone(), mass: meta.mass };
    Ok((grid, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0] {
            let s = format_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn header_mismatch_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(&p, "s1,s2,s3\n1,2,3\n").unwrap();
        assert!(matches!(read_summaries(&p), Err(Error::Schema(_))));
    }
}
