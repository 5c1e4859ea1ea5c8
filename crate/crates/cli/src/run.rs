//! Run records, artifact bookkeeping and the append-only manifest.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{io_error, CliError, CliResult};

pub const MANIFEST: &str = "manifest.jsonl";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_digest(path: &Path) -> CliResult<String> {
    std::fs::read(path).map(|b| sha256_hex(&b)).map_err(|e| io_error(path, e))
}

/// Load command parameters from a JSON file. The file may hold the
/// parameters themselves, a run record `{command, seed, params}`, or any
/// sidecar carrying such a record under `run`. Returns the parameters and
/// the seed stored alongside them, if any.
pub fn load_params<P: DeserializeOwned>(path: &Path, command: &str) -> CliResult<(P, Option<u64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut v: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    if let Some(run) = v.get_mut("run").map(Value::take) {
        v = run;
    }
    let mut seed = None;
    if let Some(found) = v.get("command").and_then(Value::as_str) {
        if found != command {
            return Err(CliError::Validation(format!(
                "{} was written by `{found}`, not `{command}`",
                path.display()
            )));
        }
        seed = v.get("seed").and_then(Value::as_u64);
        v = v.get_mut("params").map(Value::take).unwrap_or(Value::Null);
    }
    let params = serde_json::from_value(v).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok((params, seed))
}

/// One invocation: where it writes, how it runs, and what it has written.
pub struct Run {
    pub command: &'static str,
    pub gnuplot: bool,
    out: PathBuf,
    record: Value,
    config_digest: String,
    started: Instant,
    artifacts: Vec<PathBuf>,
}

impl Run {
    pub fn new<P: Serialize>(command: &'static str, out: PathBuf, seed: u64, params: &P, gnuplot: bool) -> CliResult<Self> {
        let record = json!({ "command": command, "seed": seed, "params": params });
        let config_digest = sha256_hex(&serde_json::to_vec(&record)?);
        std::fs::create_dir_all(&out).map_err(|e| io_error(&out, e))?;
        Ok(Run { command, gnuplot, out, record, config_digest, started: Instant::now(), artifacts: Vec::new() })
    }

    /// The record stored in every sidecar. The worker count is left out on
    /// purpose: it never changes an output.
    pub fn record(&self) -> &Value {
        &self.record
    }

    pub fn config_digest(&self) -> &str {
        &self.config_digest
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Register a written file and its JSON sidecar, if it has one.
    pub fn wrote(&mut self, path: PathBuf) {
        let sidecar = path.with_extension("json");
        let has_sidecar = sidecar != path && sidecar.exists();
        self.artifacts.push(path);
        if has_sidecar {
            self.artifacts.push(sidecar);
        }
    }

    /// Write `{run, <key>: value}` as a standalone JSON artifact.
    pub fn write_report<T: Serialize>(&mut self, name: &str, key: &str, value: &T) -> CliResult<PathBuf> {
        let path = self.path(name);
        let body = json!({ "run": self.record, key: value });
        stepturn::io::write_json(&path, &body)?;
        self.artifacts.push(path.clone());
        Ok(path)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> CliResult<PathBuf> {
        let path = self.path(name);
        std::fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        self.artifacts.push(path.clone());
        Ok(path)
    }

    /// Gnuplot script text, only when `--gnuplot` was given.
    pub fn gnuplot_script(&mut self, name: &str, script: impl FnOnce() -> String) -> CliResult<()> {
        if self.gnuplot {
            self.write_text(name, &script())?;
        }
        Ok(())
    }

    /// Append one manifest line per artifact.
    pub fn finish(self) -> CliResult<()> {
        let manifest = self.out.join(MANIFEST);
        let duration = self.started.elapsed().as_secs_f64();
        let mut lines = String::new();
        for path in &self.artifacts {
            let rel = path.strip_prefix(&self.out).unwrap_or(path);
            let line = json!({
                "path": rel.to_string_lossy(),
                "sha256": file_digest(path)?,
                "command": self.command,
                "config_sha256": self.config_digest,
                "duration_s": duration,
            });
            lines.push_str(&line.to_string());
            lines.push('\n');
        }
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&manifest)
            .map_err(|e| io_error(&manifest, e))?;
        f.write_all(lines.as_bytes()).map_err(|e| io_error(&manifest, e))
    }
}
