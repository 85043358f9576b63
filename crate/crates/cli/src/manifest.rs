//! Run manifests: written before any work starts and updated when the run ends.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::settings::to_config_text;

pub const MANIFEST: &str = "manifest.json";
pub const RUN_CONF: &str = "run.conf";

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    status: &'a str,
    /// Every resolved setting, defaults included.
    params: &'a serde_json::Value,
    /// Seed streams are derived from `params.seed` with per-component tags.
    seed_derivation: &'static str,
    outputs: &'a [String],
    wall_time_s: Option<f64>,
}

pub struct Run {
    out: PathBuf,
    command: &'static str,
    params: serde_json::Value,
    outputs: Vec<String>,
    start: Instant,
}

impl Run {
    /// Create the output directory and write the manifest plus a `run.conf`
    /// that repeats the run through `--config`.
    pub fn start<P: Serialize>(
        out: &Path,
        command: &'static str,
        params: &P,
        outputs: Vec<String>,
    ) -> CliResult<Self> {
        std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        let run = Self {
            out: out.to_path_buf(),
            command,
            params: serde_json::to_value(params).map_err(mvgsa::Error::from)?,
            outputs,
            start: Instant::now(),
        };
        run.write("running", None)?;
        let conf = run.path(RUN_CONF);
        std::fs::write(&conf, to_config_text(params)?).map_err(|e| CliError::io(&conf, e))?;
        Ok(run)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&self, status: &str, wall: Option<f64>) -> CliResult<()> {
        let m = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            status,
            params: &self.params,
            seed_derivation: "component seed = splitmix64(seed ^ fnv1a(tag)); indexed member = splitmix64(component seed ^ splitmix64(index))",
            outputs: &self.outputs,
            wall_time_s: wall,
        };
        let path = self.path(MANIFEST);
        let text = serde_json::to_string_pretty(&m).map_err(mvgsa::Error::from)?;
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }

    pub fn finish<T>(&self, result: &CliResult<T>) -> CliResult<()> {
        let wall = Some(self.start.elapsed().as_secs_f64());
        match result {
            Ok(_) => self.write("complete", wall),
            Err(e) => self.write(&format!("failed: {e}"), wall),
        }
    }
}
