//! Artifact writer. Every artifact carries the config hash; wall-clock data
//! goes only to the `metadata.json` sidecar so reruns stay byte-identical.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Format};

pub struct Artifacts {
    dir: PathBuf,
    hash: String,
    formats: Vec<Format>,
    written: Vec<String>,
    started: u64,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl Artifacts {
    pub fn create(dir: &Path, config: &ExperimentConfig) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            hash: config.hash(),
            formats: config.output.formats.clone(),
            written: Vec::new(),
            started: unix_now(),
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// CSV with a leading `# config_hash=` comment line.
    pub fn csv(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut Vec<u8>) -> stochwave::Result<()>,
    ) -> stochwave::Result<()> {
        if !self.formats.contains(&Format::Csv) {
            return Ok(());
        }
        let mut buf = format!("# config_hash={}\n", self.hash).into_bytes();
        body(&mut buf)?;
        Ok(self.put(name, &buf)?)
    }

    pub fn json(&mut self, name: &str, report: Value) -> io::Result<()> {
        if !self.formats.contains(&Format::Json) {
            return Ok(());
        }
        let doc = json!({ "config_hash": self.hash, "report": report });
        let mut buf = serde_json::to_vec_pretty(&doc).map_err(io::Error::other)?;
        buf.push(b'\n');
        self.put(name, &buf)
    }

    /// Binary payload behind a `config_hash=<hex>\n` header line.
    pub fn binary(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut Vec<u8>) -> stochwave::Result<()>,
    ) -> stochwave::Result<()> {
        if !self.formats.contains(&Format::Binary) {
            return Ok(());
        }
        let mut buf = format!("config_hash={}\n", self.hash).into_bytes();
        body(&mut buf)?;
        Ok(self.put(name, &buf)?)
    }

    /// Writes the sidecar. `status` is `passed`, `failed` or `partial`.
    pub fn finish(&self, subcommand: &str, status: &str, threads: usize) -> io::Result<()> {
        let meta = json!({
            "config_hash": self.hash,
            "subcommand": subcommand,
            "status": status,
            "version": env!("CARGO_PKG_VERSION"),
            "threads": threads,
            "started_unix": self.started,
            "finished_unix": unix_now(),
            "artifacts": self.written,
        });
        let mut f = fs::File::create(self.dir.join("metadata.json"))?;
        serde_json::to_writer_pretty(&mut f, &meta).map_err(io::Error::other)?;
        f.write_all(b"\n")
    }
}
