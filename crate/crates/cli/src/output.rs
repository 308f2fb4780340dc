//! Artifact writers. Every JSON document and CSV row carries the config hash
//! and the code version; plot-data files carry them in their header.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub const OUTPUT_SCHEMA_VERSION: u32 = 1;
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    config_hash: &'a str,
    code_version: &'a str,
    command: &'a str,
    data: &'a T,
}

pub struct Artifacts {
    dir: PathBuf,
    hash: String,
    command: String,
    written: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path, hash: &str, command: &str) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(CliError::io)?;
        Ok(Self { dir: dir.to_path_buf(), hash: hash.into(), command: command.into(), written: Vec::new() })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Relative names of the files written so far, in order.
    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn path(&mut self, name: &str) -> Result<PathBuf, CliError> {
        let p = self.dir.join(name);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(CliError::io)?;
        }
        self.written.push(name.into());
        Ok(p)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, data: &T) -> Result<(), CliError> {
        let env = Envelope {
            schema_version: OUTPUT_SCHEMA_VERSION,
            config_hash: &self.hash,
            code_version: CODE_VERSION,
            command: &self.command,
            data,
        };
        let mut text = serde_json::to_string_pretty(&env).map_err(|e| CliError::config(e.to_string()))?;
        text.push('\n');
        let p = self.path(name)?;
        std::fs::write(p, text).map_err(CliError::io)
    }

    /// Table with `config_hash,code_version` prepended to every row.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let p = self.path(name)?;
        let mut w = csv::Writer::from_path(p).map_err(|e| CliError::config(e.to_string()))?;
        let mut full = vec!["config_hash", "code_version"];
        full.extend_from_slice(header);
        let err = |e: csv::Error| CliError::config(e.to_string());
        w.write_record(&full).map_err(err)?;
        for r in rows {
            let mut rec = vec![self.hash.clone(), CODE_VERSION.to_string()];
            rec.extend(r.iter().cloned());
            w.write_record(&rec).map_err(err)?;
        }
        w.flush().map_err(CliError::io)
    }

    /// Whitespace-separated `x y` columns under a commented header.
    pub fn plot(&mut self, name: &str, x: &str, y: &str, points: &[(f64, f64)]) -> Result<(), CliError> {
        let mut s = format!(
            "# schema_version={OUTPUT_SCHEMA_VERSION} config_hash={} code_version={CODE_VERSION}\n# x={x} y={y}\n",
            self.hash
        );
        for (a, b) in points {
            s.push_str(&format!("{a:e} {b:e}\n"));
        }
        let p = self.path(name)?;
        std::fs::write(p, s).map_err(CliError::io)
    }

    pub fn raw(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let p = self.path(name)?;
        std::fs::write(p, bytes).map_err(CliError::io)
    }
}

pub fn num(v: f64) -> String {
    format!("{v:e}")
}

/// File-name-safe form of a metric name.
pub fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}
