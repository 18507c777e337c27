//! Run manifests: a key=value record of what a run read, resolved and wrote.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pairmine::files::write_atomic;
use pairmine::{kv, Error, Result};
use sha2::{Digest, Sha256};

pub struct Manifest {
    subcommand: &'static str,
    started: Instant,
    config: Vec<(String, String)>,
    inputs: Vec<(String, PathBuf)>,
    outputs: Vec<(String, PathBuf)>,
}

impl Manifest {
    pub fn new(subcommand: &'static str) -> Self {
        Manifest {
            subcommand,
            started: Instant::now(),
            config: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn config(&mut self, key: &str, value: impl ToString) {
        self.config.push((key.to_string(), value.to_string()));
    }

    /// Records every `key=value` line of a resolved configuration.
    pub fn config_text(&mut self, text: &str) -> Result<()> {
        for (k, v) in kv::parse(text)? {
            self.config(&k, v);
        }
        Ok(())
    }

    pub fn input(&mut self, role: &str, path: &Path) {
        self.inputs.push((role.to_string(), path.to_path_buf()));
    }

    pub fn output(&mut self, role: &str, path: &Path) {
        self.outputs.push((role.to_string(), path.to_path_buf()));
    }

    /// Hashes the inputs and writes `<primary>.manifest` atomically.
    pub fn write(self, primary: &Path) -> Result<PathBuf> {
        let mut lines = vec![("subcommand".to_string(), self.subcommand.to_string())];
        for (k, v) in &self.config {
            lines.push((format!("config.{k}"), v.clone()));
        }
        for (role, path) in &self.inputs {
            lines.push((format!("input.{role}"), path.display().to_string()));
            lines.push((format!("input.{role}.sha256"), sha256_file(path)?));
        }
        for (role, path) in &self.outputs {
            lines.push((format!("output.{role}"), path.display().to_string()));
        }
        lines.push((
            "wall_clock_secs".to_string(),
            format!("{:.3}", self.started.elapsed().as_secs_f64()),
        ));
        let text = kv::format(lines.iter().map(|(k, v)| (k.as_str(), v.clone())));
        let mut path = primary.as_os_str().to_owned();
        path.push(".manifest");
        let path = PathBuf::from(path);
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::Io { path: path.into(), source: e })?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}
