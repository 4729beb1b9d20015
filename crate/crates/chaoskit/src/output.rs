//! The single writer every command funnels its files through.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::OutputConfig;

pub struct OutputDir {
    path: PathBuf,
    csv: bool,
    json: bool,
    binary: bool,
    written: Vec<String>,
}

impl OutputDir {
    /// Creates `<root>/<command>/<timestamp>/`. The timestamp has
    /// microsecond resolution; a numeric suffix separates collisions.
    pub fn create(root: &Path, command: &str, formats: &OutputConfig) -> Result<Self> {
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.6fZ").to_string();
        let base = root.join(command);
        let mut path = base.join(&stamp);
        let mut k = 1;
        while path.exists() {
            path = base.join(format!("{stamp}-{k}"));
            k += 1;
        }
        fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Self {
            path,
            csv: formats.csv,
            json: formats.json,
            binary: formats.binary,
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }

    pub fn binary_enabled(&self) -> bool {
        self.binary
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.path.join(name);
        fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn csv(&mut self, name: &str, bytes: Result<Vec<u8>>) -> Result<()> {
        if self.csv {
            self.write_bytes(name, &bytes?)?;
        }
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        if self.json {
            let mut s = serde_json::to_vec_pretty(value)?;
            s.push(b'\n');
            self.write_bytes(name, &s)?;
        }
        Ok(())
    }

    pub fn binary(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        if self.binary {
            self.write_bytes(name, bytes)?;
        }
        Ok(())
    }

    /// Markdown and other text written regardless of format flags.
    pub fn text(&mut self, name: &str, text: &str) -> Result<()> {
        self.write_bytes(name, text.as_bytes())
    }
}
