//! CSV tables, run manifests and atomic file writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// One CSV cell. Floats use the shortest representation that round-trips.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    F(f64),
    U(u64),
    B(bool),
    S(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::U(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::B(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::S(x.to_owned())
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => format!("{x:?}"),
            Cell::U(x) => x.to_string(),
            Cell::B(x) => x.to_string(),
            Cell::S(x) => x.clone(),
        }
    }
}

/// Header plus rows, written in one go.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width does not match header");
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.into_inner().context("flushing csv buffer")
    }
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path
        .file_name()
        .context("output path has no file name")?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputChecksum {
    pub file: String,
    pub sha256: String,
}

/// Provenance record written next to every data file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub master_seed: u64,
    pub wall_time_s: f64,
    pub n_diverged: u64,
    pub valid: bool,
    /// Free-form results such as a verdict or a scalar estimate.
    #[serde(default)]
    pub summary: toml::Table,
    pub outputs: Vec<OutputChecksum>,
    pub config: RunConfig,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig, master_seed: u64) -> Self {
        Self {
            command: command.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            master_seed,
            wall_time_s: 0.0,
            n_diverged: 0,
            valid: true,
            summary: toml::Table::new(),
            outputs: Vec::new(),
            config: config.clone(),
        }
    }

    pub fn note(&mut self, key: &str, value: impl Into<toml::Value>) {
        self.summary.insert(key.to_owned(), value.into());
    }
}

/// Collects the files of one run and writes them with their manifest.
pub struct RunWriter {
    dir: PathBuf,
    stem: String,
    pub manifest: RunManifest,
    written: Vec<PathBuf>,
}

impl RunWriter {
    pub fn new(dir: &Path, stem: &str, manifest: RunManifest) -> Self {
        Self {
            dir: dir.to_path_buf(),
            stem: stem.to_owned(),
            manifest,
            written: Vec::new(),
        }
    }

    /// Writes `<dir>/<stem><suffix>.csv`.
    pub fn table(&mut self, suffix: &str, table: &Table) -> Result<PathBuf> {
        let file = format!("{}{suffix}.csv", self.stem);
        let path = self.dir.join(&file);
        let bytes = table.to_bytes()?;
        write_atomic(&path, &bytes)?;
        self.manifest.outputs.push(OutputChecksum {
            file,
            sha256: sha256_hex(&bytes),
        });
        self.written.push(path.clone());
        Ok(path)
    }

    /// Writes `<dir>/<stem>.manifest.toml` and returns every path written.
    pub fn finish(mut self, wall_time_s: f64) -> Result<RunOutputs> {
        self.manifest.wall_time_s = wall_time_s;
        let path = self.dir.join(format!("{}.manifest.toml", self.stem));
        let text = toml::to_string(&self.manifest).context("serializing manifest")?;
        write_atomic(&path, text.as_bytes())?;
        Ok(RunOutputs {
            data: self.written,
            manifest_path: path,
            manifest: self.manifest,
        })
    }
}

#[derive(Clone, Debug)]
pub struct RunOutputs {
    pub data: Vec<PathBuf>,
    pub manifest_path: PathBuf,
    pub manifest: RunManifest,
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).context("parsing manifest")
}
