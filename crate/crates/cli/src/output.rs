//! Artifact formats and crash-safe writing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hardy_lt::levels::MinMaxLevels;
use hardy_lt::scf::TraceEntry;
use hardy_lt::{LogGrid, RadialPotential};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const TOOL: &str = "hardy-lt";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    std::fs::write(&tmp, bytes).map_err(CliError::io(&tmp))?;
    std::fs::rename(&tmp, path).map_err(CliError::io(path))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Collects written files for the manifest inventory.
#[derive(Debug)]
pub struct ArtifactWriter {
    pub dir: PathBuf,
    pub files: Vec<FileEntry>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> CliResult<Self> {
        crate::config::ensure_dir(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.files.retain(|f| f.name != name);
        self.files.push(FileEntry { name: name.to_string(), bytes: bytes.len(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
        self.write(name, format!("{text}\n").as_bytes())
    }

    /// Writes `manifest.json` last; a directory without it is an incomplete run.
    pub fn finish(mut self, manifest: Manifest) -> CliResult<()> {
        let manifest = Manifest { files: std::mem::take(&mut self.files), ..manifest };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Internal(e.to_string()))?;
        write_atomic(&self.dir.join("manifest.json"), format!("{text}\n").as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub started: String,
    pub finished: String,
    /// SHA-256 of every input read (config file, potential file).
    pub inputs: BTreeMap<String, String>,
    pub summary: serde_json::Value,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig, started: String, inputs: BTreeMap<String, String>, summary: serde_json::Value) -> Self {
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            config: config.clone(),
            started,
            finished: now(),
            inputs,
            summary,
            files: Vec::new(),
        }
    }

    pub fn read(dir: &Path) -> CliResult<Self> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::MissingInput(path.clone()),
            _ => CliError::Io { path: path.clone(), source: e },
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub fn potential_csv(v: &RadialPotential) -> String {
    let g = v.grid();
    let mut out = String::from("t,r,V\n");
    for (j, x) in v.values().iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", num(g.t(j)), num(g.r(j)), num(*x)));
    }
    out
}

/// Reads a `t,r,V` file written by [`potential_csv`]; the `t` column must be
/// uniformly spaced.
pub fn read_potential_csv(path: &Path) -> CliResult<(RadialPotential, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::MissingInput(path.to_path_buf()),
        _ => CliError::Io { path: path.to_path_buf(), source: e },
    })?;
    let bad = |m: String| CliError::Usage(format!("{}: {m}", path.display()));
    let text = std::str::from_utf8(&bytes).map_err(|_| bad("not UTF-8".into()))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').map(str::trim).collect();
    if header != ["t", "r", "V"] {
        return Err(bad("expected header `t,r,V`".into()));
    }
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for (i, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(bad(format!("row {}: expected 3 columns", i + 1)));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("row {}: cannot parse `{s}`", i + 1)));
        ts.push(parse(cols[0])?);
        vs.push(parse(cols[2])?);
    }
    if ts.len() < 2 {
        return Err(bad("needs at least two rows".into()));
    }
    let grid = LogGrid::new(ts[0], ts[ts.len() - 1], ts.len())?;
    let scale = grid.h().abs().max(1.0);
    if let Some(j) = (0..ts.len()).find(|&j| (ts[j] - grid.t(j)).abs() > 1e-9 * scale) {
        return Err(bad(format!("t column is not uniform at row {}", j + 1)));
    }
    Ok((RadialPotential::new(grid, vs)?, bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub lambda: f64,
    pub ell: usize,
    pub index: usize,
    pub multiplicity_slot: usize,
}

/// Occupied negative levels with their channel labels; padding zeros are omitted.
pub fn level_records(levels: &MinMaxLevels) -> Vec<LevelRecord> {
    levels
        .levels
        .iter()
        .zip(&levels.tags)
        .filter_map(|(&lambda, tag)| {
            tag.map(|t| LevelRecord { lambda, ell: t.ell, index: t.index, multiplicity_slot: t.slot })
        })
        .collect()
}

pub fn trace_csv(trace: &[TraceEntry]) -> String {
    let mut out = String::from("iteration,objective,residual,alpha\n");
    for e in trace {
        out.push_str(&format!("{},{},{},{}\n", e.iteration, num(e.objective), num(e.residual), num(e.alpha)));
    }
    out
}
