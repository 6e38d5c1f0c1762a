//! Run configuration: defaults, an optional `key = value` file, then
//! command-line flags, each layer overriding the previous one.
//!
//! File grammar, one entry per line:
//!
//! ```text
//! # comment            blank lines and lines starting with '#' are ignored
//! key = value          surrounding whitespace is trimmed
//! ```
//!
//! Keys are those of the command-line flags without the leading dashes;
//! `-` and `_` are interchangeable (`max-iters` = `max_iters`). A key may
//! appear once per file, and unknown keys are rejected. List-valued keys
//! (`s`, `N`, `c`) take comma-separated values; only `sweep` accepts more
//! than one. `c` accepts a number or `critical`, and `grid` is
//! `t_min,t_max,n`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use hardy_lt::{hardy_constant, LogGrid, ProblemParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const KEYS: [&str; 13] =
    ["d", "s", "N", "c", "grid", "out", "seed", "max_iters", "tol_obj", "tol_res", "workers", "starts", "jitter"];

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Configuration file with `key = value` lines.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Dimension (at least 3).
    #[arg(long)]
    pub d: Option<String>,
    /// Exponent s > 0; comma-separated list for sweep.
    #[arg(long)]
    pub s: Option<String>,
    /// Rank N >= 1; comma-separated list for sweep.
    #[arg(long = "N", id = "N")]
    pub rank: Option<String>,
    /// Coupling in [0, (d-2)^2/4] or `critical`; comma-separated list for sweep.
    #[arg(long)]
    pub c: Option<String>,
    /// Log grid `t_min,t_max,n` with r = e^t.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
    /// Seed for the multistart jitter.
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long = "max-iters")]
    pub max_iters: Option<String>,
    /// Relative objective change at convergence.
    #[arg(long = "tol-obj")]
    pub tol_obj: Option<String>,
    /// EL residual at convergence.
    #[arg(long = "tol-res")]
    pub tol_res: Option<String>,
    /// Worker threads, 0 for one per core.
    #[arg(long)]
    pub workers: Option<String>,
    /// Number of initial bumps tried (1 to 9).
    #[arg(long)]
    pub starts: Option<String>,
    /// Amplitude of the random shift applied to the bump centers.
    #[arg(long)]
    pub jitter: Option<String>,
}

impl RunArgs {
    fn pairs(&self) -> Vec<(&'static str, Option<&String>)> {
        vec![
            ("d", self.d.as_ref()),
            ("s", self.s.as_ref()),
            ("N", self.rank.as_ref()),
            ("c", self.c.as_ref()),
            ("grid", self.grid.as_ref()),
            ("out", self.out.as_ref()),
            ("seed", self.seed.as_ref()),
            ("max_iters", self.max_iters.as_ref()),
            ("tol_obj", self.tol_obj.as_ref()),
            ("tol_res", self.tol_res.as_ref()),
            ("workers", self.workers.as_ref()),
            ("starts", self.starts.as_ref()),
            ("jitter", self.jitter.as_ref()),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coupling {
    Value(f64),
    Symbol(CriticalSymbol),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticalSymbol {
    Critical,
}

impl Coupling {
    pub fn resolve(self, d: usize) -> CliResult<f64> {
        match self {
            Coupling::Value(c) => Ok(c),
            Coupling::Symbol(_) => Ok(hardy_constant(d)?),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn build(&self) -> CliResult<LogGrid> {
        Ok(LogGrid::new(self.t_min, self.t_max, self.n)?)
    }
}

/// Fully resolved configuration, recorded verbatim in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub d: usize,
    pub s: Vec<f64>,
    #[serde(rename = "N")]
    pub rank: Vec<usize>,
    pub c: Vec<Coupling>,
    pub grid: GridSpec,
    /// The grid came from the file or the command line rather than defaults.
    pub grid_explicit: bool,
    pub out: PathBuf,
    pub seed: u64,
    pub max_iters: usize,
    pub tol_obj: f64,
    pub tol_res: f64,
    pub workers: usize,
    pub starts: usize,
    pub jitter: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            d: 3,
            s: vec![1.0],
            rank: vec![1],
            c: vec![Coupling::Symbol(CriticalSymbol::Critical)],
            grid: GridSpec { t_min: -12.0, t_max: 6.0, n: 1801 },
            grid_explicit: false,
            out: PathBuf::from("hardy-run"),
            seed: 0,
            max_iters: 500,
            tol_obj: 1e-10,
            tol_res: 1e-6,
            workers: 0,
            starts: 9,
            jitter: 0.0,
        }
    }
}

fn canonical_key(raw: &str) -> Option<&'static str> {
    let k = raw.trim().replace('-', "_");
    KEYS.iter().copied().find(|known| *known == k)
}

/// Parses the `key = value` grammar described in the module docs.
pub fn parse_config_text(text: &str) -> CliResult<BTreeMap<&'static str, String>> {
    let mut out = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", no + 1)))?;
        let key = canonical_key(key)
            .ok_or_else(|| CliError::Usage(format!("config line {}: unknown key `{}`", no + 1, key.trim())))?;
        if out.insert(key, value.trim().to_string()).is_some() {
            return Err(CliError::Usage(format!("config line {}: duplicate key `{key}`", no + 1)));
        }
    }
    Ok(out)
}

fn parse_one<T: std::str::FromStr>(key: &str, v: &str) -> CliResult<T> {
    v.trim().parse().map_err(|_| CliError::Usage(format!("{key}: cannot parse `{v}`")))
}

fn split_list<'a>(key: &str, v: &'a str) -> CliResult<Vec<&'a str>> {
    if v.trim().is_empty() {
        return Err(CliError::Usage(format!("{key}: empty list")));
    }
    let items: Vec<&str> = v.split(',').map(str::trim).collect();
    if items.iter().any(|x| x.is_empty()) {
        return Err(CliError::Usage(format!("{key}: empty entry in `{v}`")));
    }
    Ok(items)
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> CliResult<Vec<T>> {
    split_list(key, v)?.iter().map(|x| parse_one(key, x)).collect()
}

fn parse_coupling(v: &str) -> CliResult<Coupling> {
    if v.eq_ignore_ascii_case("critical") {
        Ok(Coupling::Symbol(CriticalSymbol::Critical))
    } else {
        parse_one("c", v).map(Coupling::Value)
    }
}

fn parse_grid(v: &str) -> CliResult<GridSpec> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!("grid: expected `t_min,t_max,n`, got `{v}`")));
    }
    Ok(GridSpec { t_min: parse_one("grid", parts[0])?, t_max: parse_one("grid", parts[1])?, n: parse_one("grid", parts[2])? })
}

impl RunConfig {
    /// Defaults, then the file named by `--config`, then the flags.
    pub fn resolve(args: &RunArgs) -> CliResult<(Self, Option<String>)> {
        let mut layered: BTreeMap<&'static str, String> = BTreeMap::new();
        let mut file_text = None;
        if let Some(path) = &args.config {
            let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => CliError::MissingInput(path.clone()),
                _ => CliError::Io { path: path.clone(), source: e },
            })?;
            layered.extend(parse_config_text(&text)?);
            file_text = Some(text);
        }
        for (key, value) in args.pairs() {
            if let Some(v) = value {
                layered.insert(key, v.clone());
            }
        }
        let cfg = Self::from_map(&layered)?;
        cfg.validate()?;
        Ok((cfg, file_text))
    }

    pub fn from_map(map: &BTreeMap<&'static str, String>) -> CliResult<Self> {
        let mut cfg = Self::default();
        for (&key, v) in map {
            match key {
                "d" => cfg.d = parse_one(key, v)?,
                "s" => cfg.s = parse_list(key, v)?,
                "N" => cfg.rank = parse_list(key, v)?,
                "c" => {
                    cfg.c = split_list(key, v)?.into_iter().map(parse_coupling).collect::<CliResult<_>>()?;
                }
                "grid" => {
                    cfg.grid = parse_grid(v)?;
                    cfg.grid_explicit = true;
                }
                "out" => cfg.out = PathBuf::from(v),
                "seed" => cfg.seed = parse_one(key, v)?,
                "max_iters" => cfg.max_iters = parse_one(key, v)?,
                "tol_obj" => cfg.tol_obj = parse_one(key, v)?,
                "tol_res" => cfg.tol_res = parse_one(key, v)?,
                "workers" => cfg.workers = parse_one(key, v)?,
                "starts" => cfg.starts = parse_one(key, v)?,
                "jitter" => cfg.jitter = parse_one(key, v)?,
                other => return Err(CliError::Usage(format!("unknown key `{other}`"))),
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let c_star = hardy_constant(self.d)?;
        let usage = |m: String| Err(CliError::Usage(m));
        if let Some(s) = self.s.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return usage(format!("s must be > 0 (got {s})"));
        }
        if self.rank.contains(&0) {
            return usage("N must be ≥ 1".into());
        }
        for c in &self.c {
            let v = c.resolve(self.d)?;
            if !(0.0..=c_star).contains(&v) {
                return usage(format!("c must lie in [0, {c_star}] for d = {} (got {v})", self.d));
            }
        }
        let g = self.grid;
        if !(g.t_min.is_finite() && g.t_max.is_finite() && g.t_min < g.t_max) || g.n < 16 {
            return usage(format!("grid needs t_min < t_max and n ≥ 16 (got {},{},{})", g.t_min, g.t_max, g.n));
        }
        if !(self.tol_obj > 0.0 && self.tol_res > 0.0) {
            return usage("tolerances must be positive".into());
        }
        if !(1..=9).contains(&self.starts) {
            return usage(format!("starts must be between 1 and 9 (got {})", self.starts));
        }
        if self.jitter.is_nan() || self.jitter < 0.0 {
            return usage("jitter must be ≥ 0".into());
        }
        Ok(())
    }

    /// The single `(s, N, c)` cell of a non-sweep command.
    pub fn single(&self) -> CliResult<ProblemParams> {
        if self.s.len() != 1 || self.rank.len() != 1 || self.c.len() != 1 {
            return Err(CliError::Usage("lists of s, N or c are only accepted by `sweep`".into()));
        }
        self.params(self.s[0], self.rank[0], self.c[0])
    }

    pub fn params(&self, s: f64, rank: usize, c: Coupling) -> CliResult<ProblemParams> {
        Ok(ProblemParams::new(self.d, c.resolve(self.d)?, s, rank)?)
    }

    pub fn scf_config(&self) -> CliResult<hardy_lt::scf::SCFConfig> {
        let mut cfg = hardy_lt::scf::SCFConfig::new(self.grid.build()?);
        cfg.max_iters = self.max_iters;
        cfg.tol_obj = self.tol_obj;
        cfg.tol_residual = self.tol_res;
        cfg.starts = self.starts;
        cfg.seed = self.seed;
        cfg.jitter = self.jitter;
        Ok(cfg)
    }
}

/// Output directory, created if needed.
pub fn ensure_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(CliError::io(path))
}
