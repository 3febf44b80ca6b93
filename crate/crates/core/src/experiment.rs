//! Experiment configuration and on-disk formats.
//!
//! - Run CSV: header `run_id,t,dist_sq`, one row per run per checkpoint,
//!   rows ordered by run then `t`, LF line endings. Distances are written
//!   with 17 significant digits so identical runs produce identical bytes.
//! - Metadata sidecar `<output>.meta`: `key = value` lines echoing every
//!   resolved config field, the crate version and a timestamp.
//! - Config files use the same `key = value` syntax; `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, BufRead, Write};
use std::path::PathBuf;

use crate::analysis::{curve_point, CurvePoint, RateFit};
use crate::catalog::{self, CatalogEntry};
use crate::error::{invalid, Result};
use crate::estimator::FeedbackMode;
use crate::learner::{run_ensemble, InitialState, LearnerConfig, Recording, Schedules, Trajectory};

pub const CSV_HEADER: &str = "run_id,t,dist_sq";

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub game: String,
    pub mode: FeedbackMode,
    pub c: f64,
    pub a: f64,
    pub s: f64,
    pub iterations: u64,
    pub num_runs: usize,
    pub seed: u64,
    /// Cap on the geometric checkpoint grid.
    pub checkpoints: usize,
    pub output_path: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            game: catalog::EXAMPLE1_WIDE.to_string(),
            mode: FeedbackMode::OnePoint,
            c: 1.0,
            a: 1.0,
            s: 1.0,
            iterations: 100_000,
            num_runs: 50,
            seed: 0,
            checkpoints: crate::learner::DEFAULT_MAX_CHECKPOINTS,
            output_path: PathBuf::from("run.csv"),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| invalid(format!("{key}: cannot parse {value:?}")))
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(invalid(format!("line {}: expected key = value", lineno + 1)));
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Sets one field from its textual form. Accepts `-` or `_` in keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.replace('-', "_").as_str() {
            "game" => self.game = value.trim().to_string(),
            "mode" => self.mode = value.parse()?,
            "c" => self.c = parse_num(key, value)?,
            "a" => self.a = parse_num(key, value)?,
            "s" => self.s = parse_num(key, value)?,
            "iterations" => self.iterations = parse_num(key, value)?,
            "runs" | "num_runs" => self.num_runs = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "checkpoints" => self.checkpoints = parse_num(key, value)?,
            "output" | "output_path" => self.output_path = PathBuf::from(value.trim()),
            other => return Err(invalid(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Reads a config file body over the current values.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_key_values(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    /// Checks every invariant and builds the game and learner config.
    pub fn resolve(&self) -> Result<(CatalogEntry, LearnerConfig)> {
        let entry = catalog::by_name(&self.game)?;
        if self.num_runs == 0 {
            return Err(invalid("runs must be at least 1"));
        }
        if entry.game.equilibrium().is_none() {
            return Err(invalid(format!("game {} has no known equilibrium", self.game)));
        }
        let schedules = Schedules::new(self.mode, self.c, self.a, self.s)?;
        let learner = LearnerConfig::new(schedules, self.iterations, InitialState::StandardNormal, self.seed)
            .with_recording(Recording::Geometric {
                max_points: self.checkpoints,
            });
        learner.validate()?;
        Ok((entry, learner))
    }

    /// Resolved fields in a fixed order.
    pub fn to_key_values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("game", self.game.clone()),
            ("mode", self.mode.to_string()),
            ("c", self.c.to_string()),
            ("a", self.a.to_string()),
            ("s", self.s.to_string()),
            ("iterations", self.iterations.to_string()),
            ("runs", self.num_runs.to_string()),
            ("seed", self.seed.to_string()),
            ("checkpoints", self.checkpoints.to_string()),
            ("output", self.output_path.display().to_string()),
        ]
    }

    /// Sidecar path `<output>.meta`.
    pub fn meta_path(&self) -> PathBuf {
        let mut s = self.output_path.clone().into_os_string();
        s.push(".meta");
        PathBuf::from(s)
    }
}

/// Resolves the config and runs the ensemble.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<Trajectory>> {
    let (entry, learner) = config.resolve()?;
    run_ensemble(&entry.game, &learner, config.num_runs)
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(mut w: W, trajectories: &[Trajectory]) -> io::Result<()> {
    let mut buf = String::new();
    writeln!(buf, "{CSV_HEADER}").unwrap();
    for tr in trajectories {
        for cp in &tr.checkpoints {
            let d = cp.dist_sq.ok_or_else(|| {
                io::Error::new(io::ErrorKind::InvalidData, "trajectory without distances")
            })?;
            writeln!(buf, "{},{},{}", tr.run, cp.t, format_f64(d)).unwrap();
        }
    }
    w.write_all(buf.as_bytes())?;
    w.flush()
}

pub fn write_meta<W: Write>(mut w: W, config: &ExperimentConfig, timestamp: u64) -> io::Result<()> {
    for (k, v) in config.to_key_values() {
        writeln!(w, "{k} = {v}")?;
    }
    writeln!(w, "version = {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "timestamp = {timestamp}")?;
    w.flush()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvRow {
    pub run_id: u64,
    pub t: u64,
    pub dist_sq: f64,
}

/// Parses a run CSV. Rejects a missing or wrong header, malformed rows and
/// files without data rows.
pub fn read_csv<R: BufRead>(r: R) -> Result<Vec<CsvRow>> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| invalid("empty CSV"))?
        .map_err(|e| invalid(format!("cannot read CSV: {e}")))?;
    if header.trim() != CSV_HEADER {
        return Err(invalid(format!("expected header {CSV_HEADER:?}, found {header:?}")));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| invalid(format!("cannot read CSV: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(invalid(format!("line {}: expected 3 fields", lineno + 2)));
        }
        let row = CsvRow {
            run_id: parse_num("run_id", fields[0])?,
            t: parse_num("t", fields[1])?,
            dist_sq: parse_num("dist_sq", fields[2])?,
        };
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(invalid("CSV has no data rows"));
    }
    Ok(rows)
}

/// Ensemble curve from CSV rows; every run must cover the same grid.
pub fn curve_from_rows(rows: &[CsvRow]) -> Result<Vec<CurvePoint>> {
    let mut by_run: BTreeMap<u64, Vec<(u64, f64)>> = BTreeMap::new();
    for row in rows {
        by_run.entry(row.run_id).or_default().push((row.t, row.dist_sq));
    }
    let mut runs = by_run.into_values();
    let mut first = runs.next().ok_or_else(|| invalid("no runs"))?;
    first.sort_by_key(|p| p.0);
    let grid: Vec<u64> = first.iter().map(|p| p.0).collect();
    let mut columns: Vec<Vec<f64>> = first.iter().map(|p| vec![p.1]).collect();
    for mut run in runs {
        run.sort_by_key(|p| p.0);
        if run.len() != grid.len() || run.iter().zip(&grid).any(|(p, t)| p.0 != *t) {
            return Err(invalid("runs in the CSV do not share a checkpoint grid"));
        }
        for (col, p) in columns.iter_mut().zip(run) {
            col.push(p.1);
        }
    }
    Ok(grid
        .into_iter()
        .zip(columns)
        .map(|(t, mut col)| curve_point(t, &mut col))
        .collect())
}

/// `key = value` report of a rate fit.
pub fn rate_report(fit: &RateFit, window_fraction: f64, source: &str) -> String {
    let mut s = String::new();
    writeln!(s, "input = {source}").unwrap();
    writeln!(s, "window_fraction = {window_fraction}").unwrap();
    writeln!(s, "{fit}").unwrap();
    s
}
