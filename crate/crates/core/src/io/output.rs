//! Run output: time-series table, metrics and plot data.
//!
//! `timeseries.csv` columns, in order:
//!
//! | column | unit |
//! |---|---|
//! | `t` | s |
//! | `x_s`, `y_s` | m (north, east) |
//! | `psi` | rad |
//! | `u`, `v` | m/s |
//! | `r` | rad/s |
//! | `tau_u` | N |
//! | `tau_r` | N·m |
//! | `tau_d_1..3` | N, N, N·m (true disturbance) |
//! | `tau_d_hat_1..3` | N, N, N·m (estimate) |
//! | `psi_des` | rad |
//! | `u_des` | m/s |
//! | `mu` | – |
//! | `alpha` | rad |
//! | `d_min` | m (`inf` when nothing is tracked) |
//! | `mode` | `path-follow`, `colav` or `anti-grounding` |
//! | `solve_time` | s (`NaN` unless timing was requested) |
//! | `solver_status` | `converged`, `max-iter`, `infeasible`, or `none` for PID |
//!
//! Numbers are written in shortest round-trip form.

use std::fs::File;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::guidance::GuidanceMode;
use crate::sim::{RunMetrics, RunResult, StepRecord};

use super::config::{scenario_to_toml, ConfigError};

pub const TIMESERIES_COLUMNS: [&str; 23] = [
    "t",
    "x_s",
    "y_s",
    "psi",
    "u",
    "v",
    "r",
    "tau_u",
    "tau_r",
    "tau_d_1",
    "tau_d_2",
    "tau_d_3",
    "tau_d_hat_1",
    "tau_d_hat_2",
    "tau_d_hat_3",
    "psi_des",
    "u_des",
    "mu",
    "alpha",
    "d_min",
    "mode",
    "solve_time",
    "solver_status",
];

const NUMERIC_COLUMNS: usize = 20;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// One row of `timeseries.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeseriesRow {
    /// `t` through `d_min`.
    pub values: [f64; NUMERIC_COLUMNS],
    pub mode: GuidanceMode,
    pub solve_time: f64,
    pub solver_status: String,
}

impl TimeseriesRow {
    pub fn from_record(r: &StepRecord) -> Self {
        let s = &r.state;
        let c = &r.command;
        Self {
            values: [
                r.t,
                s.x,
                s.y,
                s.psi,
                s.u,
                s.v,
                s.r,
                r.input.tau_u,
                r.input.tau_r,
                r.tau_d.surge,
                r.tau_d.sway,
                r.tau_d.yaw,
                r.tau_d_hat.surge,
                r.tau_d_hat.sway,
                r.tau_d_hat.yaw,
                c.psi_des,
                c.u_des,
                c.mu,
                c.alpha,
                c.d_min,
            ],
            mode: c.mode,
            solve_time: r.solve_time,
            solver_status: r.status.map_or("none", |s| s.as_str()).to_string(),
        }
    }

    /// Bitwise equality, so that NaN entries compare equal.
    pub fn same_bits(&self, other: &Self) -> bool {
        self.values.iter().zip(&other.values).all(|(a, b)| a.to_bits() == b.to_bits())
            && self.mode == other.mode
            && self.solve_time.to_bits() == other.solve_time.to_bits()
            && self.solver_status == other.solver_status
    }
}

fn num(v: f64) -> String {
    // Display is the shortest representation that parses back exactly.
    format!("{v}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>, OutputError> {
    csv::Writer::from_path(path).map_err(|source| OutputError::Csv { path: path.to_path_buf(), source })
}

fn write_table(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<(), OutputError> {
    let err = |source| OutputError::Csv { path: path.to_path_buf(), source };
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|source| OutputError::Io { path: path.to_path_buf(), source })
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

pub fn write_timeseries(records: &[StepRecord], path: &Path) -> Result<(), OutputError> {
    let rows = records.iter().map(|r| {
        let row = TimeseriesRow::from_record(r);
        let mut out: Vec<String> = row.values.iter().map(|v| num(*v)).collect();
        out.push(row.mode.as_str().to_string());
        out.push(num(row.solve_time));
        out.push(row.solver_status);
        out
    });
    write_table(path, &header(&TIMESERIES_COLUMNS), rows)
}

pub fn read_timeseries(path: &Path) -> Result<Vec<TimeseriesRow>, OutputError> {
    let bad = |message: String| OutputError::Format { path: path.to_path_buf(), message };
    let mut rdr = csv::Reader::from_path(path).map_err(|source| OutputError::Csv { path: path.to_path_buf(), source })?;
    let head = rdr.headers().map_err(|source| OutputError::Csv { path: path.to_path_buf(), source })?.clone();
    if head.iter().ne(TIMESERIES_COLUMNS.iter().copied()) {
        return Err(bad("unexpected header".into()));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|source| OutputError::Csv { path: path.to_path_buf(), source })?;
        let field = |j: usize| -> Result<f64, OutputError> {
            rec[j].parse::<f64>().map_err(|e| bad(format!("row {}, column {}: {e}", i + 1, TIMESERIES_COLUMNS[j])))
        };
        let mut values = [0.0; NUMERIC_COLUMNS];
        for (j, v) in values.iter_mut().enumerate() {
            *v = field(j)?;
        }
        let mode = GuidanceMode::parse(&rec[20]).ok_or_else(|| bad(format!("row {}: unknown mode {}", i + 1, &rec[20])))?;
        rows.push(TimeseriesRow { values, mode, solve_time: field(21)?, solver_status: rec[22].to_string() });
    }
    Ok(rows)
}

/// `metrics.json` content.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricsFile {
    pub scenario: String,
    pub controller: String,
    pub seed: u64,
    #[serde(flatten)]
    pub metrics: RunMetrics,
}

pub fn read_metrics(path: &Path) -> Result<MetricsFile, OutputError> {
    let text = std::fs::read_to_string(path).map_err(|source| OutputError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|source| OutputError::Json { path: path.to_path_buf(), source })
}

fn write_text(path: &Path, text: &str) -> Result<(), OutputError> {
    std::fs::write(path, text).map_err(|source| OutputError::Io { path: path.to_path_buf(), source })
}

/// Writes every output file of a run into `dir`, creating it if needed, and
/// returns the paths written.
pub fn write_run(result: &RunResult, dir: &Path) -> Result<Vec<PathBuf>, OutputError> {
    std::fs::create_dir_all(dir).map_err(|source| OutputError::Io { path: dir.to_path_buf(), source })?;
    let recs = &result.records;
    let path = |name: &str| dir.join(name);
    let mut written = Vec::new();

    let p = path("timeseries.csv");
    write_timeseries(recs, &p)?;
    written.push(p);

    let p = path("metrics.json");
    let metrics = MetricsFile {
        scenario: result.scenario.name.clone(),
        controller: result.scenario.controller.as_str().to_string(),
        seed: result.scenario.seed,
        metrics: result.metrics.clone(),
    };
    let json = serde_json::to_string_pretty(&metrics).map_err(|source| OutputError::Json { path: p.clone(), source })?;
    write_text(&p, &(json + "\n"))?;
    written.push(p);

    let p = path("disturbance.csv");
    write_table(
        &p,
        &header(&["t", "tau_d_1", "tau_d_2", "tau_d_3", "tau_d_hat_1", "tau_d_hat_2", "tau_d_hat_3"]),
        recs.iter().map(|r| {
            [r.t, r.tau_d.surge, r.tau_d.sway, r.tau_d.yaw, r.tau_d_hat.surge, r.tau_d_hat.sway, r.tau_d_hat.yaw]
                .map(num)
                .to_vec()
        }),
    )?;
    written.push(p);

    let p = path("states.csv");
    write_table(
        &p,
        &header(&["t", "psi", "psi_des", "u", "u_des", "v", "r", "tau_u", "tau_r"]),
        recs.iter().map(|r| {
            [r.t, r.state.psi, r.command.psi_des, r.state.u, r.command.u_des, r.state.v, r.state.r, r.input.tau_u, r.input.tau_r]
                .map(num)
                .to_vec()
        }),
    )?;
    written.push(p);

    let p = path("distances.csv");
    write_table(
        &p,
        &header(&["t", "d_obstacle", "d_grounding", "cross_track"]),
        recs.iter().map(|r| [r.t, r.obstacle_distance, r.grounding_distance, r.cross_track].map(num).to_vec()),
    )?;
    written.push(p);

    let p = path("track.csv");
    let n_obs = result.scenario.obstacles.len();
    let mut cols = header(&["t", "x_s", "y_s", "psi"]);
    for i in 0..n_obs {
        cols.push(format!("obstacle_{}_x", i + 1));
        cols.push(format!("obstacle_{}_y", i + 1));
    }
    write_table(
        &p,
        &cols,
        recs.iter().map(|r| {
            let mut row = vec![num(r.t), num(r.state.x), num(r.state.y), num(r.state.psi)];
            for o in &r.obstacles {
                row.push(num(o.x));
                row.push(num(o.y));
            }
            row
        }),
    )?;
    written.push(p);

    let p = path("path.csv");
    write_table(&p, &header(&["x", "y"]), result.scenario.path.waypoints.iter().map(|w| w.map(num).to_vec()))?;
    written.push(p);

    let p = path("chart.csv");
    write_table(
        &p,
        &header(&["region", "depth", "x", "y"]),
        result.scenario.chart.iter().enumerate().flat_map(|(i, reg)| {
            reg.polygon.iter().map(move |v| vec![i.to_string(), num(reg.depth), num(v[0]), num(v[1])])
        }),
    )?;
    written.push(p);

    let p = path("scenario.toml");
    write_text(&p, &scenario_to_toml(&result.scenario)?)?;
    written.push(p);

    Ok(written)
}

/// Cross-track summary of paired runs, one row per run.
pub fn write_comparison(results: &[RunResult], path: &Path) -> Result<(), OutputError> {
    let opt = |v: Option<f64>| v.map_or(String::new(), num);
    write_table(
        path,
        &header(&["scenario", "controller", "seed", "rms_cross_track", "max_cross_track", "terminal_cross_track"]),
        results.iter().map(|r| {
            vec![
                r.scenario.name.clone(),
                r.scenario.controller.as_str().to_string(),
                r.scenario.seed.to_string(),
                opt(r.metrics.rms_cross_track),
                opt(r.metrics.max_cross_track),
                opt(r.metrics.terminal_cross_track),
            ]
        }),
    )
}
