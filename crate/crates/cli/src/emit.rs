//! CSV and JSON output. Floats are rounded to 12 significant digits.

use std::path::{Path, PathBuf};

use crate::scenario::ResultRow;

/// Column order of the CSV output. `set` is `mean` on aggregate rows, missing
/// values are empty, and `per_user_rates` is `;`-separated.
pub const CSV_HEADER: &str = "scenario,set,scheme,method,sweep_axis,sweep_value,status,feasible_sets,sum_rate,sum_rate_mc,per_user_rates,crlb_theta,crlb_phi,crlb_theta_db,crlb_phi_db,comm_power,sensing_power,iterations,wall_time_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Debug, thiserror::Error)]
pub enum EmitError {
    #[error("nothing to write")]
    Empty,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// Rounds to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn fmt(x: f64) -> String {
    let r = round12(x);
    let a = r.abs();
    if r == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

/// The row as it appears after emission.
pub fn quantize(r: &ResultRow) -> ResultRow {
    let q = |x: Option<f64>| x.map(round12);
    ResultRow {
        sweep_value: round12(r.sweep_value),
        sum_rate: q(r.sum_rate),
        sum_rate_mc: q(r.sum_rate_mc),
        per_user_rates: r.per_user_rates.iter().map(|&x| round12(x)).collect(),
        crlb_theta: q(r.crlb_theta),
        crlb_phi: q(r.crlb_phi),
        crlb_theta_db: q(r.crlb_theta_db),
        crlb_phi_db: q(r.crlb_phi_db),
        comm_power: q(r.comm_power),
        sensing_power: q(r.sensing_power),
        iterations: q(r.iterations),
        wall_time_s: round12(r.wall_time_s),
        ..r.clone()
    }
}

pub fn to_csv(rows: &[ResultRow]) -> Result<String, EmitError> {
    if rows.is_empty() {
        return Err(EmitError::Empty);
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let io = |e: csv::Error| EmitError::Io { path: PathBuf::from("<csv>"), source: e.into() };
    w.write_record(CSV_HEADER.split(',')).map_err(io)?;
    for r in rows {
        let users: Vec<String> = r.per_user_rates.iter().map(|&x| fmt(x)).collect();
        w.write_record([
            r.scenario.clone(),
            r.set.map(|s| s.to_string()).unwrap_or_else(|| "mean".into()),
            r.scheme.clone(),
            r.method.clone(),
            r.sweep_axis.clone(),
            fmt(r.sweep_value),
            r.status.name().into(),
            r.feasible_sets.to_string(),
            fmt_opt(r.sum_rate),
            fmt_opt(r.sum_rate_mc),
            users.join(";"),
            fmt_opt(r.crlb_theta),
            fmt_opt(r.crlb_phi),
            fmt_opt(r.crlb_theta_db),
            fmt_opt(r.crlb_phi_db),
            fmt_opt(r.comm_power),
            fmt_opt(r.sensing_power),
            fmt_opt(r.iterations),
            fmt(r.wall_time_s),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| EmitError::Io { path: PathBuf::from("<csv>"), source: e.into_error() })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn to_json(rows: &[ResultRow]) -> Result<String, EmitError> {
    if rows.is_empty() {
        return Err(EmitError::Empty);
    }
    let q: Vec<ResultRow> = rows.iter().map(quantize).collect();
    let mut s = serde_json::to_string_pretty(&q).map_err(|source| EmitError::Json { path: PathBuf::from("<json>"), source })?;
    s.push('\n');
    Ok(s)
}

pub fn parse_json(s: &str) -> Result<Vec<ResultRow>, serde_json::Error> {
    serde_json::from_str(s)
}

/// Writes `<dir>/<stem>.csv` and/or `<dir>/<stem>.json`; returns the paths written.
pub fn emit(rows: &[ResultRow], dir: &Path, stem: &str, format: Format) -> Result<Vec<PathBuf>, EmitError> {
    std::fs::create_dir_all(dir).map_err(|source| EmitError::Io { path: dir.to_path_buf(), source })?;
    let mut written = Vec::new();
    let mut put = |ext: &str, body: String| -> Result<(), EmitError> {
        let path = dir.join(format!("{stem}.{ext}"));
        std::fs::write(&path, body).map_err(|source| EmitError::Io { path: path.clone(), source })?;
        written.push(path);
        Ok(())
    };
    if matches!(format, Format::Csv | Format::Both) {
        put("csv", to_csv(rows)?)?;
    }
    if matches!(format, Format::Json | Format::Both) {
        put("json", to_json(rows)?)?;
    }
    Ok(written)
}
