use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::StudyConfig;
use super::study::{FitRow, FlowSummary, Row, SimulationRecord, StudyResult};
use crate::error::{Error, Result};

pub const STUDY_CSV: &str = "study.csv";
pub const STUDY_JSON: &str = "study.json";
pub const SIMULATION_CSV: &str = "simulation.csv";
pub const SIMULATION_JSON: &str = "simulation.json";
pub const CONFIG_COPY: &str = "config.toml";
pub const CSV_HEADER: &str = "N,t,metric,estimate,stderr,flag";

/// SHA-256 of the canonical TOML rendering, so formatting and comments in
/// the source file do not change the hash.
pub fn config_hash(cfg: &StudyConfig) -> String {
    hex::encode(Sha256::digest(cfg.to_toml().as_bytes()))
}

/// JSON sidecar written next to every CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub wall_time_s: f64,
    pub model_id: String,
    pub flow: FlowSummary,
    #[serde(default)]
    pub fits: Vec<FitRow>,
}

fn model_name(cfg: &StudyConfig) -> String {
    serde_json::to_value(cfg.model_id)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

fn io_context(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io(e).with_context(path.display())
}

fn write_sidecar(dir: &Path, name: &str, meta: &Metadata, cfg: &StudyConfig) -> Result<()> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(meta).expect("metadata serializes");
    fs::write(&path, text).map_err(io_context(&path))?;
    let path = dir.join(CONFIG_COPY);
    fs::write(&path, cfg.to_toml()).map_err(io_context(&path))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Config(format!("CSV: {e}"))
}

fn to_csv<T: Serialize>(records: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

pub fn rows_to_csv(rows: &[Row]) -> String {
    if rows.is_empty() {
        return format!("{CSV_HEADER}\n");
    }
    to_csv(rows).expect("rows serialize")
}

pub fn write_study(result: &StudyResult, cfg: &StudyConfig, dir: &Path, wall_time_s: f64) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_context(dir))?;
    let path = dir.join(STUDY_CSV);
    fs::write(&path, rows_to_csv(&result.rows)).map_err(io_context(&path))?;
    let meta = Metadata {
        kind: "study".into(),
        config_hash: result.fingerprint.config_hash.clone(),
        seed: result.fingerprint.seed,
        version: result.fingerprint.version.clone(),
        wall_time_s,
        model_id: model_name(cfg),
        flow: result.flow.clone(),
        fits: result.fits.clone(),
    };
    write_sidecar(dir, STUDY_JSON, &meta, cfg)
}

pub fn write_simulation(
    records: &[SimulationRecord],
    flow: &FlowSummary,
    cfg: &StudyConfig,
    dir: &Path,
    wall_time_s: f64,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_context(dir))?;
    let s = to_csv(records)?;
    let path = dir.join(SIMULATION_CSV);
    fs::write(&path, s).map_err(io_context(&path))?;
    let meta = Metadata {
        kind: "simulate".into(),
        config_hash: config_hash(cfg),
        seed: cfg.master_seed,
        version: env!("CARGO_PKG_VERSION").into(),
        wall_time_s,
        model_id: model_name(cfg),
        flow: flow.clone(),
        fits: Vec::new(),
    };
    write_sidecar(dir, SIMULATION_JSON, &meta, cfg)
}

fn parse_rows(text: &str) -> Result<Vec<Row>> {
    if text.lines().next() != Some(CSV_HEADER) {
        return Err(Error::Config(format!("expected CSV header `{CSV_HEADER}`")));
    }
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<Row>, _>>()
        .map_err(csv_error)
}

pub fn read_rows(dir: &Path) -> Result<Vec<Row>> {
    let path = dir.join(STUDY_CSV);
    let text = fs::read_to_string(&path).map_err(io_context(&path))?;
    parse_rows(&text).map_err(|e| e.with_context(path.display()))
}

fn read_metadata(dir: &Path) -> Result<Option<Metadata>> {
    let path = dir.join(STUDY_JSON);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(io_context(&path))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Markdown summary of a study directory: one table per metric (rows `N`,
/// columns `t`) and the fitted rates.
pub fn render_report(dir: &Path) -> Result<String> {
    let rows = read_rows(dir)?;
    let meta = read_metadata(dir)?;
    let mut out = String::from("# Study report\n\n");
    if let Some(m) = &meta {
        let _ = writeln!(
            out,
            "model `{}`, seed {}, version {}, config `{}`, wall time {:.1} s\n",
            m.model_id,
            m.seed,
            m.version,
            &m.config_hash[..m.config_hash.len().min(12)],
            m.wall_time_s
        );
        let _ = writeln!(
            out,
            "limit flow: {} iterations, converged = {}, final gap {:.3e} (tol {:.3e})\n",
            m.flow.iterations, m.flow.converged, m.flow.final_gap, m.flow.tol
        );
    }
    let mut metrics: Vec<&str> = Vec::new();
    for r in &rows {
        if !metrics.contains(&r.metric.as_str()) {
            metrics.push(&r.metric);
        }
    }
    for metric in metrics {
        let sel: Vec<&Row> = rows.iter().filter(|r| r.metric == metric).collect();
        let mut ts: Vec<f64> = Vec::new();
        let mut ns: Vec<usize> = Vec::new();
        for r in &sel {
            if !ts.contains(&r.t) {
                ts.push(r.t);
            }
            if !ns.contains(&r.n) {
                ns.push(r.n);
            }
        }
        let _ = writeln!(out, "## {metric}\n");
        let _ = write!(out, "| N |");
        for t in &ts {
            let _ = write!(out, " t = {t} |");
        }
        let _ = write!(out, "\n|---|");
        for _ in &ts {
            out.push_str("---|");
        }
        out.push('\n');
        for n in ns {
            let _ = write!(out, "| {n} |");
            for &t in &ts {
                match sel.iter().find(|r| r.n == n && r.t == t) {
                    Some(r) => {
                        let mark = if r.flag.is_empty() { "" } else { " *" };
                        let _ = write!(out, " {:.4e} ± {:.1e}{mark} |", r.estimate, r.stderr);
                    }
                    None => out.push_str(" |"),
                }
            }
            out.push('\n');
        }
        out.push('\n');
    }
    if let Some(m) = meta.filter(|m| !m.fits.is_empty()) {
        out.push_str("## Rates\n\n| metric | t | slope | 95% band | intercept |\n|---|---|---|---|---|\n");
        for f in &m.fits {
            let _ = writeln!(
                out,
                "| {} | {} | {:.3} | [{:.3}, {:.3}] | {:.3} |",
                f.metric, f.t, f.fit.slope, f.fit.band.0, f.fit.band.1, f.fit.intercept
            );
        }
        out.push('\n');
    }
    out.push_str("`*` flagged row (floored at its stderr, or a proxy estimate).\n");
    Ok(out)
}
