//! Tables, manifests and plots. All writing happens on one thread after the numerics.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Format, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    /// Shortest round-trip scientific notation, so that reruns match byte for byte.
    fn csv(&self) -> String {
        match self {
            Cell::Float(v) if *v == 0.0 => "0".to_string(),
            Cell::Float(v) => format!("{v:e}"),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(v) => json!(v),
            Cell::Int(i) => json!(i),
            Cell::Text(s) => json!(s),
        }
    }

    fn as_f64(&self) -> f64 {
        match *self {
            Cell::Float(v) => v,
            Cell::Int(i) => i as f64,
            Cell::Text(_) => f64::NAN,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<i32> for Cell {
    fn from(v: i32) -> Self {
        Cell::Int(v.into())
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    /// File stem.
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Plot column 1 against column 0 when SVG output is on.
    pub plot: bool,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&'static str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.to_vec(),
            rows: Vec::new(),
            plot: false,
        }
    }

    pub fn plotted(mut self) -> Self {
        self.plot = true;
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    fs::write(path, s).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_csv(path: &Path, table: &Table) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::csv))?;
    }
    w.flush()?;
    Ok(())
}

fn write_table_json(path: &Path, table: &Table) -> CliResult<()> {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|r| Value::Array(r.iter().map(Cell::json).collect()))
        .collect();
    write_json(path, &json!({ "columns": table.columns, "rows": rows }))
}

fn write_svg(path: &Path, table: &Table) -> CliResult<()> {
    use plotters::prelude::*;
    let pts: Vec<(f64, f64)> = table
        .rows
        .iter()
        .map(|r| (r[0].as_f64(), r[1].as_f64()))
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    if pts.len() < 2 {
        return Ok(());
    }
    let (x0, x1) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (y0, y1) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let pad = if y1 > y0 {
        0.05 * (y1 - y0)
    } else {
        1.0f64.max(y1.abs())
    };
    let err = |e: &dyn std::fmt::Display| CliError::Io(format!("{}: {e}", path.display()));
    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(20)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(x0..x1.max(x0 + f64::EPSILON), (y0 - pad)..(y1 + pad))
        .map_err(|e| err(&e))?;
    chart
        .configure_mesh()
        .x_desc(table.columns[0])
        .y_desc(table.columns[1])
        .x_label_formatter(&|v| format!("{v:.3e}"))
        .y_label_formatter(&|v| format!("{v:.3e}"))
        .draw()
        .map_err(|e| err(&e))?;
    chart.draw_series(LineSeries::new(pts, &BLUE)).map_err(|e| err(&e))?;
    root.present().map_err(|e| err(&e))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    library_version: &'static str,
    subcommand: &'a str,
    config_sha256: String,
    seed: u64,
    outputs: Vec<String>,
    config: &'a RunConfig,
}

/// SHA-256 of the canonical (compact, fully resolved) configuration.
pub fn config_hash(config: &RunConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("configuration serializes");
    hex::encode(Sha256::digest(bytes))
}

/// Writes the tables, `summary.json` and `manifest.json`; returns the file names.
pub fn write_run(
    dir: &Path,
    subcommand: &str,
    config: &RunConfig,
    tables: &[Table],
    summary: &Value,
) -> CliResult<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let fmt = config.output.format;
    let mut outputs = Vec::new();
    for t in tables {
        let file = match fmt {
            Format::Csv => format!("{}.csv", t.name),
            Format::Json => format!("{}.json", t.name),
        };
        let path: PathBuf = dir.join(&file);
        match fmt {
            Format::Csv => write_csv(&path, t)?,
            Format::Json => write_table_json(&path, t)?,
        }
        outputs.push(file);
        if config.output.svg && t.plot {
            let file = format!("{}.svg", t.name);
            write_svg(&dir.join(&file), t)?;
            outputs.push(file);
        }
    }
    write_json(&dir.join("summary.json"), summary)?;
    outputs.push("summary.json".into());
    outputs.sort();
    let manifest = Manifest {
        tool: "twabs",
        version: env!("CARGO_PKG_VERSION"),
        library_version: twisted_absorption::VERSION,
        subcommand,
        config_sha256: config_hash(config),
        seed: config.seed,
        outputs: outputs.clone(),
        config,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    outputs.push("manifest.json".into());
    Ok(outputs)
}

/// `0` for zero, shortest scientific notation otherwise.
pub fn fmt_ev(v: f64) -> String {
    Cell::Float(v).csv()
}
