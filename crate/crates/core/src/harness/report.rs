//! CSV and markdown renderings of a [`SimReport`].

use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use crate::dgp::Mechanism;
use crate::error::{Error, Result};
use crate::harness::{aggregate_table, CellResult, MethodFamily, MethodSpec, SimReport, TableRow};
use crate::types::{Estimand, MomentOrder};

/// Column names of the per-cell CSV, in order.
pub const CSV_HEADER: [&str; 14] = [
    "mechanism",
    "outcome_model",
    "strategy",
    "method_family",
    "moments",
    "estimand",
    "n_reps",
    "abs_bias",
    "mae",
    "rmse",
    "mean_ess_treated",
    "mean_ess_control",
    "converged_fraction",
    "mc_se",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(Error::Config(format!("unknown report format `{other}` (expected csv or md)"))),
        }
    }
}

fn csv_error(path: &Path, source: csv::Error) -> Error {
    Error::Csv { path: path.to_path_buf(), source }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

fn cell_record(c: &CellResult) -> Vec<String> {
    vec![
        c.mechanism.to_string(),
        c.outcome_model.to_string(),
        c.strategy.to_string(),
        c.method.family.to_string(),
        c.method.moments.map_or(String::new(), |m| m.to_string()),
        c.method.estimand.to_string(),
        c.n_reps.to_string(),
        c.abs_bias.to_string(),
        c.mae.to_string(),
        c.rmse.to_string(),
        c.mean_ess_treated.to_string(),
        c.mean_ess_control.to_string(),
        c.converged_fraction.to_string(),
        c.mc_se.to_string(),
    ]
}

/// Writes the per-cell CSV (header plus one row per cell) to `out`.
pub fn write_csv<W: std::io::Write>(cells: &[CellResult], out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for c in cells {
        w.write_record(cell_record(c))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the per-cell CSV or the markdown table to `path`.
pub fn write_report(report: &SimReport, path: &Path, format: ReportFormat) -> Result<()> {
    match format {
        ReportFormat::Csv => {
            let file = File::create(path).map_err(|e| io_error(path, e))?;
            write_csv(&report.cells, file).map_err(|e| csv_error(path, e))
        }
        ReportFormat::Markdown => std::fs::write(path, render_markdown(&report.table)).map_err(|e| io_error(path, e)),
    }
}

fn parse_field<T: FromStr>(raw: &str, row: usize, column: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.trim().parse::<T>().map_err(|e| Error::Data { row, column: column.to_string(), message: e.to_string() })
}

/// Reads a per-cell CSV written by [`write_report`].
pub fn read_report_csv(path: &Path) -> Result<SimReport> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let headers = r.headers().map_err(|e| csv_error(path, e))?.clone();
    let missing: Vec<String> =
        CSV_HEADER.iter().filter(|h| !headers.iter().any(|x| x == **h)).map(|h| h.to_string()).collect();
    if !missing.is_empty() {
        return Err(Error::Schema { missing });
    }
    let idx: Vec<usize> = CSV_HEADER.iter().map(|h| headers.iter().position(|x| x == *h).expect("checked above")).collect();

    let mut cells = Vec::new();
    for (i, rec) in r.records().enumerate() {
        // Data rows are numbered from 1, after the header.
        let row = i + 1;
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let get = |k: usize| rec.get(idx[k]).unwrap_or("");
        let family: MethodFamily = parse_field(get(3), row, CSV_HEADER[3])?;
        let moments = match get(4).trim() {
            "" => None,
            s => Some(MomentOrder::try_from(parse_field::<u8>(s, row, CSV_HEADER[4])?).map_err(|e| Error::Data {
                row,
                column: CSV_HEADER[4].into(),
                message: e.to_string(),
            })?),
        };
        let estimand: Estimand = parse_field(get(5), row, CSV_HEADER[5])?;
        let method = MethodSpec::new(family, moments, estimand)
            .map_err(|e| Error::Data { row, column: CSV_HEADER[4].into(), message: e.to_string() })?;
        let f = |k: usize| parse_field::<f64>(get(k), row, CSV_HEADER[k]);
        cells.push(CellResult {
            mechanism: parse_field::<Mechanism>(get(0), row, CSV_HEADER[0])?,
            outcome_model: parse_field(get(1), row, CSV_HEADER[1])?,
            strategy: parse_field(get(2), row, CSV_HEADER[2])?,
            method,
            n_reps: parse_field(get(6), row, CSV_HEADER[6])?,
            abs_bias: f(7)?,
            mae: f(8)?,
            rmse: f(9)?,
            mean_ess_treated: f(10)?,
            mean_ess_control: f(11)?,
            converged_fraction: f(12)?,
            mc_se: f(13)?,
        });
    }
    let table = aggregate_table(&cells);
    Ok(SimReport { cells, table })
}

fn render_block(out: &mut String, title: &str, table: &[TableRow], methods: &[MethodSpec], pick: fn(&crate::harness::TableEntry) -> f64) {
    let _ = writeln!(out, "### {title}\n");
    out.push_str("| Mechanism |");
    for m in methods {
        let _ = write!(out, " {} |", m.label());
    }
    out.push_str("\n|---|");
    for _ in methods {
        out.push_str("---:|");
    }
    out.push('\n');
    for row in table {
        let _ = write!(out, "| {} |", row.mechanism);
        for m in methods {
            match row.entries.iter().find(|(x, _)| x == m) {
                Some((_, e)) => {
                    let _ = write!(out, " {:.3} |", pick(e));
                }
                None => out.push_str(" |"),
            }
        }
        out.push('\n');
    }
    out.push('\n');
}

/// Mechanism rows × method columns, one block each for absolute bias,
/// mean absolute error and RMSE.
pub fn render_markdown(table: &[TableRow]) -> String {
    let mut methods: Vec<MethodSpec> = table.iter().flat_map(|r| r.entries.iter().map(|(m, _)| *m)).collect();
    methods.sort();
    methods.dedup();
    let mut out = String::from("## Simulation results\n\nEntries average the outcome-model and strategy cells of each mechanism.\n\n");
    render_block(&mut out, "Absolute bias |mean(τ̂) − θ|", table, &methods, |e| e.abs_bias);
    render_block(&mut out, "Mean absolute error mean|τ̂ − θ|", table, &methods, |e| e.mae);
    render_block(&mut out, "RMSE", table, &methods, |e| e.rmse);
    out
}
