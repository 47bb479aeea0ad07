use std::str::FromStr;

use super::convergence::{ConvergenceEstimator, ConvergenceSeries};
use super::run::{CellResult, SimMode, SimulationRun};
use crate::error::{Error, Result};
use crate::synthetic::InnovationDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Tsv,
    Markdown,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "tsv" => Ok(Self::Tsv),
            "markdown" | "md" => Ok(Self::Markdown),
            _ => Err(Error::UnknownFormat(s.to_string())),
        }
    }
}

fn rate4(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"))
}

const LONG_HEADER: [&str; 11] = [
    "case",
    "distribution",
    "p",
    "n_star",
    "test",
    "replications",
    "rejections",
    "degenerate",
    "rate",
    "theory_power",
    "clamped_eigenvalues",
];

fn long_rows(cell: &CellResult) -> Vec<Vec<String>> {
    cell.tallies
        .iter()
        .map(|t| {
            vec![
                cell.cell.case.as_str().to_string(),
                cell.cell.distribution.as_str().to_string(),
                cell.cell.p.to_string(),
                cell.cell.n_star.to_string(),
                t.test.as_str().to_string(),
                t.replications.to_string(),
                t.rejections.to_string(),
                t.degenerate.to_string(),
                rate4(t.rate()),
                cell.theory_power.map_or_else(String::new, |v| format!("{v:.4}")),
                cell.clamped_eigenvalues.to_string(),
            ]
        })
        .collect()
}

fn delimited(header: &[&str], rows: &[Vec<String>], delimiter: u8) -> Result<String> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(Vec::new());
    let io = |e: csv::Error| Error::Config(format!("table rendering failed: {e}"));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("table rendering failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("table text is UTF-8"))
}

fn markdown(header: &[String], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).chain([header[c].chars().count(), 3]).max().unwrap_or(3))
        .collect();
    let line = |cells: &[String]| {
        let body: Vec<String> = cells.iter().zip(&widths).map(|(c, &w)| format!("{c:>w$}")).collect();
        format!("| {} |\n", body.join(" | "))
    };
    let mut out = line(header);
    let rule: Vec<String> = widths.iter().map(|&w| format!("{}:", "-".repeat(w - 1))).collect();
    out.push_str(&format!("| {} |\n", rule.join(" | ")));
    for r in rows {
        out.push_str(&line(r));
    }
    out
}

/// Markdown in the layout of the published tables: rows `(p, n*)` with `p`
/// printed once per block, a column block per distribution and a sub-column
/// per test.
fn wide_markdown(run: &SimulationRun) -> String {
    let mut dists: Vec<InnovationDistribution> = Vec::new();
    for c in &run.cells {
        if !dists.contains(&c.cell.distribution) {
            dists.push(c.cell.distribution);
        }
    }
    let theory = run.mode == SimMode::Power;
    let mut header = vec!["p".to_string(), "n*".to_string()];
    for d in &dists {
        for t in &run.tests {
            header.push(format!("{} {}", d.as_str(), t.column()));
        }
        if theory {
            header.push(format!("{} theory", d.as_str()));
        }
    }
    let mut keys: Vec<(usize, usize)> = Vec::new();
    for c in &run.cells {
        let key = (c.cell.p, c.cell.n_star);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut rows = Vec::new();
    let mut last_p = None;
    for (p, n_star) in keys {
        let mut row = vec![if last_p == Some(p) { String::new() } else { p.to_string() }, n_star.to_string()];
        last_p = Some(p);
        for d in &dists {
            let cell = run.cells.iter().find(|c| c.cell.p == p && c.cell.n_star == n_star && c.cell.distribution == *d);
            for t in &run.tests {
                row.push(cell.map_or_else(String::new, |c| rate4(c.rate(*t))));
            }
            if theory {
                row.push(cell.and_then(|c| c.theory_power).map_or_else(String::new, |v| format!("{v:.4}")));
            }
        }
        rows.push(row);
    }
    markdown(&header, &rows)
}

/// Renders a size or power run. CSV and TSV have one row per cell and
/// test; markdown follows the published table layout.
pub fn emit_table(run: &SimulationRun, format: Format) -> Result<String> {
    if run.cells.is_empty() {
        return Err(Error::Config("no results to render".into()));
    }
    let rows: Vec<Vec<String>> = run.cells.iter().flat_map(long_rows).collect();
    match format {
        Format::Csv => delimited(&LONG_HEADER, &rows, b','),
        Format::Tsv => delimited(&LONG_HEADER, &rows, b'\t'),
        Format::Markdown => Ok(wide_markdown(run)),
    }
}

const SERIES_HEADER: [&str; 7] = ["case", "distribution", "p", "n", "truth", "mean_error", "rmse"];

/// One estimator's series as `(n, value)` rows for plotting.
pub fn emit_convergence(
    series: &[ConvergenceSeries],
    estimator: ConvergenceEstimator,
    format: Format,
) -> Result<String> {
    let mut rows = Vec::new();
    for s in series.iter().filter(|s| s.estimator == estimator) {
        for (i, n) in s.n_grid.iter().enumerate() {
            rows.push(vec![
                s.case.as_str().to_string(),
                s.distribution.as_str().to_string(),
                s.p.to_string(),
                n.to_string(),
                s.truth.to_string(),
                s.mean_error[i].to_string(),
                s.rmse[i].to_string(),
            ]);
        }
    }
    if rows.is_empty() {
        return Err(Error::Config(format!("no series for estimator {}", estimator.as_str())));
    }
    match format {
        Format::Csv => delimited(&SERIES_HEADER, &rows, b','),
        Format::Tsv => delimited(&SERIES_HEADER, &rows, b'\t'),
        Format::Markdown => Ok(markdown(&SERIES_HEADER.map(String::from), &rows)),
    }
}
