//! Reading labelled observations from CSV.

use std::path::Path;

use hdmt_core::MultiGroupDataset;

use crate::CliError;

/// A validated dataset plus the coordinate names used in diagnostics.
pub struct Input {
    pub dataset: MultiGroupDataset,
    pub columns: Vec<String>,
}

impl Input {
    /// Name of a 0-based coordinate: the header entry if there was one.
    pub fn column(&self, coordinate: usize) -> String {
        match self.columns.get(coordinate) {
            Some(name) => format!("coordinate {} (`{name}`)", coordinate + 1),
            None => format!("coordinate {}", coordinate + 1),
        }
    }
}

/// Reads `group,x1,...,xp` rows. The first row is a header when its second
/// field is not a number, unless `no_header` is set.
pub fn read_csv(path: &Path, no_header: bool) -> Result<Input, CliError> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::data(format!("cannot read `{}`: {}", path.display(), io_message(&e))))?;

    let mut columns = Vec::new();
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    for (idx, record) in rd.records().enumerate() {
        let record = record.map_err(|e| CliError::data(format!("`{}`: {}", path.display(), io_message(&e))))?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if idx == 0 && !no_header && record.get(1).is_some_and(|f| f.parse::<f64>().is_err()) {
            columns = record.iter().skip(1).map(str::to_string).collect();
            continue;
        }
        if record.len() < 2 {
            return Err(CliError::data(format!("line {line}: expected a group label and at least one value")));
        }
        let values = record
            .iter()
            .enumerate()
            .skip(1)
            .map(|(c, f)| {
                f.parse::<f64>()
                    .map_err(|_| CliError::data(format!("line {line}, column {}: `{f}` is not a number", c + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((record[0].to_string(), values));
    }
    if rows.is_empty() {
        return Err(CliError::data(format!("`{}` contains no observations", path.display())));
    }
    let dataset = hdmt_core::validate_dataset(&rows).map_err(CliError::from)?;
    Ok(Input { dataset, columns })
}

fn io_message(e: &csv::Error) -> String {
    e.to_string().replace('\n', " ")
}
