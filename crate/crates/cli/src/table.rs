//! Numeric CSV tables with a header row.

use std::path::Path;

use crate::Failure;

pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, Failure> {
        Self::read_inner(path, None)
    }

    /// Like [`Table::read`], but empty cells in `column` become NaN.
    pub fn read_with_blanks(path: &Path, column: &str) -> Result<Self, Failure> {
        Self::read_inner(path, Some(column))
    }

    fn read_inner(path: &Path, blank_ok: Option<&str>) -> Result<Self, Failure> {
        let file = std::fs::File::open(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| Failure::from_csv(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Failure::from_csv(path, e))?;
            let row = rec
                .iter()
                .zip(&headers)
                .map(|(cell, col)| {
                    if cell.is_empty() && blank_ok == Some(col.as_str()) {
                        return Ok(f64::NAN);
                    }
                    cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                        Failure::usage(format!(
                            "{}: non-numeric cell at row {}, column `{col}`: {cell:?}",
                            path.display(),
                            i + 1
                        ))
                    })
                })
                .collect::<Result<Vec<f64>, Failure>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Failure::usage(format!("{}: no data rows", path.display())));
        }
        Ok(Self { headers, rows })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn require(&self, name: &str, path: &Path) -> Result<usize, Failure> {
        self.column_index(name)
            .ok_or_else(|| Failure::usage(format!("{}: missing column `{name}`", path.display())))
    }

    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[idx]).collect()
    }

    /// Every column except `skip`, with names.
    pub fn features_without(&self, skip: Option<usize>) -> (Vec<String>, Vec<Vec<f64>>) {
        let keep: Vec<usize> = (0..self.headers.len()).filter(|&j| Some(j) != skip).collect();
        let names = keep.iter().map(|&j| self.headers[j].clone()).collect();
        let rows = self.rows.iter().map(|r| keep.iter().map(|&j| r[j]).collect()).collect();
        (names, rows)
    }
}

/// Reads a single numeric column, header optional. Blank lines are skipped.
pub fn read_values(path: &Path) -> Result<Vec<f64>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let cell = line.trim();
        if cell.is_empty() {
            continue;
        }
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ if i == 0 && values.is_empty() => {}
            _ => {
                return Err(Failure::usage(format!(
                    "{}: line {} is not a finite number: {cell:?}",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    if values.is_empty() {
        return Err(Failure::usage(format!("{}: no values", path.display())));
    }
    Ok(values)
}
