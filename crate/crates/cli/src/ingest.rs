//! CSV ingestion with listwise deletion.

use std::path::Path;

use brse_core::Dataset;

use crate::error::{CliError, Result};

/// Cells treated as missing.
const MISSING: [&str; 5] = ["", "NA", "N/A", "NaN", "."];

/// Which columns feed the model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Formula {
    pub outcome: Option<String>,
    /// Columns averaged into the outcome; overrides `outcome`.
    pub average: Vec<String>,
    pub covariates: Vec<String>,
    pub intercept: bool,
    /// Survival data: observed time and event indicator.
    pub time: Option<String>,
    pub event: Option<String>,
}

impl Formula {
    pub fn regression(outcome: &str, covariates: &[&str]) -> Self {
        Self {
            outcome: Some(outcome.to_string()),
            covariates: covariates.iter().map(|c| c.to_string()).collect(),
            intercept: true,
            ..Self::default()
        }
    }

    pub fn is_survival(&self) -> bool {
        self.time.is_some() || self.event.is_some()
    }

    /// Coefficient labels in design-column order.
    pub fn terms(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.intercept {
            out.push("(Intercept)".to_string());
        }
        out.extend(self.covariates.iter().cloned());
        out
    }

    fn outcome_label(&self) -> String {
        if self.average.is_empty() {
            self.outcome.clone().unwrap_or_default()
        } else {
            format!("mean({})", self.average.join(","))
        }
    }

    fn validate(&self) -> Result<()> {
        if self.is_survival() {
            if self.time.is_none() || self.event.is_none() {
                return Err(CliError::Usage("survival models need both --time and --event".into()));
            }
        } else {
            match (&self.outcome, self.average.len()) {
                (_, 1) => return Err(CliError::Usage("--average needs at least two columns".into())),
                (None, 0) => return Err(CliError::Usage("exactly one outcome column is required (--outcome)".into())),
                _ => {}
            }
        }
        if !self.intercept && self.covariates.is_empty() {
            return Err(CliError::Usage("the model has no columns: add covariates or keep the intercept".into()));
        }
        Ok(())
    }
}

/// One row removed by listwise deletion.
#[derive(Clone, Debug, PartialEq)]
pub struct DroppedRow {
    /// 1-based data row; the header is row 0.
    pub row: usize,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct Ingested {
    pub data: Dataset,
    pub terms: Vec<String>,
    pub outcome: String,
    pub dropped: Vec<DroppedRow>,
}

impl Ingested {
    pub fn warnings(&self) -> Vec<String> {
        self.dropped
            .iter()
            .map(|d| format!("dropped row {}: {}", d.row, d.reason))
            .collect()
    }
}

enum Cell {
    Value(f64),
    Missing,
    Bad(String),
}

fn parse_cell(s: &str) -> Cell {
    let t = s.trim();
    if MISSING.contains(&t) {
        return Cell::Missing;
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Cell::Value(v),
        _ => Cell::Bad(t.to_string()),
    }
}

fn parse_event(s: &str) -> Cell {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Cell::Value(1.0),
        "0" | "false" | "no" => Cell::Value(0.0),
        _ => match parse_cell(s) {
            Cell::Value(v) => Cell::Bad(v.to_string()),
            c => c,
        },
    }
}

pub fn ingest_csv(path: &Path, formula: &Formula, strict: bool) -> Result<Ingested> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::io(format!("cannot open {}", path.display()), e))?;
    ingest_reader(file, formula, strict)
}

pub fn ingest_reader<R: std::io::Read>(reader: R, formula: &Formula, strict: bool) -> Result<Ingested> {
    formula.validate()?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("cannot read CSV header: {e}")))?
        .clone();
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("column '{name}' not found in the CSV header")))
    };
    let outcome_cols: Vec<usize> = if formula.is_survival() {
        Vec::new()
    } else if formula.average.is_empty() {
        vec![column(formula.outcome.as_deref().unwrap_or_default())?]
    } else {
        formula.average.iter().map(|c| column(c)).collect::<Result<_>>()?
    };
    let cov_cols: Vec<usize> = formula.covariates.iter().map(|c| column(c)).collect::<Result<_>>()?;
    let time_col = formula.time.as_deref().map(column).transpose()?;
    let event_col = formula.event.as_deref().map(column).transpose()?;

    let mut y = Vec::new();
    let mut events = Vec::new();
    let mut x = Vec::new();
    let mut dropped = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| CliError::Data(format!("row {row}: {e}")))?;
        let mut values = Vec::new();
        let mut problem = None;
        let mut cells: Vec<(usize, bool)> = outcome_cols.iter().map(|&c| (c, false)).collect();
        cells.extend(time_col.map(|c| (c, false)));
        cells.extend(event_col.map(|c| (c, true)));
        cells.extend(cov_cols.iter().map(|&c| (c, false)));
        for (c, is_event) in cells {
            let raw = rec.get(c).unwrap_or("");
            let cell = if is_event { parse_event(raw) } else { parse_cell(raw) };
            match cell {
                Cell::Value(v) => values.push(v),
                Cell::Missing => {
                    problem.get_or_insert(format!("missing value in column '{}'", &header[c]));
                }
                Cell::Bad(s) => {
                    let msg = format!("non-numeric value '{s}' in column '{}'", &header[c]);
                    if strict {
                        return Err(CliError::Data(format!("row {row}: {msg}")));
                    }
                    problem.get_or_insert(msg);
                }
            }
        }
        if let Some(reason) = problem {
            dropped.push(DroppedRow { row, reason });
            continue;
        }
        let mut v = values.into_iter();
        if formula.is_survival() {
            y.push(v.next().unwrap_or_default());
            events.push(v.next().unwrap_or_default() == 1.0);
        } else {
            let k = outcome_cols.len() as f64;
            y.push(v.by_ref().take(outcome_cols.len()).sum::<f64>() / k);
        }
        if formula.intercept {
            x.push(1.0);
        }
        x.extend(v);
    }
    if y.is_empty() {
        return Err(CliError::Data(format!(
            "no usable rows ({} dropped)",
            dropped.len()
        )));
    }
    let p = formula.terms().len();
    let data = if formula.is_survival() {
        Dataset::survival_flat(y, events, x, p)
    } else {
        Dataset::from_flat(y, x, p)
    }
    .map_err(|e| CliError::Data(e.to_string()))?;
    Ok(Ingested {
        data,
        terms: formula.terms(),
        outcome: formula.outcome_label(),
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, f: &Formula) -> Result<Ingested> {
        ingest_reader(text.as_bytes(), f, false)
    }

    #[test]
    fn event_tokens() {
        assert!(matches!(parse_event("TRUE"), Cell::Value(v) if v == 1.0));
        assert!(matches!(parse_event("2"), Cell::Bad(_)));
        assert!(matches!(parse_event("NA"), Cell::Missing));
    }

    #[test]
    fn averages_two_columns() {
        let f = Formula {
            average: vec!["a".into(), "b".into()],
            covariates: vec!["x".into()],
            intercept: true,
            ..Formula::default()
        };
        let got = read("a,b,x\n100,110,1\n120,124,2\n", &f).unwrap();
        assert_eq!(got.data.y(), &[105.0, 122.0]);
        assert_eq!(got.outcome, "mean(a,b)");
    }

    #[test]
    fn survival_columns() {
        let f = Formula {
            covariates: vec!["z".into()],
            intercept: true,
            time: Some("t".into()),
            event: Some("d".into()),
            ..Formula::default()
        };
        let got = read("t,d,z\n1.5,1,0.2\n10,0,-1\n", &f).unwrap();
        assert_eq!(got.data.event_count(), Some(1));
        assert_eq!(got.data.x_row(1), &[1.0, -1.0]);
    }

    #[test]
    fn usage_errors() {
        let f = Formula {
            covariates: vec!["x".into()],
            ..Formula::default()
        };
        assert!(matches!(read("y,x\n1,2\n", &f), Err(CliError::Usage(_))));
    }
}
