//! Aggregation of result CSVs into mean ± standard-error tables.
//!
//! Pure arithmetic over already-written rows: no randomness, no re-running.
//! Rows group by (scenario, model_id, T, decay, budget); NaN values count as
//! estimator faults and are excluded from the moments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::runner::CSV_HEADER;
use crate::HarnessError;

/// One aggregated sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub scenario: String,
    pub model_id: String,
    pub t: usize,
    pub decay: String,
    pub budget: u64,
    /// Rows aggregated (including faulted ones).
    pub n: usize,
    /// Rows whose value was NaN.
    pub faults: usize,
    pub mean: f64,
    pub stderr: f64,
}

/// Aggregates one or more result CSVs. All files must carry the exact
/// harness schema.
pub fn compare_report(paths: &[impl AsRef<Path>]) -> Result<Vec<ReportRow>, HarnessError> {
    let mut groups: BTreeMap<(String, String, usize, String, u64), Vec<f64>> = BTreeMap::new();

    for path in paths {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| HarnessError::Csv(format!("{}: {e}", path.display())))?;

        let header = reader
            .headers()
            .map_err(|e| HarnessError::Csv(format!("{}: {e}", path.display())))?
            .iter()
            .collect::<Vec<_>>()
            .join(",");
        if header != CSV_HEADER {
            return Err(HarnessError::Csv(format!(
                "{}: header {header:?} does not match {CSV_HEADER:?}",
                path.display()
            )));
        }

        for record in reader.records() {
            let record =
                record.map_err(|e| HarnessError::Csv(format!("{}: {e}", path.display())))?;
            let field = |i: usize| record.get(i).unwrap_or_default().to_string();
            let parse_err = |col: &str| {
                HarnessError::Csv(format!(
                    "{}: bad {col} in record {:?}",
                    path.display(),
                    record
                ))
            };
            let t: usize = field(2).parse().map_err(|_| parse_err("T"))?;
            let budget: u64 = field(4).parse().map_err(|_| parse_err("budget"))?;
            let value: f64 = field(7).parse().map_err(|_| parse_err("value"))?;
            groups
                .entry((field(0), field(1), t, field(3), budget))
                .or_default()
                .push(value);
        }
    }

    Ok(groups
        .into_iter()
        .map(|((scenario, model_id, t, decay, budget), values)| {
            let clean: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
            let (mean, stderr) = mean_stderr(&clean);
            ReportRow {
                scenario,
                model_id,
                t,
                decay,
                budget,
                n: values.len(),
                faults: values.len() - clean.len(),
                mean,
                stderr,
            }
        })
        .collect())
}

/// Sample mean and standard error; a single observation has stderr 0.
fn mean_stderr(values: &[f64]) -> (f64, f64) {
    match values.len() {
        0 => (f64::NAN, f64::NAN),
        1 => (values[0], 0.0),
        n => {
            let count = n as f64;
            let mean = values.iter().sum::<f64>() / count;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
            (mean, (var / count).sqrt())
        }
    }
}

/// Renders an aligned text table.
pub fn format_table(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<18} {:<12} {:>6} {:<12} {:>9} {:>4} {:>6} {:>12} {:>12}",
        "scenario", "model_id", "T", "decay", "budget", "n", "faults", "mean", "stderr"
    )
    .unwrap();
    for r in rows {
        writeln!(
            out,
            "{:<18} {:<12} {:>6} {:<12} {:>9} {:>4} {:>6} {:>12.6} {:>12.6}",
            r.scenario, r.model_id, r.t, r.decay, r.budget, r.n, r.faults, r.mean, r.stderr
        )
        .unwrap();
    }
    out
}
