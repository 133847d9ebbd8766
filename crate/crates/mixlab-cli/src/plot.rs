//! Projection of results CSVs into two-column plot data files.

use crate::CliError;
use std::path::{Path, PathBuf};

pub fn emit(results: &Path, kind: &str, out: Option<PathBuf>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(results)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", results.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Validation("empty results file".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    let rows: Vec<Vec<String>> = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();

    let col = |name: &str| -> Result<usize, CliError> {
        columns.iter().position(|c| *c == name).ok_or_else(|| {
            CliError::Validation(format!(
                "results file lacks column `{name}` required by kind `{kind}`"
            ))
        })
    };
    let num = |row: &[String], idx: usize| -> Result<f64, CliError> {
        row.get(idx)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| CliError::Validation(format!("non-numeric cell in column {idx}")))
    };

    let (header_line, mut body) = match kind {
        "decay" => {
            let (cm, ce, cc) = (col("M_hat")?, col("abs_error")?, col("coupling")?);
            let (cs,) = (col("stderr")?,);
            let mut out_rows = Vec::new();
            for row in &rows {
                if row[cc] == "fit" {
                    continue;
                }
                let (m, e, s) = (num(row, cm)?, num(row, ce)?, num(row, cs)?);
                // Only records above the noise floor are plottable in logs.
                if e > 2.0 * s && e > 0.0 && m > 0.0 {
                    out_rows.push(format!("{} {}", m.ln(), e.ln()));
                }
            }
            ("# log_M_hat log_abs_error".to_string(), out_rows)
        }
        "et" => {
            let (ck, ct, cv) = (col("kind")?, col("T")?, col("value")?);
            let mut out_rows = Vec::new();
            for row in &rows {
                if row[ck] != "et" {
                    continue;
                }
                let (t, v) = (num(row, ct)?, num(row, cv)?);
                if t > 0.0 && v > 0.0 {
                    out_rows.push(format!("{} {}", t.ln(), v.ln()));
                }
            }
            ("# log_T log_E_T".to_string(), out_rows)
        }
        "density" => {
            let (ce, cg) = (col("epsilon")?, col("max_gap")?);
            let mut out_rows = Vec::new();
            for row in &rows {
                out_rows.push(format!("{} {}", num(row, ce)?, num(row, cg)?));
            }
            ("# epsilon max_gap".to_string(), out_rows)
        }
        "scheduler" => {
            let (ck, ci, cg) = (col("kind")?, col("i")?, col("grid_point")?);
            let (ca, cb) = (col("w_above")?, col("w_below")?);
            let mut out_rows = Vec::new();
            for row in &rows {
                if row[ck] != "grid" {
                    continue;
                }
                out_rows.push(format!(
                    "{} {} {} {}",
                    row[ci],
                    num(row, cg)?,
                    row[ca],
                    row[cb]
                ));
            }
            ("# i grid_point weights_at_or_above weights_below".to_string(), out_rows)
        }
        other => {
            return Err(CliError::Validation(format!(
                "unknown plot kind `{other}` (expected decay, et, density, or scheduler)"
            )))
        }
    };

    let out_path = out.unwrap_or_else(|| {
        let stem = results.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
        results.with_file_name(format!("{stem}.{kind}.plot"))
    });
    let mut text = header_line;
    text.push('\n');
    if body.is_empty() {
        eprintln!("warning: no usable rows for plot kind `{kind}`");
    }
    for line in body.drain(..) {
        text.push_str(&line);
        text.push('\n');
    }
    std::fs::write(&out_path, text)?;
    println!("{}", out_path.display());
    Ok(())
}
