//! Scan CSV files. Angles are written in degrees; floats use shortest
//! round-trip formatting so values read back bit-identical.

use std::path::Path;

use skybell_core::scenarios::{ScanResult, ScanRow, Scenario};

use crate::error::{CliError, CliResult};

pub const COLUMNS: [&str; 7] = ["theta_a", "theta_b", "E", "E_signal", "E_background", "w_signal", "w_background"];
pub const MC_COLUMNS: [&str; 2] = ["E_stderr", "n"];

/// Writes `scan`; `grid_deg` gives the angle labels of a row-major
/// `grid_a × grid_b` scan exactly as requested, otherwise they are
/// converted back from the rows.
pub fn write(path: &Path, scan: &ScanResult, grid_deg: Option<(&[f64], &[f64])>) -> CliResult<()> {
    if let Some((ga, gb)) = grid_deg {
        assert_eq!(ga.len() * gb.len(), scan.rows.len(), "grid labels must cover the scan");
    }
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(err) => CliError::io(path, err),
        other => CliError::io(path, std::io::Error::other(format!("{other:?}"))),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let monte_carlo = scan.rows.iter().any(|r| r.e_stderr.is_some());
    let mut header: Vec<&str> = COLUMNS.to_vec();
    if monte_carlo {
        header.extend(MC_COLUMNS);
    }
    w.write_record(&header).map_err(io)?;
    for (k, r) in scan.rows.iter().enumerate() {
        let (ta, tb) = match grid_deg {
            Some((ga, gb)) => (ga[k / gb.len()], gb[k % gb.len()]),
            None => (r.theta_a.to_degrees(), r.theta_b.to_degrees()),
        };
        let mut rec = vec![
            ta.to_string(),
            tb.to_string(),
            r.e.to_string(),
            r.e_signal.to_string(),
            r.e_background.to_string(),
            r.w_signal.to_string(),
            r.w_background.to_string(),
        ];
        if monte_carlo {
            rec.push(r.e_stderr.map(|s| s.to_string()).unwrap_or_default());
            rec.push(r.n.map(|n| n.to_string()).unwrap_or_default());
        }
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read(path: &Path, scenario: Scenario) -> CliResult<ScanResult> {
    let schema = |msg: String| CliError::config(format!("{}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(err) => CliError::io(path, err),
        other => schema(format!("{other:?}")),
    })?;
    let header: Vec<String> =
        rdr.headers().map_err(|e| schema(format!("unreadable header: {e}")))?.iter().map(str::to_owned).collect();
    if header.len() < COLUMNS.len() || header[..COLUMNS.len()] != COLUMNS {
        return Err(schema(format!(
            "schema mismatch: header must start with `{}`, found `{}`",
            COLUMNS.join(","),
            header.join(",")
        )));
    }
    let stderr_col = header.iter().position(|h| h == MC_COLUMNS[0]);
    let n_col = header.iter().position(|h| h == MC_COLUMNS[1]);

    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| schema(format!("line {line}: {e}")))?;
        let num = |col: usize| -> CliResult<f64> {
            let raw = rec.get(col).unwrap_or("");
            raw.trim()
                .parse::<f64>()
                .map_err(|_| schema(format!("line {line}, column `{}`: `{raw}` is not a number", header[col])))
        };
        let optional = |col: Option<usize>| -> CliResult<Option<f64>> {
            match col {
                Some(c) if !rec.get(c).unwrap_or("").trim().is_empty() => num(c).map(Some),
                _ => Ok(None),
            }
        };
        rows.push(ScanRow {
            theta_a: num(0)?.to_radians(),
            theta_b: num(1)?.to_radians(),
            e: num(2)?,
            e_signal: num(3)?,
            e_background: num(4)?,
            w_signal: num(5)?,
            w_background: num(6)?,
            e_stderr: optional(stderr_col)?,
            n: optional(n_col)?.map(|n| n as u64),
        });
    }
    if rows.is_empty() {
        return Err(schema("no data rows".to_owned()));
    }
    Ok(ScanResult { scenario, rows })
}
