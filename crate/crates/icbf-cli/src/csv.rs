//! Trajectory CSV emission and (for round-trip validation) parsing.
//!
//! Columns are fixed: `t, x1..xn, u1..um, h_x, h_u, h_e, d_e, d_u,
//! v_norm, active_x, active_u, feasible`. A channel the producing run
//! did not record is written as an empty field, keeping the header
//! identical across controller variants. Floats use the shortest
//! decimal representation that parses back to the identical bits, so a
//! reread reproduces the stored values exactly.

use std::fmt::Write as _;

use icbf::integrator::Trajectory;

/// Diagnostic channels in emission order, after the state and input
/// columns.
pub const DIAGNOSTIC_COLUMNS: &[&str] =
    &["h_x", "h_u", "h_e", "d_e", "d_u", "v_norm", "active_x", "active_u", "feasible"];

pub fn header(n: usize, m: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("x{i}")));
    cols.extend((1..=m).map(|i| format!("u{i}")));
    cols.extend(DIAGNOSTIC_COLUMNS.iter().map(|s| s.to_string()));
    cols.join(",")
}

/// Render the trajectory as CSV text.
pub fn render_trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.states.first().map_or(0, |z| z.x.len());
    let m = traj.states.first().map_or(0, |z| z.u.len());
    let channels: Vec<Option<&Vec<f64>>> =
        DIAGNOSTIC_COLUMNS.iter().map(|name| traj.aux.get(*name)).collect();
    let mut out = String::new();
    out.push_str(&header(n, m));
    out.push('\n');
    for (k, z) in traj.states.iter().enumerate() {
        write!(out, "{}", traj.times[k]).unwrap();
        for v in z.x.iter().chain(&z.u) {
            write!(out, ",{v}").unwrap();
        }
        for ch in &channels {
            match ch {
                Some(values) => write!(out, ",{}", values[k]).unwrap(),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_trajectory_csv(traj: &Trajectory, path: &std::path::Path) -> std::io::Result<()> {
    std::fs::write(path, render_trajectory_csv(traj))
}

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("empty input")]
    Empty,
    #[error("header must start with 't', got {0:?}")]
    BadHeader(String),
    #[error("row {row}: expected {expected} fields, got {got}")]
    FieldCount { row: usize, expected: usize, got: usize },
    #[error("row {row}, column {column:?}: unparseable number {text:?}")]
    BadNumber { row: usize, column: String, text: String },
}

/// A reread trajectory file: header names plus rows of optional values
/// (`None` for the empty fields of unrecorded channels).
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedCsv {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

pub fn parse_trajectory_csv(text: &str) -> Result<ParsedCsv, CsvError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(CsvError::Empty)?;
    let columns: Vec<String> = header.split(',').map(|s| s.to_string()).collect();
    if columns.first().map(String::as_str) != Some("t") {
        return Err(CsvError::BadHeader(header.chars().take(80).collect()));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let row = idx + 2;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(CsvError::FieldCount { row, expected: columns.len(), got: fields.len() });
        }
        let mut parsed = Vec::with_capacity(fields.len());
        for (field, column) in fields.iter().zip(&columns) {
            if field.is_empty() {
                parsed.push(None);
            } else {
                let v = field.parse::<f64>().map_err(|_| CsvError::BadNumber {
                    row,
                    column: column.clone(),
                    text: field.to_string(),
                })?;
                parsed.push(Some(v));
            }
        }
        rows.push(parsed);
    }
    Ok(ParsedCsv { columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use icbf::integrator::{simulate, ClosedLoopField, Probe};
    use icbf::types::AugmentedState;

    fn zero_traj(steps: usize) -> Trajectory {
        let rhs = ClosedLoopField::new(|_z: &AugmentedState, _| Ok((vec![0.0; 2], vec![0.0])));
        let z0 = AugmentedState::new(vec![0.0, 0.0], vec![0.0]);
        simulate(&rhs, &z0, steps as f64, 1.0, &[]).unwrap()
    }

    #[test]
    fn zero_trajectory_layout() {
        let text = render_trajectory_csv(&zero_traj(3));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5); // header + 4 samples (t = 0..=3)
        assert_eq!(
            lines[0],
            "t,x1,x2,u1,h_x,h_u,h_e,d_e,d_u,v_norm,active_x,active_u,feasible"
        );
        assert_eq!(lines[1], "0,0,0,0,,,,,,,,,");
    }

    #[test]
    fn round_trip_is_exact() {
        let rhs = ClosedLoopField::new(|z: &AugmentedState, _| {
            Ok((vec![-z.x[0] + 0.3, z.x[0] * z.x[1]], vec![0.1]))
        });
        let z0 = AugmentedState::new(vec![1.0, 0.5], vec![-0.25]);
        let probes = vec![Probe::new("h_x", |z: &AugmentedState, _| z.x[0] * 3.0)];
        let traj = simulate(&rhs, &z0, 1.0, 0.01, &probes).unwrap();
        let text = render_trajectory_csv(&traj);
        let parsed = parse_trajectory_csv(&text).unwrap();
        assert_eq!(parsed.rows.len(), traj.len());
        for (k, row) in parsed.rows.iter().enumerate() {
            assert_eq!(row[0], Some(traj.times[k]));
            assert_eq!(row[1], Some(traj.states[k].x[0]));
            assert_eq!(row[2], Some(traj.states[k].x[1]));
            assert_eq!(row[3], Some(traj.states[k].u[0]));
            assert_eq!(row[4], Some(traj.aux["h_x"][k]));
            assert!(row[5..].iter().all(Option::is_none));
        }
    }

    #[test]
    fn rerender_of_parse_is_byte_identical() {
        let traj = zero_traj(2);
        let text = render_trajectory_csv(&traj);
        let parsed = parse_trajectory_csv(&text).unwrap();
        let mut rebuilt = parsed.columns.join(",") + "\n";
        for row in &parsed.rows {
            let fields: Vec<String> = row
                .iter()
                .map(|v| v.map(|x| x.to_string()).unwrap_or_default())
                .collect();
            rebuilt.push_str(&fields.join(","));
            rebuilt.push('\n');
        }
        assert_eq!(text, rebuilt);
    }

    #[test]
    fn field_count_mismatch_reported() {
        let err = parse_trajectory_csv("t,x1\n0,1\n0.5,2,3\n").unwrap_err();
        assert!(matches!(err, CsvError::FieldCount { row: 3, expected: 2, got: 3 }), "{err}");
    }

    #[test]
    fn bad_number_names_column() {
        let err = parse_trajectory_csv("t,x1\n0,abc\n").unwrap_err();
        assert!(err.to_string().contains("x1"), "{err}");
    }

    #[test]
    fn missing_header_rejected() {
        assert!(matches!(parse_trajectory_csv(""), Err(CsvError::Empty)));
        assert!(matches!(parse_trajectory_csv("a,b\n"), Err(CsvError::BadHeader(_))));
    }
}
