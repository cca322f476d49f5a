//! Trajectory CSV: header `t,x1..xn,u1..um`, one row per state, input
//! columns empty on the final row. Values are written with 17 significant
//! digits so a parse/write round trip is exact.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lti::DataSet;

pub fn trajectory_header(n: usize, m: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("x{i}")));
    cols.extend((1..=m).map(|i| format!("u{i}")));
    cols.join(",")
}

fn push_value(s: &mut String, v: f64) {
    let _ = write!(s, ",{v:.16e}");
}

/// Serializes `T + 1` states and `T` inputs.
pub fn write_trajectory(states: &DMatrix<f64>, inputs: &DMatrix<f64>) -> Result<String> {
    let n = states.nrows();
    let m = inputs.nrows();
    if states.ncols() != inputs.ncols() + 1 {
        return Err(Error::Dimension {
            operand: "trajectory",
            expected: format!("{} states for {} inputs", inputs.ncols() + 1, inputs.ncols()),
            actual: format!("{} states", states.ncols()),
        });
    }
    let mut s = trajectory_header(n, m);
    s.push('\n');
    for t in 0..states.ncols() {
        let _ = write!(s, "{t}");
        for i in 0..n {
            push_value(&mut s, states[(i, t)]);
        }
        for i in 0..m {
            if t < inputs.ncols() {
                push_value(&mut s, inputs[(i, t)]);
            } else {
                s.push(',');
            }
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn write_trajectory_vecs(states: &[DVector<f64>], inputs: &[DVector<f64>], n: usize, m: usize) -> Result<String> {
    let x = DMatrix::from_fn(n, states.len(), |i, t| states[t][i]);
    let u = DMatrix::from_fn(m, inputs.len(), |i, t| inputs[t][i]);
    write_trajectory(&x, &u)
}

pub fn write_dataset(data: &DataSet) -> String {
    write_trajectory(data.states(), data.inputs()).expect("a DataSet has one more state than inputs")
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Invalid(format!("trajectory CSV line {line}: {msg}"))
}

/// Parses a trajectory CSV into `(states, inputs)`.
pub fn parse_trajectory(text: &str) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"t") {
        return Err(parse_err(1, "first column must be 't'"));
    }
    let n = cols.iter().filter(|c| c.starts_with('x')).count();
    let m = cols.iter().filter(|c| c.starts_with('u')).count();
    if n == 0 || cols.len() != 1 + n + m || cols[1..=n].iter().enumerate().any(|(i, c)| *c != format!("x{}", i + 1)) {
        return Err(parse_err(
            1,
            format!("expected header '{}'", trajectory_header(n.max(1), m)),
        ));
    }

    let mut xs: Vec<f64> = Vec::new();
    let mut us: Vec<f64> = Vec::new();
    let mut rows = 0;
    let mut ended = false;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if ended {
            return Err(parse_err(lineno, "row after the final (input-free) row"));
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 1 + n + m {
            return Err(parse_err(
                lineno,
                format!("expected {} fields, found {}", 1 + n + m, fields.len()),
            ));
        }
        let t: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad time index '{}'", fields[0])))?;
        if t != rows {
            return Err(parse_err(lineno, format!("expected t = {rows}, found {t}")));
        }
        for (k, f) in fields[1..=n].iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad value '{f}' in column x{}", k + 1)))?;
            xs.push(v);
        }
        let input_fields = &fields[1 + n..];
        if input_fields.iter().all(|f| f.is_empty()) {
            ended = true;
        } else {
            for (k, f) in input_fields.iter().enumerate() {
                let v: f64 = f
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad value '{f}' in column u{}", k + 1)))?;
                us.push(v);
            }
        }
        rows += 1;
    }
    if !ended {
        return Err(parse_err(rows + 1, "missing final row with empty inputs"));
    }
    let x = DMatrix::from_column_slice(n, rows, &xs);
    let u = DMatrix::from_column_slice(m, rows - 1, &us);
    Ok((x, u))
}

pub fn parse_dataset(text: &str, eps: f64) -> Result<DataSet> {
    let (x, u) = parse_trajectory(text)?;
    DataSet::new(x, u, eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_byte_identical() {
        let x = DMatrix::from_row_slice(2, 3, &[0.1, 1.0 / 3.0, -2.5e-7, 1e300, 0.0, -0.0]);
        let u = DMatrix::from_row_slice(1, 2, &[std::f64::consts::PI, -10.0]);
        let text = write_trajectory(&x, &u).unwrap();
        let (x2, u2) = parse_trajectory(&text).unwrap();
        assert_eq!(x, x2);
        assert_eq!(u, u2);
        assert_eq!(write_trajectory(&x2, &u2).unwrap(), text);
    }

    #[test]
    fn format_has_empty_final_inputs() {
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let u = DMatrix::from_row_slice(2, 1, &[3.0, 4.0]);
        let text = write_trajectory(&x, &u).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x1,u1,u2");
        assert_eq!(
            lines[1],
            "0,1.0000000000000000e0,3.0000000000000000e0,4.0000000000000000e0"
        );
        assert_eq!(lines[2], "1,2.0000000000000000e0,,");
    }

    #[test]
    fn errors_name_the_line() {
        let bad = "t,x1,u1\n0,1.0,2.0\n1,abc,\n";
        let err = parse_trajectory(bad).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("x1"), "{err}");
        let err = parse_trajectory("t,x1,u1\n0,1.0,2.0\n").unwrap_err().to_string();
        assert!(err.contains("missing final row"), "{err}");
        let err = parse_trajectory("t,x1,u1\n0,1.0\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(write_trajectory(&DMatrix::zeros(2, 3), &DMatrix::zeros(1, 3)).is_err());
    }
}
