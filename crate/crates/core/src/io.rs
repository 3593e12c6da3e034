// SPDX-License-Identifier: Apache-2.0

//! Control files: CSV with a `time,u_1,..,u_m` header on a uniform grid.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::integrator::{ControlSignal, TimeGrid};

/// Relative tolerance on the spacing of the time column.
pub const GRID_TOL: f64 = 1e-9;

pub fn write_control_csv<W: Write>(writer: W, control: &ControlSignal) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let m = control.n_channels();
    let mut header = vec!["time".to_string()];
    header.extend((1..=m).map(|k| format!("u_{k}")));
    w.write_record(&header)?;
    let grid = control.grid();
    for node in 0..grid.n_nodes() {
        let mut row = vec![format!("{:e}", grid.time(node))];
        row.extend((0..m).map(|k| format!("{:e}", control.value(k, node))));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<control>", e))?;
    Ok(())
}

pub fn save_control(path: &Path, control: &ControlSignal) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_control_csv(std::io::BufWriter::new(file), control)
}

/// Parses a control file. Rows are numbered from 1 after the header.
pub fn read_control_csv<R: Read>(reader: R) -> Result<ControlSignal> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = r.headers()?.clone();
    let m = header.len().saturating_sub(1);
    if header.get(0) != Some("time") || m == 0 {
        return Err(Error::ControlFile {
            row: 0,
            message: "header must be `time,u_1,..,u_m` with at least one channel".into(),
        });
    }
    for (k, name) in header.iter().skip(1).enumerate() {
        if name != format!("u_{}", k + 1) {
            return Err(Error::ControlFile {
                row: 0,
                message: format!("column {} is `{name}`, expected `u_{}`", k + 2, k + 1),
            });
        }
    }
    let mut times = Vec::new();
    let mut values = vec![Vec::new(); m];
    for (i, rec) in r.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::ControlFile { row, message: e.to_string() })?;
        if rec.len() != m + 1 {
            return Err(Error::ControlFile {
                row,
                message: format!("{} fields, expected {}", rec.len(), m + 1),
            });
        }
        let mut parsed = Vec::with_capacity(m + 1);
        for (col, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::ControlFile {
                row,
                message: format!("`{field}` in column {} is not a number", col + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::ControlFile {
                    row,
                    message: format!("non-finite value `{field}` in column {}", col + 1),
                });
            }
            parsed.push(v);
        }
        times.push(parsed[0]);
        for (k, v) in parsed[1..].iter().enumerate() {
            values[k].push(*v);
        }
    }
    if times.len() < 2 {
        return Err(Error::ControlFile {
            row: times.len(),
            message: "need at least two samples".into(),
        });
    }
    let n_steps = times.len() - 1;
    let grid = TimeGrid::new(times[0], times[n_steps], n_steps)?;
    let tol = GRID_TOL * grid.duration().max(1.0);
    for (node, t) in times.iter().enumerate() {
        if (t - grid.time(node)).abs() > tol {
            return Err(Error::GridMismatch(format!(
                "row {}: time {t} is off the uniform grid (expected {})",
                node + 1,
                grid.time(node)
            )));
        }
    }
    ControlSignal::new(grid, values)
}

pub fn load_control(path: &Path) -> Result<ControlSignal> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_control_csv(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let grid = TimeGrid::new(0.0, 0.85, 7).unwrap();
        let u = ControlSignal::new(
            grid,
            vec![
                (0..8).map(|i| 0.1 * i as f64 + 1e-17).collect(),
                (0..8).map(|i| (i as f64).sin()).collect(),
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_control_csv(&mut buf, &u).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time,u_1,u_2\n0e0,"));
        assert_eq!(read_control_csv(&buf[..]).unwrap(), u);
    }

    #[test]
    fn nan_names_row() {
        let text = "time,u_1\n0,0.5\n1,NaN\n2,0.5\n";
        match read_control_csv(text.as_bytes()) {
            Err(Error::ControlFile { row, .. }) => assert_eq!(row, 2),
            other => panic!("{other:?}"),
        }
        assert!(read_control_csv(text.as_bytes()).unwrap_err().to_string().contains("row 2"));
    }

    #[test]
    fn rejects_malformed() {
        let cases = [
            "t,u_1\n0,1\n1,1\n",
            "time\n0\n1\n",
            "time,u_2\n0,1\n1,1\n",
            "time,u_1\n0,1\n",
            "time,u_1\n0,1\n1,x\n",
            "time,u_1\n0,1\n1,1,2\n",
        ];
        for c in cases {
            assert!(read_control_csv(c.as_bytes()).is_err(), "{c}");
        }
        assert!(matches!(
            read_control_csv("time,u_1\n0,1\n0.4,1\n2,1\n".as_bytes()),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn constant_integral() {
        let u = read_control_csv("time,u_1\n0,0.5\n1,0.5\n2,0.5\n".as_bytes()).unwrap();
        assert_eq!(u.integrals(), vec![1.0]);
    }
}
