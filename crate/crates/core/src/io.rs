//! CSV readers and writers for records, curves, datasets and residuals.
//!
//! Comma delimited, `.` decimals, LF line endings, floats written with their
//! shortest round-trip representation.

use std::io::{Read, Write};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::friction::with_differentiated;
use crate::hydraulic::CylinderRecord;
use crate::model::JointState;
use crate::pipeline::{DatasetMeta, IdentificationDataset};

pub const CYLINDER_HEADER: [&str; 7] = ["t", "x", "dx", "ddx", "p1", "p2", "F"];
pub const CURVE_HEADER: [&str; 2] = ["v", "F_d"];
pub const RESIDUAL_HEADER: [&str; 3] = ["t", "tau_measured", "tau_predicted"];
/// Smoothing window used when a record file lacks velocity or acceleration.
pub const DIFF_WINDOW: usize = 5;

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

fn write_rows<W: Write>(w: W, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut out = writer(w);
    out.write_record(header)?;
    for row in rows {
        out.write_record(row.iter().map(|v| format!("{v}")))?;
    }
    out.flush()?;
    Ok(())
}

/// Preformatted fields under `header`, for tables that mix text and numbers.
pub fn write_text_csv<W: Write>(w: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(header)?;
    for row in rows {
        out.write_record(row)?;
    }
    out.flush()?;
    Ok(())
}

fn owned(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.column(name)
            .ok_or_else(|| Error::Malformed(format!("missing column `{name}`")))
    }

    fn value(&self, row: usize, col: usize) -> Result<f64> {
        self.rows[row][col]
            .ok_or_else(|| Error::Malformed(format!("empty `{}` at data row {}", self.header[col], row + 1)))
    }
}

fn read_table<R: Read>(r: R) -> Result<Table> {
    let mut rdr = reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                if f.is_empty() {
                    Ok(None)
                } else {
                    f.parse::<f64>()
                        .map(Some)
                        .map_err(|_| Error::Malformed(format!("data row {}: `{f}` is not a number", k + 1)))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Malformed("no data rows".into()));
    }
    Ok(Table { header, rows })
}

pub fn write_cylinder_csv<W: Write>(w: W, records: &[CylinderRecord]) -> Result<()> {
    write_rows(
        w,
        &owned(&CYLINDER_HEADER),
        records.iter().map(|r| vec![r.t, r.x, r.dx, r.ddx, r.p1, r.p2, r.f]),
    )
}

/// Reads cylinder records. `dx` and `ddx` may be absent (or empty in every
/// row); they are then recovered by differentiating `x`.
pub fn read_cylinder_csv<R: Read>(r: R) -> Result<Vec<CylinderRecord>> {
    let table = read_table(r)?;
    let [t, x, p1, p2, f] = ["t", "x", "p1", "p2", "F"].map(|n| table.require(n));
    let (t, x, p1, p2, f) = (t?, x?, p1?, p2?, f?);
    let dx = table.column("dx");
    let ddx = table.column("ddx");
    let have = |c: Option<usize>| c.is_some_and(|c| table.rows.iter().all(|r| r[c].is_some()));
    let derived = !(have(dx) && have(ddx));
    let mut records = Vec::with_capacity(table.rows.len());
    for k in 0..table.rows.len() {
        let get = |c: Option<usize>| -> Result<f64> {
            match c {
                Some(c) if !derived => table.value(k, c),
                _ => Ok(0.0),
            }
        };
        let rec = CylinderRecord {
            t: table.value(k, t)?,
            x: table.value(k, x)?,
            dx: get(dx)?,
            ddx: get(ddx)?,
            p1: table.value(k, p1)?,
            p2: table.value(k, p2)?,
            f: table.value(k, f)?,
        };
        if !rec.is_finite() {
            return Err(Error::Malformed(format!("non-finite value at data row {}", k + 1)));
        }
        records.push(rec);
    }
    if derived {
        records = with_differentiated(&records, DIFF_WINDOW)?;
    }
    Ok(records)
}

pub fn write_curve_csv<W: Write>(w: W, curve: &[(f64, f64)]) -> Result<()> {
    write_rows(w, &owned(&CURVE_HEADER), curve.iter().map(|&(v, f)| vec![v, f]))
}

fn joint_columns(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

pub fn dataset_header(n: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain(joint_columns("q", n))
        .chain(joint_columns("dq", n))
        .chain(joint_columns("ddq", n))
        .chain(joint_columns("tau", n))
        .collect()
}

fn state_row(s: &JointState) -> Vec<f64> {
    std::iter::once(s.t)
        .chain(s.q.iter().copied())
        .chain(s.dq.iter().copied())
        .chain(s.ddq.iter().copied())
        .collect()
}

pub fn write_dataset_csv<W: Write>(w: W, ds: &IdentificationDataset) -> Result<()> {
    write_rows(
        w,
        &dataset_header(ds.n_joints()),
        ds.states.iter().zip(&ds.torques).map(|(s, tau)| {
            let mut row = state_row(s);
            row.extend(tau.iter());
            row
        }),
    )
}

/// Reads a dataset; the joint count is taken from the header.
pub fn read_dataset_csv<R: Read>(r: R, meta: DatasetMeta) -> Result<IdentificationDataset> {
    let table = read_table(r)?;
    if table.header.len() < 5 || (table.header.len() - 1) % 4 != 0 {
        return Err(Error::Malformed(format!(
            "dataset header has {} columns, expected 1 + 4·n",
            table.header.len()
        )));
    }
    let n = (table.header.len() - 1) / 4;
    let expected = dataset_header(n);
    let cols = expected
        .iter()
        .map(|name| table.require(name))
        .collect::<Result<Vec<_>>>()?;
    let mut states = Vec::with_capacity(table.rows.len());
    let mut torques = Vec::with_capacity(table.rows.len());
    for k in 0..table.rows.len() {
        let v = cols.iter().map(|&c| table.value(k, c)).collect::<Result<Vec<_>>>()?;
        states.push(JointState::from_slices(
            v[0],
            &v[1..1 + n],
            &v[1 + n..1 + 2 * n],
            &v[1 + 2 * n..1 + 3 * n],
        ));
        torques.push(DVector::from_column_slice(&v[1 + 3 * n..]));
    }
    IdentificationDataset::new(states, torques, meta)
}

/// Sampled trajectory: `t,q1..qn,dq1..dqn,ddq1..ddqn`.
pub fn write_trajectory_csv<W: Write>(w: W, states: &[JointState]) -> Result<()> {
    let n = states.first().map_or(0, |s| s.n_joints());
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain(joint_columns("q", n))
        .chain(joint_columns("dq", n))
        .chain(joint_columns("ddq", n))
        .collect();
    write_rows(w, &header, states.iter().map(state_row))
}

/// One joint's measured against predicted torque.
pub fn write_residual_csv<W: Write>(w: W, t: &[f64], measured: &[f64], predicted: &[f64]) -> Result<()> {
    if t.len() != measured.len() || t.len() != predicted.len() {
        return Err(Error::Count {
            what: "aligned residual samples",
            expected: t.len(),
            found: measured.len().min(predicted.len()),
        });
    }
    write_rows(
        w,
        &owned(&RESIDUAL_HEADER),
        (0..t.len()).map(|k| vec![t[k], measured[k], predicted[k]]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: f64) -> CylinderRecord {
        CylinderRecord {
            t,
            x: 0.1 * t,
            dx: 0.1,
            ddx: 0.0,
            p1: 2.5e5 + t,
            p2: 1e5,
            f: -3.25,
        }
    }

    #[test]
    fn cylinder_round_trip_is_exact() {
        let records: Vec<_> = (0..5).map(|k| rec(k as f64 / 3.0)).collect();
        let mut buf = Vec::new();
        write_cylinder_csv(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x,dx,ddx,p1,p2,F\n"));
        assert!(!text.contains('\r'));
        assert_eq!(read_cylinder_csv(buf.as_slice()).unwrap(), records);
    }

    #[test]
    fn missing_derivatives_are_reconstructed() {
        let mut text = String::from("t,x,p1,p2,F\n");
        for k in 0..50 {
            let t = k as f64 * 0.02;
            text += &format!("{t},{},1,1,0\n", 0.5 * t * t);
        }
        let recs = read_cylinder_csv(text.as_bytes()).unwrap();
        // x = t²/2 is reproduced exactly by central differences away from the ends
        assert!((recs[25].dx - 0.5).abs() < 1e-9, "{}", recs[25].dx);
        assert!((recs[25].ddx - 1.0).abs() < 1e-9, "{}", recs[25].ddx);
    }

    #[test]
    fn malformed_inputs() {
        assert!(read_cylinder_csv("t,x,dx,ddx,p1,p2,F\n".as_bytes()).is_err());
        assert!(read_cylinder_csv("".as_bytes()).is_err());
        assert!(read_cylinder_csv("t,x,dx,ddx,p1,p2\n0,0,0,0,0,0\n".as_bytes()).is_err());
        assert!(read_cylinder_csv("t,x,dx,ddx,p1,p2,F\n0,abc,0,0,0,0,0\n".as_bytes()).is_err());
    }

    #[test]
    fn dataset_round_trip() {
        let meta = DatasetMeta {
            rate_hz: 50.0,
            noise_sigma: 0.0,
            seed: None,
            source: "file".into(),
        };
        let states: Vec<_> = (0..3)
            .map(|k| JointState::from_slices(k as f64, &[0.1, 0.2], &[1.0 / 3.0, -1.0], &[2.0, 1e-17]))
            .collect();
        let torques = vec![DVector::from_vec(vec![1.5, -2.0]); 3];
        let ds = IdentificationDataset::new(states, torques, meta.clone()).unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &ds).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("t,q1,q2,dq1,dq2,ddq1,ddq2,tau1,tau2\n"));
        assert_eq!(read_dataset_csv(buf.as_slice(), meta).unwrap(), ds);
    }

    #[test]
    fn residual_lengths_checked() {
        let mut buf = Vec::new();
        assert!(write_residual_csv(&mut buf, &[0.0, 1.0], &[1.0], &[1.0, 2.0]).is_err());
        write_residual_csv(&mut buf, &[0.0], &[1.0], &[0.5]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,tau_measured,tau_predicted\n0,1,0.5\n"
        );
    }
}
