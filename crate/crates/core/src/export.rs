//! CSV and JSON artifacts.
//!
//! Trajectory CSV columns are
//! `t, rx, ry, rz, vx, vy, vz, m, Tx, Ty, Tz, Tmag, sigma, tilt_deg`, one row
//! per node. The last node has no step after it, so its thrust columns are
//! empty. Floats are written in shortest round-trip form, so reading a file
//! back reproduces the numbers bit for bit.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::IoError;
use crate::model::Trajectory;

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    t: f64,
    rx: f64,
    ry: f64,
    rz: f64,
    vx: f64,
    vy: f64,
    vz: f64,
    m: f64,
    #[serde(rename = "Tx")]
    tx: Option<f64>,
    #[serde(rename = "Ty")]
    ty: Option<f64>,
    #[serde(rename = "Tz")]
    tz: Option<f64>,
    #[serde(rename = "Tmag")]
    tmag: Option<f64>,
    sigma: Option<f64>,
    tilt_deg: Option<f64>,
}

pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    let n = traj.steps();
    for i in 0..=n {
        let step = i < n;
        let at = |v: &Vec<f64>| step.then(|| v[i]);
        w.serialize(Row {
            t: traj.t[i],
            rx: traj.r[i][0],
            ry: traj.r[i][1],
            rz: traj.r[i][2],
            vx: traj.v[i][0],
            vy: traj.v[i][1],
            vz: traj.v[i][2],
            m: traj.m[i],
            tx: step.then(|| traj.thrust[i][0]),
            ty: step.then(|| traj.thrust[i][1]),
            tz: step.then(|| traj.thrust[i][2]),
            tmag: at(&traj.thrust_mag),
            sigma: at(&traj.sigma),
            tilt_deg: step.then(|| traj.tilt[i].to_degrees()),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Trajectory, IoError> {
    let mut rdr = csv::Reader::from_reader(input);
    let rows: Vec<Row> = rdr.deserialize().collect::<Result<_, _>>()?;
    if rows.len() < 2 {
        return Err(IoError::Malformed(format!(
            "{} rows, need at least 2",
            rows.len()
        )));
    }
    let n = rows.len() - 1;
    let mut thrust = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    for (i, row) in rows[..n].iter().enumerate() {
        match (row.tx, row.ty, row.tz) {
            (Some(x), Some(y), Some(z)) => thrust.push([x, y, z]),
            _ => return Err(IoError::Malformed(format!("row {i} is missing thrust"))),
        }
        sigma.push(row.sigma.unwrap_or(f64::NAN));
    }
    let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let mut traj = Trajectory::from_states(
        t[1] - t[0],
        rows.iter().map(|r| [r.rx, r.ry, r.rz]).collect(),
        rows.iter().map(|r| [r.vx, r.vy, r.vz]).collect(),
        rows.iter().map(|r| r.m).collect(),
        thrust,
        sigma,
    );
    traj.t = t;
    Ok(traj)
}

pub fn save_trajectory_csv(traj: &Trajectory, path: impl AsRef<Path>) -> Result<(), IoError> {
    write_trajectory_csv(traj, BufWriter::new(File::create(path)?))
}

pub fn load_trajectory_csv(path: impl AsRef<Path>) -> Result<Trajectory, IoError> {
    read_trajectory_csv(File::open(path)?)
}

pub fn save_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T, IoError> {
    Ok(serde_json::from_reader(File::open(path)?)?)
}

/// Writes serializable rows (e.g. sweep samples) as CSV.
pub fn save_rows_csv<T: Serialize>(rows: &[T], path: impl AsRef<Path>) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
