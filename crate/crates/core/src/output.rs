//! CSV files of a run directory.
//!
//! Floats use Rust's shortest round-trip formatting, so files are bit-exact
//! records of the computed values.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::run::{Frame, RunOutput, Snapshot};

pub const SNAPSHOT_HEADER: &str = "x,rho,q,v,phase";
pub const SPACETIME_HEADER: &str = "t,x,rho,q,v";
pub const TRAJECTORY_HEADER: &str = "id,t,x";
pub const LEDGER_HEADER: &str = "t,dt,mass,flux_in,flux_out";

pub fn snapshot_file_name(t: f64) -> String {
    format!("snapshot_{t}.csv")
}

pub fn snapshot_csv(x: &[f64], snap: &Snapshot) -> String {
    let mut s = String::with_capacity(64 * x.len());
    s.push_str(SNAPSHOT_HEADER);
    s.push('\n');
    for (j, &xj) in x.iter().enumerate() {
        let u = snap.states[j];
        let _ = writeln!(s, "{xj},{},{},{},{}", u.rho, u.q, snap.v[j], snap.phases[j].as_str());
    }
    s
}

pub fn spacetime_csv(x: &[f64], frames: &[Frame]) -> String {
    let mut s = String::with_capacity(64 * x.len() * frames.len());
    s.push_str(SPACETIME_HEADER);
    s.push('\n');
    for f in frames {
        for (j, &xj) in x.iter().enumerate() {
            let _ = writeln!(s, "{},{xj},{},{},{}", f.t, f.rho[j], f.q[j], f.v[j]);
        }
    }
    s
}

pub fn trajectories_csv(out: &RunOutput) -> String {
    let mut s = String::from(TRAJECTORY_HEADER);
    s.push('\n');
    for tr in &out.trajectories {
        for &(t, x) in &tr.samples {
            let _ = writeln!(s, "{},{t},{x}", tr.id);
        }
    }
    s
}

pub fn ledger_csv(out: &RunOutput) -> String {
    let mut s = String::from(LEDGER_HEADER);
    s.push('\n');
    for r in &out.ledger {
        let _ = writeln!(s, "{},{},{},{},{}", r.t, r.dt, r.mass, r.flux_in, r.flux_out);
    }
    s
}

/// Writes every CSV of `out` into `dir` and returns the written paths.
/// Space-time and trajectory files are written only when non-empty.
pub fn write_run(dir: &Path, out: &RunOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, body)?;
        files.push(path);
        Ok(())
    };
    for snap in &out.snapshots {
        put(snapshot_file_name(snap.t), snapshot_csv(&out.x, snap))?;
    }
    if !out.spacetime.is_empty() {
        put("spacetime.csv".into(), spacetime_csv(&out.x, &out.spacetime))?;
    }
    if out.scenario.output.trajectories.is_some() {
        put("trajectories.csv".into(), trajectories_csv(out))?;
    }
    put("ledger.csv".into(), ledger_csv(out))?;
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SnapshotRow {
    pub x: f64,
    pub rho: f64,
    pub q: f64,
    pub v: f64,
    pub phase: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
struct SpacetimeRow {
    t: f64,
    x: f64,
    rho: f64,
    q: f64,
    v: f64,
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Diagnostic(format!("{}: {other:?}", path.display())),
    }
}

pub fn read_snapshot(path: &Path) -> Result<Vec<SnapshotRow>> {
    read_rows(path)
}

/// Reads `spacetime.csv` back into cell centres and frames.
pub fn read_spacetime(path: &Path) -> Result<(Vec<f64>, Vec<Frame>)> {
    let rows: Vec<SpacetimeRow> = read_rows(path)?;
    let mut frames: Vec<Frame> = Vec::new();
    let mut x = Vec::new();
    for r in rows {
        if frames.last().is_none_or(|f| f.t != r.t) {
            frames.push(Frame {
                t: r.t,
                rho: Vec::new(),
                q: Vec::new(),
                v: Vec::new(),
            });
        }
        if frames.len() == 1 {
            x.push(r.x);
        }
        let f = frames.last_mut().expect("frame pushed");
        f.rho.push(r.rho);
        f.q.push(r.q);
        f.v.push(r.v);
    }
    if let Some(bad) = frames.iter().find(|f| f.rho.len() != x.len()) {
        return Err(Error::Diagnostic(format!(
            "{}: frame at t = {} has {} cells, expected {}",
            path.display(),
            bad.t,
            bad.rho.len(),
            x.len()
        )));
    }
    Ok((x, frames))
}

/// Snapshot files in `dir` as `(t, path)`, sorted by time.
pub fn list_snapshots(dir: &Path) -> Result<Vec<(f64, PathBuf)>> {
    let mut found = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if let Some(t) = name
            .strip_prefix("snapshot_")
            .and_then(|r| r.strip_suffix(".csv"))
            .and_then(|t| t.parse::<f64>().ok())
        {
            found.push((t, path));
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Phase, State};

    #[test]
    fn snapshot_round_trip() {
        let snap = Snapshot {
            t: 12.5,
            states: vec![State::new(0.1 + 0.2, 0.6), State::new(1e-17, 1.0 / 3.0)],
            phases: vec![Phase::Congested, Phase::Free],
            v: vec![1.0 / 7.0, 30.0],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(snapshot_file_name(snap.t));
        fs::write(&path, snapshot_csv(&[100.0, 300.0], &snap)).unwrap();
        assert_eq!(path.file_name().unwrap(), "snapshot_12.5.csv");
        let rows = read_snapshot(&path).unwrap();
        assert_eq!(rows[0].rho, 0.1 + 0.2);
        assert_eq!(rows[1].q, 1.0 / 3.0);
        assert_eq!(rows[0].v, 1.0 / 7.0);
        assert_eq!(rows[1].phase, "free");
        assert_eq!(list_snapshots(dir.path()).unwrap()[0].0, 12.5);
    }

    #[test]
    fn spacetime_round_trip() {
        let frames: Vec<Frame> = (0..3)
            .map(|k| Frame {
                t: k as f64 * 0.1,
                rho: vec![0.01 * k as f64, 0.02],
                q: vec![0.3, 0.4],
                v: vec![30.0, 29.0],
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spacetime.csv");
        fs::write(&path, spacetime_csv(&[5.0, 15.0], &frames)).unwrap();
        let (x, back) = read_spacetime(&path).unwrap();
        assert_eq!(x, [5.0, 15.0]);
        assert_eq!(back, frames);
    }
}
