//! CSV exchange formats for orbits, curves, axis hits and basin rasters.
//!
//! Floats are written in shortest round-trip form, so equal inputs give
//! byte-identical files.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basin::{AttractorRegistry, BasinGrid, BasinLabel};
use crate::manifold::{ManifoldCurve, TangencyHit};
use crate::map::Point2;
use crate::orbit::{Branch, ScanEntry, SrkOrbit};
use crate::stability::StabilityClass;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed orbit table: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct OrbitRow {
    k: u32,
    period: usize,
    branch: String,
    j: usize,
    x_j: f64,
    y_j: f64,
    trace: f64,
    det: f64,
    stability: String,
    residual: f64,
}

/// One orbit as read back from an orbit table.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitRecord {
    pub k: u32,
    pub branch: Branch,
    pub points: Vec<Point2>,
    pub trace: f64,
    pub det: f64,
    pub stability: StabilityClass,
    pub residual: f64,
}

/// One row per orbit point: `k, period, branch, j, x_j, y_j, trace, det,
/// stability, residual`.
pub fn write_orbits_csv<'a, W: Write>(out: W, orbits: impl IntoIterator<Item = &'a SrkOrbit>) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    for o in orbits {
        for (j, p) in o.points.iter().enumerate() {
            w.serialize(OrbitRow {
                k: o.k,
                period: o.period,
                branch: o.branch.to_string(),
                j,
                x_j: p.x,
                y_j: p.y,
                trace: o.trace,
                det: o.det,
                stability: o.stability.to_string(),
                residual: o.residual,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads an orbit table; consecutive rows with the same `(k, branch)`
/// and increasing `j` form one orbit.
pub fn read_orbits_csv<R: Read>(input: R) -> Result<Vec<OrbitRecord>, IoError> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out: Vec<OrbitRecord> = Vec::new();
    let mut expected_len = 0;
    for row in rdr.deserialize() {
        let row: OrbitRow = row?;
        let branch: Branch = row.branch.parse().map_err(IoError::Malformed)?;
        let stability: StabilityClass = row.stability.parse().map_err(IoError::Malformed)?;
        let p = Point2::new(row.x_j, row.y_j);
        if row.j == 0 {
            if let Some(last) = out.last() {
                if last.points.len() != expected_len {
                    return Err(IoError::Malformed(format!("orbit k = {} is incomplete", last.k)));
                }
            }
            expected_len = row.period;
            out.push(OrbitRecord {
                k: row.k,
                branch,
                points: vec![p],
                trace: row.trace,
                det: row.det,
                stability,
                residual: row.residual,
            });
        } else {
            let cur = out
                .last_mut()
                .filter(|o| o.k == row.k && o.branch == branch && o.points.len() == row.j)
                .ok_or_else(|| IoError::Malformed(format!("unexpected row j = {} for k = {}", row.j, row.k)))?;
            cur.points.push(p);
        }
    }
    if let Some(last) = out.last() {
        if last.points.len() != expected_len {
            return Err(IoError::Malformed(format!("orbit k = {} is incomplete", last.k)));
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    k: u32,
    branch: String,
    exists: bool,
    stability: &'a str,
    trace: Option<f64>,
    det: Option<f64>,
    blend_points: Option<usize>,
    note: String,
}

/// Scan overview, one row per `(k, branch)`.
pub fn write_scan_summary_csv<W: Write>(out: W, scan: &[ScanEntry]) -> Result<(), IoError> {
    use crate::orbit::BranchOutcome;
    let mut w = csv::Writer::from_writer(out);
    for e in scan {
        for branch in [Branch::Minus, Branch::Plus] {
            let (orbit, note) = match e.outcome(branch) {
                BranchOutcome::Found(o) => (Some(o), String::new()),
                BranchOutcome::NoRoot => (None, "no real root".to_string()),
                BranchOutcome::Failed(msg) => (None, msg.clone()),
            };
            w.serialize(SummaryRow {
                k: e.k,
                branch: branch.to_string(),
                exists: orbit.is_some(),
                stability: orbit.map_or("", |o| o.stability.as_str()),
                trace: orbit.map(|o| o.trace),
                det: orbit.map(|o| o.det),
                blend_points: orbit.map(|o| o.blend_points()),
                note,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct CurveRow {
    branch_id: usize,
    point_index: usize,
    x: f64,
    y: f64,
}

/// Polylines as `branch_id, point_index, x, y`; every piece of every
/// curve gets its own `branch_id`, numbered from `first_id`. Returns the
/// next free id.
pub fn write_curves_csv<W: Write>(out: W, curves: &[ManifoldCurve], first_id: usize) -> Result<usize, IoError> {
    let mut w = csv::Writer::from_writer(out);
    let mut id = first_id;
    for c in curves {
        for range in c.pieces() {
            for (i, p) in c.points[range].iter().enumerate() {
                w.serialize(CurveRow {
                    branch_id: id,
                    point_index: i,
                    x: p.x,
                    y: p.y,
                })?;
            }
            id += 1;
        }
    }
    w.flush()?;
    Ok(id)
}

#[derive(Serialize)]
struct HitRow {
    x: f64,
    y: f64,
    contact: String,
    curvature_sign: f64,
}

pub fn write_tangencies_csv<W: Write>(out: W, hits: &[TangencyHit]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    for h in hits {
        w.serialize(HitRow {
            x: h.location.x,
            y: h.location.y,
            contact: h.contact.to_string(),
            curvature_sign: h.curvature_sign,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct LegendRow<'a> {
    id: u32,
    label: &'a str,
    r: u8,
    g: u8,
    b: u8,
    period: usize,
}

/// `id, label, r, g, b, period` per registered attractor.
pub fn write_legend_csv<W: Write>(out: W, registry: &AttractorRegistry) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    for a in registry.entries() {
        w.serialize(LegendRow {
            id: a.id,
            label: &a.label,
            r: a.color[0],
            g: a.color[1],
            b: a.color[2],
            period: a.period,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct StatRow {
    label: String,
    count: usize,
    fraction: f64,
}

/// Cell count and fraction per label.
pub fn write_basin_stats_csv<W: Write>(out: W, grid: &BasinGrid) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    let total = grid.labels.len() as f64;
    for (label, count) in grid.counts() {
        w.serialize(StatRow {
            label: label.to_string(),
            count,
            fraction: count as f64 / total,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Raw labels as `row, col, label`, row 0 at the top.
pub fn write_basin_labels_csv<W: Write>(out: W, grid: &BasinGrid) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row", "col", "label"])?;
    for (i, l) in grid.labels.iter().enumerate() {
        let label = match l {
            BasinLabel::Attractor(id) => id.to_string(),
            other => other.to_string(),
        };
        w.write_record([(i / grid.nx).to_string(), (i % grid.nx).to_string(), label])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Execution;
    use crate::map::{MapParams, ParamSet};
    use crate::orbit::{scan_srk, OrbitOptions};

    #[test]
    fn orbit_table_round_trip() {
        let p = MapParams::example(ParamSet::Set20);
        let scan = scan_srk(&p, 0, 6, &OrbitOptions::default(), Execution::Sequential);
        let orbits: Vec<&SrkOrbit> = scan.iter().flat_map(|e| e.orbits()).collect();
        let mut buf = Vec::new();
        write_orbits_csv(&mut buf, orbits.iter().copied()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("k,period,branch,j,x_j,y_j,trace,det,stability,residual\n"));
        let back = read_orbits_csv(&buf[..]).unwrap();
        assert_eq!(back.len(), orbits.len());
        for (a, b) in orbits.iter().zip(&back) {
            assert_eq!(a.points, b.points);
            assert_eq!(
                (a.k, a.branch, a.trace, a.det, a.stability),
                (b.k, b.branch, b.trace, b.det, b.stability)
            );
        }
    }

    #[test]
    fn truncated_orbit_table_is_rejected() {
        let text = "k,period,branch,j,x_j,y_j,trace,det,stability,residual\n\
                    3,4,minus,0,0.512,1,0,0.5,AsymptoticallyStable,0\n\
                    3,4,minus,1,1,0.512,0,0.5,AsymptoticallyStable,0\n";
        assert!(matches!(read_orbits_csv(text.as_bytes()), Err(IoError::Malformed(_))));
    }

    #[test]
    fn floats_use_shortest_round_trip_form() {
        let c = ManifoldCurve::from_points(
            crate::manifold::CurveKind::Unstable,
            vec![Point2::new(0.1, 1e-20), Point2::new(1.0 / 3.0, -2.5)],
        );
        let mut buf = Vec::new();
        assert_eq!(write_curves_csv(&mut buf, &[c], 4).unwrap(), 5);
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows[0], "branch_id,point_index,x,y");
        assert_eq!(rows[1], "4,0,0.1,1e-20");
        let y: f64 = rows[2].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(y, 1.0 / 3.0);
    }
}
