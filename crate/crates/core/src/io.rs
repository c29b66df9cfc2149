//! Snapshot and time-series output.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{Cells, MeshGraph};
use crate::state::State;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotFormat {
    Csv,
    Vtk,
}

impl SnapshotFormat {
    pub fn extension(self) -> &'static str {
        match self {
            SnapshotFormat::Csv => "csv",
            SnapshotFormat::Vtk => "vtk",
        }
    }
}

pub const CSV_HEADER: &str = "x,y,h,qx,qy,z";

/// Nodal states as CSV, `x,y,h,qx,qy,z` with 17 significant digits.
pub fn write_csv(path: &Path, graph: &MeshGraph, u: &[State], z: &[f64]) -> Result<()> {
    let mut out = String::with_capacity(u.len() * 140);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for ((x, s), z) in graph.coords().iter().zip(u).zip(z) {
        writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", x[0], x[1], s.h, s.q[0], s.q[1], z).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// One CSV row: coordinates, state and bathymetry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvRow {
    pub x: [f64; 2],
    pub state: State,
    pub z: f64,
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(Error::Parse { line: 1, msg: format!("expected header `{CSV_HEADER}`") }),
    }
    let mut rows = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse { line: n + 1, msg: e.to_string() })?;
        if v.len() != 6 {
            return Err(Error::Parse { line: n + 1, msg: format!("expected 6 columns, found {}", v.len()) });
        }
        rows.push(CsvRow { x: [v[0], v[1]], state: State::new(v[2], [v[3], v[4]]), z: v[5] });
    }
    Ok(rows)
}

/// Legacy ASCII VTK unstructured grid with point data `h`, `q` and `z`.
pub fn write_vtk(path: &Path, graph: &MeshGraph, u: &[State], z: &[f64]) -> Result<()> {
    let n = graph.node_count();
    let mut out = String::with_capacity(n * 160);
    out.push_str("# vtk DataFile Version 3.0\nshallow water snapshot\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(out, "POINTS {n} double").unwrap();
    for x in graph.coords() {
        writeln!(out, "{:.16e} {:.16e} 0", x[0], x[1]).unwrap();
    }
    let (cells, per, kind): (Vec<&[usize]>, usize, u8) = match graph.cells() {
        Cells::Intervals(c) => (c.iter().map(|c| &c[..]).collect(), 2, 3),
        Cells::Quads(c) => (c.iter().map(|c| &c[..]).collect(), 4, 9),
    };
    writeln!(out, "CELLS {} {}", cells.len(), cells.len() * (per + 1)).unwrap();
    for c in &cells {
        write!(out, "{per}").unwrap();
        for a in c.iter() {
            write!(out, " {a}").unwrap();
        }
        out.push('\n');
    }
    writeln!(out, "CELL_TYPES {}", cells.len()).unwrap();
    for _ in &cells {
        writeln!(out, "{kind}").unwrap();
    }
    writeln!(out, "POINT_DATA {n}").unwrap();
    out.push_str("SCALARS h double 1\nLOOKUP_TABLE default\n");
    for s in u {
        writeln!(out, "{:.16e}", s.h).unwrap();
    }
    out.push_str("VECTORS q double\n");
    for s in u {
        writeln!(out, "{:.16e} {:.16e} 0", s.q[0], s.q[1]).unwrap();
    }
    out.push_str("SCALARS z double 1\nLOOKUP_TABLE default\n");
    for z in z {
        writeln!(out, "{z:.16e}").unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_snapshot(path: &Path, graph: &MeshGraph, u: &[State], z: &[f64], format: SnapshotFormat) -> Result<()> {
    match format {
        SnapshotFormat::Csv => write_csv(path, graph, u, z),
        SnapshotFormat::Vtk => write_vtk(path, graph, u, z),
    }
}

/// Time series as CSV `t,value`.
pub fn write_series(path: &Path, series: &[(f64, f64)]) -> Result<()> {
    let mut out = String::from("t,value\n");
    for (t, v) in series {
        writeln!(out, "{t:.16e},{v:.16e}").unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
