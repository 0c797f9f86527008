//! File output: legacy ASCII VTK polydata, per-panel CSV tables and content
//! hashes for run manifests.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use nalgebra::Point3;
use sha2::{Digest, Sha256};

use crate::geometry::{MeshCollection, SurfaceMesh};
use crate::wake::WakeSheet;

/// Polygons with optional per-cell scalars, in VTK 4.2 polydata layout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolyData {
    pub points: Vec<Point3<f64>>,
    pub polygons: Vec<Vec<usize>>,
    pub cell_scalars: Vec<(String, Vec<f64>)>,
}

/// Node indices of a quad with repeated nodes collapsed.
fn distinct(quad: &[usize; 4]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(4);
    for &i in quad {
        if out.last() != Some(&i) {
            out.push(i);
        }
    }
    if out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    out
}

impl PolyData {
    pub fn from_mesh(mesh: &SurfaceMesh) -> Self {
        PolyData {
            points: mesh.nodes.clone(),
            polygons: mesh.panels.iter().map(distinct).collect(),
            cell_scalars: Vec::new(),
        }
    }

    /// All members of a collection, in global panel order.
    pub fn from_collection(body: &MeshCollection) -> Self {
        let mut out = PolyData::default();
        for m in &body.meshes {
            let base = out.points.len();
            out.points.extend_from_slice(&m.nodes);
            out.polygons.extend(
                m.panels
                    .iter()
                    .map(|q| distinct(q).into_iter().map(|i| i + base).collect()),
            );
        }
        out
    }

    /// Wake panels with their doublet strengths as the `mu` cell scalar.
    pub fn from_wake(wake: &WakeSheet) -> Self {
        let mut out = PolyData::default();
        let mut mu = Vec::new();
        for row in &wake.rows {
            for (quad, m) in row.panels.iter().zip(&row.strengths) {
                let base = out.points.len();
                out.points.extend_from_slice(quad);
                out.polygons.push((base..base + 4).collect());
                mu.push(*m);
            }
        }
        out.cell_scalars.push(("mu".to_string(), mu));
        out
    }

    pub fn with_cell_scalar(mut self, name: &str, values: &[f64]) -> io::Result<Self> {
        if values.len() != self.polygons.len() {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                format!(
                    "{} values for {} cells in `{name}`",
                    values.len(),
                    self.polygons.len()
                ),
            ));
        }
        self.cell_scalars.push((name.to_string(), values.to_vec()));
        Ok(self)
    }

    pub fn write_vtk<W: Write>(&self, mut w: W, title: &str) -> io::Result<()> {
        writeln!(w, "# vtk DataFile Version 4.2")?;
        writeln!(w, "{}", title.lines().next().unwrap_or(""))?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET POLYDATA")?;
        writeln!(w, "POINTS {} double", self.points.len())?;
        for p in &self.points {
            writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
        }
        let size: usize = self.polygons.iter().map(|p| p.len() + 1).sum();
        writeln!(w, "POLYGONS {} {}", self.polygons.len(), size)?;
        for poly in &self.polygons {
            write!(w, "{}", poly.len())?;
            for i in poly {
                write!(w, " {i}")?;
            }
            writeln!(w)?;
        }
        if !self.cell_scalars.is_empty() {
            writeln!(w, "CELL_DATA {}", self.polygons.len())?;
            for (name, values) in &self.cell_scalars {
                writeln!(w, "SCALARS {name} double 1")?;
                writeln!(w, "LOOKUP_TABLE default")?;
                for v in values {
                    writeln!(w, "{v}")?;
                }
            }
        }
        w.flush()
    }

    pub fn save(&self, path: &Path, title: &str) -> io::Result<()> {
        self.write_vtk(BufWriter::new(File::create(path)?), title)
    }
}

/// Header of the per-panel CSV table.
pub const PANEL_CSV_HEADER: [&str; 8] = ["panel", "cx", "cy", "cz", "nx", "ny", "nz", "area"];

/// One row per panel: index, centroid, unit normal, area, then one column per
/// entry of `extra`.
pub fn write_panel_csv(
    path: &Path,
    body: &MeshCollection,
    extra: &[(&str, &[f64])],
) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = PANEL_CSV_HEADER.to_vec();
    header.extend(extra.iter().map(|(name, _)| *name));
    w.write_record(&header)?;
    for (i, g) in body.panels().enumerate() {
        let (c, n) = (g.centroid(), g.normal());
        let mut rec = vec![i.to_string()];
        rec.extend(
            [c.x, c.y, c.z, n.x, n.y, n.z, g.area()]
                .iter()
                .map(f64::to_string),
        );
        for (name, values) in extra {
            let v = values.get(i).ok_or_else(|| {
                io::Error::new(
                    io::ErrorKind::InvalidInput,
                    format!("column `{name}` is short"),
                )
            })?;
            rec.push(v.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()
}

/// Git-style content hash: SHA-256 over `blob <len>\0` followed by the bytes.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
