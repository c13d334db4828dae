//! Legacy ASCII VTK (3.0) output of triangle meshes with point data.

use std::io::{self, Write};
use std::path::Path;

use crate::mesh::TriMesh;

/// Point-data array attached to a VTK file.
pub enum PointData<'a> {
    Scalars(&'a str, &'a [f64]),
    Vectors(&'a str, &'a [[f64; 2]]),
}

impl PointData<'_> {
    fn len(&self) -> usize {
        match self {
            PointData::Scalars(_, v) => v.len(),
            PointData::Vectors(_, v) => v.len(),
        }
    }
}

/// Writes `mesh` as an `UNSTRUCTURED_GRID` of triangles (cell type 5).
/// Every array must have one entry per mesh vertex.
pub fn write_vtk(out: &mut impl Write, mesh: &TriMesh, title: &str, data: &[PointData]) -> io::Result<()> {
    let nv = mesh.n_vertices();
    if let Some(d) = data.iter().find(|d| d.len() != nv) {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("point data has {} entries, mesh has {nv} vertices", d.len()),
        ));
    }
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {nv} double")?;
    for p in mesh.vertices() {
        writeln!(out, "{:.16e} {:.16e} 0", p[0], p[1])?;
    }
    let nt = mesh.n_triangles();
    writeln!(out, "CELLS {nt} {}", 4 * nt)?;
    for t in mesh.triangles() {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(out, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(out, "5")?;
    }
    if !data.is_empty() {
        writeln!(out, "POINT_DATA {nv}")?;
    }
    for d in data {
        match d {
            PointData::Scalars(name, v) => {
                writeln!(out, "SCALARS {name} double 1")?;
                writeln!(out, "LOOKUP_TABLE default")?;
                for x in v.iter() {
                    writeln!(out, "{x:.16e}")?;
                }
            }
            PointData::Vectors(name, v) => {
                writeln!(out, "VECTORS {name} double")?;
                for x in v.iter() {
                    writeln!(out, "{:.16e} {:.16e} 0", x[0], x[1])?;
                }
            }
        }
    }
    Ok(())
}

pub fn write_vtk_file(path: impl AsRef<Path>, mesh: &TriMesh, title: &str, data: &[PointData]) -> io::Result<()> {
    let mut w = io::BufWriter::new(std::fs::File::create(path)?);
    write_vtk(&mut w, mesh, title, data)?;
    w.flush()
}
