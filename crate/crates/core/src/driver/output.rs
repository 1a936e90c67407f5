use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::diagnostics::{format_g17, DiagRecord};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::schemes::State;

/// CSV file written row by row so partial runs keep their output.
pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = CsvWriter { path, out: BufWriter::new(file) };
        w.line(DiagRecord::CSV_HEADER)?;
        Ok(w)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write(&mut self, rec: &DiagRecord) -> Result<()> {
        self.line(&rec.csv_row())
    }

    fn line(&mut self, s: &str) -> Result<()> {
        self.out
            .write_all(s.as_bytes())
            .and_then(|_| self.out.write_all(b"\n"))
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

pub fn vtk_file_name(step: usize) -> String {
    format!("fields_{step}.vtk")
}

/// Legacy ASCII VTK snapshot; velocity is written without its bubble part.
pub fn write_vtk(path: &Path, mesh: &Mesh, state: &State) -> Result<()> {
    let mut s = String::new();
    let nn = mesh.num_nodes();
    let ne = mesh.num_elements();
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str(&format!("nsch t={}\n", format_g17(state.t)));
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    s.push_str(&format!("POINTS {nn} double\n"));
    for x in mesh.nodes() {
        s.push_str(&format!("{} {} 0\n", format_g17(x[0]), format_g17(x[1])));
    }
    s.push_str(&format!("CELLS {ne} {}\n", 4 * ne));
    for t in mesh.elements() {
        s.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
    }
    s.push_str(&format!("CELL_TYPES {ne}\n"));
    for _ in 0..ne {
        s.push_str("5\n");
    }
    s.push_str(&format!("POINT_DATA {nn}\n"));
    for (name, f) in [("phi", &state.phi), ("mu", &state.mu), ("p", &state.p)] {
        s.push_str(&format!("SCALARS {name} double 1\nLOOKUP_TABLE default\n"));
        for v in f.values() {
            s.push_str(&format_g17(*v));
            s.push('\n');
        }
    }
    s.push_str("VECTORS u double\n");
    for v in &state.u.nodal {
        s.push_str(&format!("{} {} 0\n", format_g17(v[0]), format_g17(v[1])));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}
