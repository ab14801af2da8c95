//! Artifact writers. Every file is written to a temporary sibling and renamed
//! into place.
//!
//! * CSV: RFC 4180, header on the first line, floats as `{:.17e}` (round-trip
//!   exact), missing values as empty fields.
//! * VTK: legacy `STRUCTURED_POINTS` ASCII with node scalars and node-averaged
//!   vectors.
//! * Raw: `<name>.bin` holds the staggered components back to back as
//!   little-endian `f64`, x-fastest; `<name>.hdr` describes the shapes.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use thermistor_core::ops::{edge_field_at_nodes, face_field_at_nodes};
use thermistor_core::{EdgeField, FaceField, Grid, NodeField};

pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn float(x: f64) -> String {
    format!("{x:.17e}")
}

pub fn opt_float(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

/// A CSV table with a fixed header.
#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(vec![]);
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory write")
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        write_atomic(path, &self.to_csv())
    }
}

/// Legacy VTK ASCII file with node scalars and node vectors.
pub fn vtk(grid: &Grid, scalars: &[(&str, &NodeField)], vectors: &[(&str, [NodeField; 3])]) -> String {
    let n = grid.cells();
    let h = grid.spacing();
    let mut s = String::new();
    writeln!(s, "# vtk DataFile Version 3.0").unwrap();
    writeln!(s, "thermistor fields").unwrap();
    writeln!(s, "ASCII").unwrap();
    writeln!(s, "DATASET STRUCTURED_POINTS").unwrap();
    writeln!(s, "DIMENSIONS {} {} {}", n[0] + 1, n[1] + 1, n[2] + 1).unwrap();
    writeln!(s, "ORIGIN 0 0 0").unwrap();
    writeln!(s, "SPACING {} {} {}", float(h[0]), float(h[1]), float(h[2])).unwrap();
    writeln!(s, "POINT_DATA {}", grid.node_count()).unwrap();
    for (name, f) in scalars {
        writeln!(s, "SCALARS {name} double 1").unwrap();
        writeln!(s, "LOOKUP_TABLE default").unwrap();
        for v in f.values() {
            writeln!(s, "{}", float(*v)).unwrap();
        }
    }
    for (name, [a, b, c]) in vectors {
        writeln!(s, "VECTORS {name} double").unwrap();
        for ((x, y), z) in a.values().iter().zip(b.values()).zip(c.values()) {
            writeln!(s, "{} {} {}", float(*x), float(*y), float(*z)).unwrap();
        }
    }
    s
}

pub fn edge_vectors(q: &EdgeField) -> [NodeField; 3] {
    edge_field_at_nodes(q)
}

pub fn face_vectors(q: &FaceField) -> [NodeField; 3] {
    face_field_at_nodes(q)
}

fn raw_pair(dir: &Path, name: &str, location: &str, shapes: &[[usize; 3]], data: &[&[f64]]) -> std::io::Result<Vec<PathBuf>> {
    let mut bytes = Vec::with_capacity(8 * data.iter().map(|d| d.len()).sum::<usize>());
    for d in data {
        for v in *d {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut hdr = String::new();
    writeln!(hdr, "name {name}").unwrap();
    writeln!(hdr, "location {location}").unwrap();
    writeln!(hdr, "dtype float64-le").unwrap();
    writeln!(hdr, "order x-fastest").unwrap();
    writeln!(hdr, "components {}", shapes.len()).unwrap();
    for (i, s) in shapes.iter().enumerate() {
        writeln!(hdr, "shape{i} {} {} {}", s[0], s[1], s[2]).unwrap();
    }
    let bin = dir.join(format!("{name}.bin"));
    let head = dir.join(format!("{name}.hdr"));
    write_atomic(&bin, &bytes)?;
    write_atomic(&head, hdr.as_bytes())?;
    Ok(vec![bin, head])
}

pub fn raw_nodes(dir: &Path, name: &str, f: &NodeField) -> std::io::Result<Vec<PathBuf>> {
    raw_pair(dir, name, "node", &[f.grid().nodes().dims], &[f.values()])
}

pub fn raw_edges(dir: &Path, name: &str, f: &EdgeField) -> std::io::Result<Vec<PathBuf>> {
    let g = f.grid();
    let shapes = [0, 1, 2].map(|d| g.edges(d).dims);
    raw_pair(dir, name, "edge", &shapes, &[f.component(0), f.component(1), f.component(2)])
}

pub fn raw_faces(dir: &Path, name: &str, f: &FaceField) -> std::io::Result<Vec<PathBuf>> {
    let g = f.grid();
    let shapes = [0, 1, 2].map(|d| g.faces(d).dims);
    raw_pair(dir, name, "face", &shapes, &[f.component(0), f.component(1), f.component(2)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_floats() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![float(0.1), opt_float(None)]);
        let text = String::from_utf8(t.to_csv()).unwrap();
        assert_eq!(text, "a,b\r\n1.00000000000000006e-1,\r\n");
        let back: f64 = "1.00000000000000006e-1".parse().unwrap();
        assert_eq!(back, 0.1);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn vtk_header_and_counts() {
        let g = Grid::new([1.0, 1.0, 1.0], [2, 3, 4]).unwrap();
        let f = NodeField::from_fn(g, |x| x[0]);
        let text = vtk(&g, &[("u", &f)], &[("J", edge_vectors(&EdgeField::uniform(g, [1.0, 0.0, 0.0])))]);
        assert!(text.contains("DIMENSIONS 3 4 5\n"));
        assert!(text.contains("POINT_DATA 60\n"));
        let lines = text.lines().count();
        assert_eq!(lines, 8 + 2 + 60 + 1 + 60);
    }

    #[test]
    fn raw_dump_sizes() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new([1.0, 1.0, 1.0], [2, 3, 4]).unwrap();
        let e = EdgeField::uniform(g, [1.0, 2.0, 3.0]);
        raw_edges(dir.path(), "J", &e).unwrap();
        let bytes = std::fs::read(dir.path().join("J.bin")).unwrap();
        let count: usize = (0..3).map(|d| g.edges(d).len()).sum();
        assert_eq!(bytes.len(), 8 * count);
        let hdr = std::fs::read_to_string(dir.path().join("J.hdr")).unwrap();
        assert!(hdr.contains("shape0 2 4 5\n"));
        assert_eq!(f64::from_le_bytes(bytes[..8].try_into().unwrap()), 1.0);
    }
}
