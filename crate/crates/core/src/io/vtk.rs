//! Legacy VTK (ASCII) unstructured grids restricted to triangles (type 5) and
//! tetrahedra (type 10), with point-data scalars.

use std::fmt::Write as _;
use std::path::Path;

use super::DatasetBundle;
use crate::error::{Error, Result};
use crate::mesh::{ScalarField, SimplicialMesh};

const VTK_TRIANGLE: u32 = 5;
const VTK_TETRA: u32 = 10;

struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn new(lines: impl Iterator<Item = (usize, &'a str)>) -> Self {
        let mut items = Vec::new();
        let mut last_line = 0;
        for (n, line) in lines {
            last_line = n;
            items.extend(line.split_whitespace().map(|t| (n, t)));
        }
        Tokens {
            items,
            pos: 0,
            last_line,
        }
    }

    fn line(&self) -> usize {
        self.items.get(self.pos).map_or(self.last_line, |t| t.0)
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line(),
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<&'a str> {
        self.items.get(self.pos).map(|t| t.1)
    }

    fn next(&mut self, what: &str) -> Result<&'a str> {
        let t = self
            .peek()
            .ok_or_else(|| self.err(format!("unexpected end of file, expected {what}")))?;
        self.pos += 1;
        Ok(t)
    }

    fn keyword(&mut self, expected: &str) -> Result<()> {
        let t = self.next(expected)?;
        if t.eq_ignore_ascii_case(expected) {
            Ok(())
        } else {
            self.pos -= 1;
            Err(self.err(format!("expected {expected}, found `{t}`")))
        }
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        let t = self.next(what)?;
        let n: usize = t.parse().map_err(|_| {
            self.pos -= 1;
            self.err(format!("expected {what}, found `{t}`"))
        })?;
        // Each counted item needs at least one token, which bounds allocation.
        if n > self.items.len() {
            self.pos -= 1;
            return Err(self.err(format!("{what} {n} exceeds file contents")));
        }
        Ok(n)
    }

    fn real(&mut self, what: &str) -> Result<f64> {
        let t = self.next(what)?;
        t.parse().map_err(|_| {
            self.pos -= 1;
            self.err(format!("expected {what}, found `{t}`"))
        })
    }

    fn reals(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        if n > self.items.len() - self.pos {
            return Err(self.err(format!("{n} {what} values exceed file contents")));
        }
        (0..n).map(|_| self.real(what)).collect()
    }
}

pub fn read_vtk_unstructured(path: &Path) -> Result<DatasetBundle> {
    parse_vtk(&String::from_utf8_lossy(&std::fs::read(path)?))
}

/// Parses a legacy VTK ASCII unstructured grid.
pub fn parse_vtk(text: &str) -> Result<DatasetBundle> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    if !first
        .trim_start()
        .to_ascii_lowercase()
        .starts_with("# vtk datafile")
    {
        return Err(Error::Parse {
            line: 1,
            message: "missing `# vtk DataFile` header".into(),
        });
    }
    let _title = lines.next();
    let (n3, encoding) = lines.next().ok_or(Error::Parse {
        line: 3,
        message: "missing ASCII/BINARY line".into(),
    })?;
    match encoding.trim().to_ascii_uppercase().as_str() {
        "ASCII" => {}
        "BINARY" => return Err(Error::UnsupportedMesh("binary legacy VTK".into())),
        other => {
            return Err(Error::Parse {
                line: n3,
                message: format!("expected ASCII, found `{other}`"),
            })
        }
    }
    let mut t = Tokens::new(lines);
    t.keyword("DATASET")?;
    let kind = t.next("dataset type")?;
    if !kind.eq_ignore_ascii_case("UNSTRUCTURED_GRID") {
        return Err(Error::UnsupportedMesh(format!("dataset type {kind}")));
    }

    let mut points: Option<Vec<f64>> = None;
    let mut cells: Option<(Vec<usize>, usize)> = None;
    let mut types: Option<Vec<u32>> = None;
    let mut fields = Vec::new();
    let mut point_section = false;
    let mut section_len = 0;

    while let Some(word) = t.peek() {
        let upper = word.to_ascii_uppercase();
        t.pos += 1;
        match upper.as_str() {
            "POINTS" => {
                let n = t.count("point count")?;
                t.next("data type")?;
                points = Some(t.reals(3 * n, "coordinate")?);
            }
            "CELLS" => {
                let n = t.count("cell count")?;
                let size = t.count("cell list size")?;
                let mut flat = Vec::with_capacity(size);
                let mut per = 0;
                for c in 0..n {
                    let k = t.count("cell vertex count")?;
                    if c == 0 {
                        per = k;
                    } else if k != per {
                        return Err(Error::UnsupportedMesh(
                            "cells with differing vertex counts".into(),
                        ));
                    }
                    for _ in 0..k {
                        flat.push(t.count("vertex index")?);
                    }
                }
                if n * (per + 1) != size {
                    return Err(t.err(format!("CELLS size {size} does not match contents")));
                }
                cells = Some((flat, per));
            }
            "CELL_TYPES" => {
                let n = t.count("cell count")?;
                let mut ty = Vec::with_capacity(n);
                for _ in 0..n {
                    let v = t.count("cell type")?;
                    ty.push(u32::try_from(v).unwrap_or(u32::MAX));
                }
                types = Some(ty);
            }
            "POINT_DATA" | "CELL_DATA" => {
                point_section = upper == "POINT_DATA";
                section_len = t.count("data length")?;
            }
            "SCALARS" => {
                let name = t.next("array name")?.to_string();
                t.next("data type")?;
                let mut comps = 1;
                if let Some(p) = t.peek() {
                    if let Ok(c) = p.parse::<usize>() {
                        comps = c;
                        t.pos += 1;
                    }
                }
                if t.peek()
                    .is_some_and(|p| p.eq_ignore_ascii_case("LOOKUP_TABLE"))
                {
                    t.pos += 1;
                    t.next("lookup table name")?;
                }
                let values = t.reals(comps * section_len, "scalar")?;
                if point_section && comps == 1 {
                    fields.push(ScalarField::new(name, values)?);
                }
            }
            "VECTORS" | "NORMALS" => {
                t.next("array name")?;
                t.next("data type")?;
                t.reals(3 * section_len, "vector")?;
            }
            "LOOKUP_TABLE" => {
                t.next("table name")?;
                let n = t.count("table size")?;
                t.reals(4 * n, "color")?;
            }
            "FIELD" => {
                t.next("field name")?;
                let arrays = t.count("array count")?;
                for _ in 0..arrays {
                    let name = t.next("array name")?.to_string();
                    let comps = t.count("component count")?;
                    let tuples = t.count("tuple count")?;
                    t.next("data type")?;
                    let values = t.reals(comps * tuples, "array")?;
                    if point_section && comps == 1 && tuples == section_len {
                        fields.push(ScalarField::new(name, values)?);
                    }
                }
            }
            "METADATA" => {
                return Err(t.err("METADATA blocks are not supported"));
            }
            _ => {
                t.pos -= 1;
                return Err(t.err(format!("unexpected `{word}`")));
            }
        }
    }

    let coords = points.ok_or_else(|| t.err("missing POINTS"))?;
    let (flat, per) = cells.ok_or_else(|| t.err("missing CELLS"))?;
    let types = types.ok_or_else(|| t.err("missing CELL_TYPES"))?;
    let n_cells = flat.len().checked_div(per).unwrap_or(0);
    if types.len() != n_cells {
        return Err(t.err(format!(
            "CELL_TYPES lists {} cells, CELLS lists {n_cells}",
            types.len()
        )));
    }
    let dim = match types.first() {
        None => return Err(Error::InvalidMesh("no cells".into())),
        Some(&VTK_TRIANGLE) if per == 3 => 2,
        Some(&VTK_TETRA) if per == 4 => 3,
        Some(&ty) => return Err(Error::UnsupportedMesh(format!("VTK cell type {ty}"))),
    };
    if let Some(&ty) = types.iter().find(|&&ty| ty != types[0]) {
        return Err(Error::UnsupportedMesh(format!(
            "mixed cell types {} and {ty}",
            types[0]
        )));
    }
    let coords = if dim == 3 {
        coords
    } else {
        let z0 = coords.get(2).copied().unwrap_or(0.0);
        if coords.chunks(3).any(|p| p[2] != z0) {
            return Err(Error::UnsupportedMesh(
                "triangle mesh is not planar in z".into(),
            ));
        }
        coords.chunks(3).flat_map(|p| [p[0], p[1]]).collect()
    };
    let mesh = SimplicialMesh::new(dim, coords, flat)?;
    let bundle = DatasetBundle::new(mesh, fields);
    bundle.validate()?;
    Ok(bundle)
}

/// Shortest round-trip decimal, switching to exponent form for very large or
/// small magnitudes.
pub fn format_real(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn vtk_name(name: &str) -> String {
    let cleaned: String = name
        .chars()
        .map(|c| if c.is_whitespace() { '_' } else { c })
        .collect();
    if cleaned.is_empty() {
        "field".into()
    } else {
        cleaned
    }
}

/// Deterministic text of a bundle.
pub fn format_vtk(bundle: &DatasetBundle) -> Result<String> {
    bundle.validate()?;
    let mesh = &bundle.mesh;
    let k = mesh.vertices_per_cell();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\numz\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", mesh.vertex_count());
    for v in 0..mesh.vertex_count() {
        let p = mesh.vertex(v);
        let z = if mesh.dimension() == 3 { p[2] } else { 0.0 };
        let _ = writeln!(
            s,
            "{} {} {}",
            format_real(p[0]),
            format_real(p[1]),
            format_real(z)
        );
    }
    let _ = writeln!(
        s,
        "CELLS {} {}",
        mesh.cell_count(),
        mesh.cell_count() * (k + 1)
    );
    for c in 0..mesh.cell_count() {
        s.push_str(&k.to_string());
        for v in mesh.cell(c) {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    let ty = if mesh.dimension() == 2 {
        VTK_TRIANGLE
    } else {
        VTK_TETRA
    };
    let _ = writeln!(s, "CELL_TYPES {}", mesh.cell_count());
    for _ in 0..mesh.cell_count() {
        let _ = writeln!(s, "{ty}");
    }
    if !bundle.fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", mesh.vertex_count());
        for f in &bundle.fields {
            let _ = writeln!(
                s,
                "SCALARS {} double 1\nLOOKUP_TABLE default",
                vtk_name(&f.name)
            );
            for v in f.values() {
                s.push_str(&format_real(*v));
                s.push('\n');
            }
        }
    }
    Ok(s)
}

pub fn write_vtk_unstructured(path: &Path, bundle: &DatasetBundle) -> Result<()> {
    Ok(std::fs::write(path, format_vtk(bundle)?)?)
}
