//! Mesh and field I/O plus synthetic dataset generators.

pub mod delaunay;
pub mod raw;
pub mod synth;
pub mod vtk;

use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{ScalarField, SimplicialMesh};

/// A mesh with any number of nodal fields sharing it.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub mesh: SimplicialMesh,
    pub fields: Vec<ScalarField>,
    /// Simulation time of each field, or empty when not time-varying.
    pub times: Vec<f64>,
}

impl DatasetBundle {
    pub fn new(mesh: SimplicialMesh, fields: Vec<ScalarField>) -> Self {
        DatasetBundle {
            mesh,
            fields,
            times: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for f in &self.fields {
            f.check_matches(&self.mesh)?;
        }
        if !self.times.is_empty() && self.times.len() != self.fields.len() {
            return Err(Error::LengthMismatch {
                expected: self.fields.len(),
                found: self.times.len(),
            });
        }
        Ok(())
    }

    pub fn field(&self, name: &str) -> Option<&ScalarField> {
        self.fields.iter().find(|f| f.name == name)
    }
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

/// Loads a mesh (and any fields) from `.vtk` or `.umesh`.
pub fn read_mesh(path: &Path) -> Result<DatasetBundle> {
    match extension(path).as_str() {
        "umesh" => Ok(DatasetBundle::new(raw::read_mesh(path)?, Vec::new())),
        _ => vtk::read_vtk_unstructured(path),
    }
}

/// Loads one field from `.umf`, `.txt` (one value per line) or `.vtk`. For
/// VTK, `name` selects the array; otherwise the first one is used.
pub fn read_field(path: &Path, name: Option<&str>) -> Result<ScalarField> {
    match extension(path).as_str() {
        "umf" => raw::read_field(path),
        "txt" | "csv" => read_text_field(path),
        _ => {
            let bundle = vtk::read_vtk_unstructured(path)?;
            let found = match name {
                Some(n) => bundle.fields.into_iter().find(|f| f.name == n),
                None => bundle.fields.into_iter().next(),
            };
            found.ok_or_else(|| {
                Error::InvalidValue(format!(
                    "{}: no point field{}",
                    path.display(),
                    name.map(|n| format!(" named `{n}`")).unwrap_or_default()
                ))
            })
        }
    }
}

/// Writes a field as `.umf`, `.txt`, or (with the mesh) `.vtk`.
pub fn write_field(path: &Path, mesh: &SimplicialMesh, field: &ScalarField) -> Result<()> {
    match extension(path).as_str() {
        "umf" => raw::write_field(path, field),
        "txt" | "csv" => {
            let text: String = field
                .values()
                .iter()
                .map(|v| format!("{}\n", vtk::format_real(*v)))
                .collect();
            Ok(std::fs::write(path, text)?)
        }
        _ => vtk::write_vtk_unstructured(
            path,
            &DatasetBundle::new(mesh.clone(), vec![field.clone()]),
        ),
    }
}

fn read_text_field(path: &Path) -> Result<ScalarField> {
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        values.push(t.parse::<f64>().map_err(|_| Error::Parse {
            line: i + 1,
            message: format!("`{t}` is not a number"),
        })?);
    }
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("field")
        .to_string();
    ScalarField::new(name, values)
}
