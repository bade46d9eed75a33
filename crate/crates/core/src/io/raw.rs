//! Compact little-endian binary files for large meshes (`.umesh`) and fields
//! (`.umf`). Layouts are given in `FORMAT.md`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::huffman::Reader;
use crate::mesh::{ScalarField, SimplicialMesh};

pub const MESH_MAGIC: [u8; 4] = *b"UMSH";
pub const FIELD_MAGIC: [u8; 4] = *b"UMFD";
pub const RAW_VERSION: u8 = 1;

fn parse_err(e: Error) -> Error {
    match e {
        Error::CorruptStream { position, reason } => Error::Parse {
            line: 0,
            message: format!("byte {position}: {reason}"),
        },
        other => other,
    }
}

fn header(r: &mut Reader<'_>, magic: &[u8; 4]) -> Result<()> {
    if r.take(4, "magic")? != magic {
        return Err(Error::corrupt(0, "bad magic"));
    }
    let v = r.u8("version")?;
    if v != RAW_VERSION {
        return Err(Error::UnsupportedVersion(v));
    }
    Ok(())
}

fn checked_count(r: &Reader<'_>, count: u64, width: u64, what: &str) -> Result<usize> {
    match count.checked_mul(width) {
        Some(bytes) if bytes <= r.remaining() as u64 => Ok(count as usize),
        _ => Err(Error::corrupt(
            r.position(),
            format!("{what} count {count} exceeds file size"),
        )),
    }
}

pub fn encode_mesh(mesh: &SimplicialMesh) -> Result<Vec<u8>> {
    if mesh.vertex_count() > u32::MAX as usize {
        return Err(Error::UnsupportedMesh("more than 2^32 vertices".into()));
    }
    let mut out = Vec::with_capacity(22 + 8 * mesh.coords().len() + 4 * mesh.cells().len());
    out.extend_from_slice(&MESH_MAGIC);
    out.push(RAW_VERSION);
    out.push(mesh.dimension() as u8);
    out.extend_from_slice(&(mesh.vertex_count() as u64).to_le_bytes());
    out.extend_from_slice(&(mesh.cell_count() as u64).to_le_bytes());
    for x in mesh.coords() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for &v in mesh.cells() {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_mesh(bytes: &[u8]) -> Result<SimplicialMesh> {
    let inner = || -> Result<SimplicialMesh> {
        let mut r = Reader::new(bytes, 0);
        header(&mut r, &MESH_MAGIC)?;
        let dim = r.u8("dimension")? as usize;
        if dim != 2 && dim != 3 {
            return Err(Error::corrupt(5, format!("dimension {dim}")));
        }
        let nv = r.u64("vertex count")?;
        let nc = r.u64("cell count")?;
        let nv = checked_count(&r, nv, 8 * dim as u64, "vertex")?;
        let coords = (0..nv * dim)
            .map(|_| r.f64("coordinate"))
            .collect::<Result<Vec<_>>>()?;
        let nc = checked_count(&r, nc, 4 * (dim as u64 + 1), "cell")?;
        let cells = (0..nc * (dim + 1))
            .map(|_| r.u32("vertex index").map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        if r.remaining() != 0 {
            return Err(Error::corrupt(r.position(), "trailing bytes"));
        }
        SimplicialMesh::new(dim, coords, cells)
    };
    inner().map_err(parse_err)
}

pub fn encode_field(field: &ScalarField) -> Vec<u8> {
    let name = field.name.as_bytes();
    let mut out = Vec::with_capacity(21 + name.len() + 8 * field.len());
    out.extend_from_slice(&FIELD_MAGIC);
    out.push(RAW_VERSION);
    out.extend_from_slice(&(field.len() as u64).to_le_bytes());
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name);
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_field(bytes: &[u8]) -> Result<ScalarField> {
    let inner = || -> Result<ScalarField> {
        let mut r = Reader::new(bytes, 0);
        header(&mut r, &FIELD_MAGIC)?;
        let n = r.u64("value count")?;
        let name_len = r.u32("name length")? as usize;
        let pos = r.position();
        let name = std::str::from_utf8(r.take(name_len, "name")?)
            .map_err(|_| Error::corrupt(pos, "name is not UTF-8"))?
            .to_string();
        let n = checked_count(&r, n, 8, "value")?;
        let values = (0..n).map(|_| r.f64("value")).collect::<Result<Vec<_>>>()?;
        if r.remaining() != 0 {
            return Err(Error::corrupt(r.position(), "trailing bytes"));
        }
        ScalarField::new(name, values)
    };
    inner().map_err(parse_err)
}

pub fn read_mesh(path: &Path) -> Result<SimplicialMesh> {
    decode_mesh(&std::fs::read(path)?)
}

pub fn write_mesh(path: &Path, mesh: &SimplicialMesh) -> Result<()> {
    Ok(std::fs::write(path, encode_mesh(mesh)?)?)
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    decode_field(&std::fs::read(path)?)
}

pub fn write_field(path: &Path, field: &ScalarField) -> Result<()> {
    Ok(std::fs::write(path, encode_field(field))?)
}
