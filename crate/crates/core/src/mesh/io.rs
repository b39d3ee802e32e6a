//! On-disk mesh cache (`MSH1`) and OBJ export.
//!
//! `MSH1` layout, little-endian:
//!
//! ```text
//! "MSH1" | u32 vertex count | u32 triangle count | f32 x,y,z per vertex | u32 a,b,c per triangle
//! ```
//!
//! The organ identity lives in the file name, not the payload.

use std::io::Write;
use std::path::{Path, PathBuf};

use super::{Point, SurfaceMesh};
use crate::error::{Error, Result};
use crate::volume::LabelKey;

pub const MESH_MAGIC: &[u8; 4] = b"MSH1";

pub fn encode_msh(mesh: &SurfaceMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 12 * mesh.vertices.len() + 12 * mesh.triangles.len());
    out.extend_from_slice(MESH_MAGIC);
    out.extend_from_slice(&(mesh.vertices.len() as u32).to_le_bytes());
    out.extend_from_slice(&(mesh.triangles.len() as u32).to_le_bytes());
    for v in &mesh.vertices {
        for c in v.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    for t in &mesh.triangles {
        for i in t {
            out.extend_from_slice(&i.to_le_bytes());
        }
    }
    out
}

pub fn decode_msh(bytes: &[u8], label: LabelKey) -> Result<SurfaceMesh> {
    if bytes.len() < 12 || &bytes[..4] != MESH_MAGIC {
        return Err(Error::Format("not an MSH1 mesh".into()));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
    let nv = word(4) as usize;
    let nt = word(8) as usize;
    let expected = nv
        .checked_mul(12)
        .and_then(|v| nt.checked_mul(12).and_then(|t| v.checked_add(t)))
        .and_then(|n| n.checked_add(12));
    if expected != Some(bytes.len()) {
        return Err(Error::Format(format!(
            "MSH1 size {} does not match {nv} vertices / {nt} triangles",
            bytes.len()
        )));
    }
    let float = |at: usize| f32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as f64;
    let vertices = (0..nv)
        .map(|i| {
            let at = 12 + 12 * i;
            Point::new(float(at), float(at + 4), float(at + 8))
        })
        .collect();
    let base = 12 + 12 * nv;
    let triangles = (0..nt)
        .map(|i| {
            let at = base + 12 * i;
            [word(at), word(at + 4), word(at + 8)]
        })
        .collect();
    let mesh = SurfaceMesh {
        label,
        vertices,
        triangles,
    };
    mesh.validate().map_err(|e| Error::Format(format!("MSH1 payload: {e}")))?;
    Ok(mesh)
}

/// `<dir>/<l1>_<l2>.msh`
pub fn mesh_cache_path(dir: &Path, label: LabelKey) -> PathBuf {
    dir.join(format!("{}_{}.msh", label.l1, label.l2))
}

/// Parses the label back out of a cache file name.
pub fn label_from_cache_path(path: &Path) -> Option<LabelKey> {
    let stem = path.file_stem()?.to_str()?;
    if path.extension()?.to_str()? != "msh" {
        return None;
    }
    let (l1, l2) = stem.split_once('_')?;
    Some(LabelKey::new(l1.parse().ok()?, l2.parse().ok()?))
}

pub fn save_msh(mesh: &SurfaceMesh, path: &Path) -> Result<()> {
    std::fs::write(path, encode_msh(mesh))?;
    Ok(())
}

pub fn load_msh(path: &Path, label: LabelKey) -> Result<SurfaceMesh> {
    decode_msh(&std::fs::read(path)?, label)
}

/// Loads every `<l1>_<l2>.msh` in `dir`, sorted by label.
pub fn load_mesh_cache(dir: &Path) -> Result<Vec<SurfaceMesh>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if let Some(label) = label_from_cache_path(&path) {
            out.push(load_msh(&path, label)?);
        }
    }
    out.sort_by_key(|m| m.label);
    Ok(out)
}

/// Wavefront OBJ (1-based indices).
pub fn write_obj<W: Write>(mesh: &SurfaceMesh, mut out: W) -> Result<()> {
    writeln!(out, "o organ_{}_{}", mesh.label.l1, mesh.label.l2)?;
    for v in &mesh.vertices {
        writeln!(out, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for t in &mesh.triangles {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}
