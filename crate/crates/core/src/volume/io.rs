//! On-disk volume container.
//!
//! `<name>.manifest` is a TOML document; `<name>.intensity.raw` holds one byte
//! per voxel and `<name>.labels.raw` one little-endian `u16` per voxel, both
//! x-fastest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::code::VoxelCode;
use super::grid::{voxel_count, LabeledVolume};
use crate::error::{Error, Result};

pub const VOLUME_MAGIC: &str = "VXS1";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    magic: String,
    dims: [usize; 3],
    spacing_mm: [f64; 3],
    intensity_bits: u32,
    label_bits: u32,
    byte_order: String,
}

/// The three file paths making up a container rooted at `base`.
///
/// `base` may be given with or without the `.manifest` extension.
#[derive(Clone, Debug)]
pub struct ContainerPaths {
    pub manifest: PathBuf,
    pub intensity: PathBuf,
    pub labels: PathBuf,
}

impl ContainerPaths {
    pub fn new(base: &Path) -> Self {
        let base = match base.extension() {
            Some(ext) if ext == "manifest" => base.with_extension(""),
            _ => base.to_path_buf(),
        };
        let with = |suffix: &str| {
            let mut s = base.clone().into_os_string();
            s.push(suffix);
            PathBuf::from(s)
        };
        ContainerPaths {
            manifest: with(".manifest"),
            intensity: with(".intensity.raw"),
            labels: with(".labels.raw"),
        }
    }
}

pub fn save_volume(volume: &LabeledVolume, base: &Path) -> Result<()> {
    let paths = ContainerPaths::new(base);
    let manifest = Manifest {
        magic: VOLUME_MAGIC.to_string(),
        dims: volume.dims(),
        spacing_mm: volume.spacing(),
        intensity_bits: 8,
        label_bits: 16,
        byte_order: "LE".to_string(),
    };
    let text = toml::to_string(&manifest)
        .map_err(|e| Error::Format(format!("manifest encode: {e}")))?;
    fs::write(&paths.manifest, text)?;
    fs::write(&paths.intensity, volume.intensity())?;
    let mut label_bytes = Vec::with_capacity(volume.len() * 2);
    for code in volume.labels() {
        label_bytes.extend_from_slice(&code.raw().to_le_bytes());
    }
    fs::write(&paths.labels, label_bytes)?;
    Ok(())
}

pub fn load_volume(base: &Path) -> Result<LabeledVolume> {
    let paths = ContainerPaths::new(base);
    let text = fs::read_to_string(&paths.manifest)?;
    let manifest: Manifest =
        toml::from_str(&text).map_err(|e| Error::Format(format!("manifest: {e}")))?;
    if manifest.magic != VOLUME_MAGIC {
        return Err(Error::Format(format!("bad magic {:?}", manifest.magic)));
    }
    if manifest.intensity_bits != 8 || manifest.label_bits != 16 {
        return Err(Error::Format(format!(
            "unsupported bit depths {}/{}",
            manifest.intensity_bits, manifest.label_bits
        )));
    }
    if !manifest.byte_order.eq_ignore_ascii_case("LE") {
        return Err(Error::Format(format!(
            "unsupported byte order {:?}",
            manifest.byte_order
        )));
    }
    let count = voxel_count(manifest.dims).map_err(|e| Error::Format(e.to_string()))?;

    let intensity = fs::read(&paths.intensity)?;
    if intensity.len() != count {
        return Err(Error::Format(format!(
            "intensity blob has {} bytes, dims {:?} need {count}",
            intensity.len(),
            manifest.dims
        )));
    }
    let label_bytes = fs::read(&paths.labels)?;
    if label_bytes.len() != 2 * count {
        return Err(Error::Format(format!(
            "label blob has {} bytes, dims {:?} need {}",
            label_bytes.len(),
            manifest.dims,
            2 * count
        )));
    }
    let labels = label_bytes
        .chunks_exact(2)
        .map(|b| VoxelCode::from_raw(u16::from_le_bytes([b[0], b[1]])))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::Format(e.to_string()))?;
    LabeledVolume::new(manifest.dims, manifest.spacing_mm, intensity, labels)
        .map_err(|e| Error::Format(e.to_string()))
}
