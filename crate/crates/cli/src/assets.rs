//! On-disk layout shared by the subcommands.
//!
//! A volume container `<base>.manifest` (plus its raw files) carries a
//! hierarchy sidecar `<base>.hierarchy`. `preprocess` writes an asset
//! directory:
//!
//! ```text
//! <dir>/volume.manifest, volume.intensity.raw, volume.labels.raw
//! <dir>/volume.hierarchy
//! <dir>/meshes/<l1>_<l2>.msh    smoothed, decimated organ surfaces
//! <dir>/proxies/<l1>_<l2>.msh   dilated render proxies
//! <dir>/report.json
//! ```
//!
//! `render` and `serve` accept either an asset directory or a bare container.

use std::path::{Path, PathBuf};

use anatoview_core::mesh::io::load_mesh_cache;
use anatoview_core::mesh::SurfaceMesh;
use anatoview_core::render::RenderContext;
use anatoview_core::volume::{load_volume, ContainerPaths, LabeledVolume, SegmentationHierarchy};

use crate::{CliError, CliResult};

pub const VOLUME_NAME: &str = "volume";

pub fn hierarchy_path(base: &Path) -> PathBuf {
    ContainerPaths::new(base).manifest.with_extension("hierarchy")
}

pub fn volume_base(dir: &Path) -> PathBuf {
    dir.join(VOLUME_NAME)
}

pub fn meshes_dir(dir: &Path) -> PathBuf {
    dir.join("meshes")
}

pub fn proxies_dir(dir: &Path) -> PathBuf {
    dir.join("proxies")
}

pub fn report_path(dir: &Path) -> PathBuf {
    dir.join("report.json")
}

/// Fails unless the directory that will hold `path` exists.
pub fn check_output_parent(path: &Path) -> CliResult<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if parent.is_dir() {
        Ok(())
    } else {
        Err(CliError::usage(format!(
            "cannot write {}: directory {} does not exist",
            path.display(),
            parent.display()
        )))
    }
}

/// Loads a container and its hierarchy sidecar.
pub fn load_container(base: &Path) -> CliResult<(LabeledVolume, SegmentationHierarchy)> {
    let manifest = ContainerPaths::new(base).manifest;
    if !manifest.is_file() {
        return Err(CliError::usage(format!("no volume container at {}", manifest.display())));
    }
    let volume = load_volume(base)
        .map_err(|e| CliError::usage(format!("reading {}: {e}", manifest.display())))?;
    let hpath = hierarchy_path(base);
    let hierarchy = SegmentationHierarchy::load(&hpath)
        .map_err(|e| CliError::usage(format!("reading {}: {e}", hpath.display())))?;
    Ok((volume, hierarchy))
}

pub struct Assets {
    pub volume: LabeledVolume,
    pub hierarchy: SegmentationHierarchy,
    /// Precomputed proxy meshes, when the input was an asset directory.
    pub proxies: Option<Vec<SurfaceMesh>>,
}

impl Assets {
    pub fn load(path: &Path) -> CliResult<Assets> {
        if path.is_dir() {
            let (volume, hierarchy) = load_container(&volume_base(path))?;
            let dir = proxies_dir(path);
            let proxies = if dir.is_dir() {
                Some(load_mesh_cache(&dir).map_err(|e| {
                    CliError::usage(format!("reading {}: {e}", dir.display()))
                })?)
            } else {
                None
            };
            Ok(Assets {
                volume,
                hierarchy,
                proxies,
            })
        } else {
            let (volume, hierarchy) = load_container(path)?;
            Ok(Assets {
                volume,
                hierarchy,
                proxies: None,
            })
        }
    }

    pub fn into_context(self) -> RenderContext {
        match self.proxies {
            Some(p) => RenderContext::with_proxies(self.volume, self.hierarchy, &p),
            None => RenderContext::new(self.volume, self.hierarchy),
        }
    }
}
