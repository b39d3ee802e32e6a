use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::PathBuf;

use anatoview_core::homotopy::{dice_per_label, resample_volume};
use anatoview_core::mesh::io::{mesh_cache_path, save_msh};
use anatoview_core::mesh::taubin::{DEFAULT_ITERATIONS, DEFAULT_LAMBDA, DEFAULT_MU};
use anatoview_core::mesh::{
    decimate_mesh, extract_mesh, extract_proxy_mesh, taubin_smooth, MeshStats, SurfaceMesh,
};
use anatoview_core::volume::{repair_labels, save_volume, LabelKey, LabeledVolume, VoxelCode};
use rayon::prelude::*;
use serde::Serialize;

use crate::assets::{
    hierarchy_path, load_container, meshes_dir, proxies_dir, report_path, volume_base,
};
use crate::parse;
use crate::{CliError, CliResult};

pub struct PreprocessArgs {
    pub input: PathBuf,
    pub out: PathBuf,
    pub stride: usize,
    pub downsample: usize,
    /// Slices whose labels are missing and must be repaired before resampling.
    pub gaps: Vec<usize>,
    /// Organs to mesh; `None` meshes every organ present.
    pub select: Option<String>,
    /// Fraction of triangles kept by decimation.
    pub decimate: f64,
}

#[derive(Debug, Serialize)]
pub struct MeshReport {
    pub label: String,
    pub name: String,
    pub file: String,
    pub extracted: MeshStats,
    pub smoothed: MeshStats,
    pub decimated: MeshStats,
}

#[derive(Debug, Serialize)]
pub struct PreprocessReport {
    pub input: String,
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub stride: usize,
    pub downsample: usize,
    pub repaired_slices: Vec<usize>,
    pub key_slices: Vec<usize>,
    /// Per-organ Dice between input and output over the key slices only.
    pub dice_at_key_slices: BTreeMap<String, f64>,
    pub min_dice_at_key_slices: f64,
    pub voxels_per_organ: BTreeMap<String, usize>,
    pub meshes: Vec<MeshReport>,
    pub proxies: usize,
}

fn label_name(key: LabelKey) -> String {
    format!("{}:{}", key.l1, key.l2)
}

fn key_slice_labels(volume: &LabeledVolume, keys: &[usize]) -> Vec<VoxelCode> {
    keys.iter()
        .flat_map(|&z| volume.label_slice(z).iter().copied())
        .collect()
}

fn build_mesh(volume: &LabeledVolume, key: LabelKey, keep: f64) -> anatoview_core::Result<[SurfaceMesh; 3]> {
    let raw = extract_mesh(volume, key, 0.0);
    let smooth = taubin_smooth(&raw, DEFAULT_ITERATIONS, DEFAULT_LAMBDA, DEFAULT_MU)?;
    let target = ((smooth.triangles.len() as f64 * keep).ceil() as usize).max(4);
    let decimated = decimate_mesh(&smooth, target)?;
    Ok([raw, smooth, decimated])
}

pub fn run(args: &PreprocessArgs) -> CliResult<PreprocessReport> {
    if args.stride == 0 {
        return Err(CliError::usage("--stride must be at least 1"));
    }
    if args.downsample == 0 {
        return Err(CliError::usage("--downsample must be at least 1"));
    }
    if !(args.decimate > 0.0 && args.decimate <= 1.0) {
        return Err(CliError::usage("--decimate must lie in (0, 1]"));
    }
    let (volume, hierarchy) = load_container(&args.input)?;
    let targets: Option<BTreeSet<LabelKey>> = match &args.select {
        Some(text) => Some(parse::selection(text, &hierarchy)?.into_iter().collect()),
        None => None,
    };
    let volume = volume
        .downsample(args.downsample)
        .map_err(CliError::stage("downsample"))?;
    let nz = volume.dims()[2];
    if let Some(&z) = args.gaps.iter().find(|&&z| z >= nz) {
        return Err(CliError::usage(format!("--gaps: slice {z} outside 0..{nz}")));
    }
    fs::create_dir_all(meshes_dir(&args.out))
        .and_then(|_| fs::create_dir_all(proxies_dir(&args.out)))
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", args.out.display())))?;

    let gaps: BTreeSet<usize> = args.gaps.iter().copied().collect();
    let repaired = if gaps.is_empty() {
        volume
    } else {
        repair_labels(&volume, &gaps).map_err(CliError::stage("repair"))?
    };
    let resampled = resample_volume(&repaired, args.stride).map_err(CliError::stage("resample"))?;

    let key_slices: Vec<usize> = (0..nz).step_by(args.stride).collect();
    let dice = dice_per_label(
        &key_slice_labels(&repaired, &key_slices),
        &key_slice_labels(&resampled, &key_slices),
    );
    let min_dice = dice.values().copied().fold(1.0, f64::min);

    let histogram = resampled.organ_histogram();
    let mesh_keys: Vec<LabelKey> = histogram
        .keys()
        .copied()
        .filter(|k| targets.as_ref().is_none_or(|t| t.contains(k)))
        .collect();
    let meshes: Vec<[SurfaceMesh; 3]> = mesh_keys
        .par_iter()
        .map(|&k| build_mesh(&resampled, k, args.decimate))
        .collect::<anatoview_core::Result<_>>()
        .map_err(CliError::stage("mesh"))?;
    let proxies: Vec<SurfaceMesh> = histogram
        .keys()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&&k| extract_proxy_mesh(&resampled, k))
        .collect();

    let write = |e: anatoview_core::Error| CliError::Pipeline {
        stage: "write",
        message: e.to_string(),
    };
    let base = volume_base(&args.out);
    save_volume(&resampled, &base).map_err(write)?;
    hierarchy.save(&hierarchy_path(&base)).map_err(write)?;
    let mut mesh_reports = Vec::new();
    for [raw, smooth, decimated] in &meshes {
        let path = mesh_cache_path(&meshes_dir(&args.out), decimated.label);
        save_msh(decimated, &path).map_err(write)?;
        mesh_reports.push(MeshReport {
            label: label_name(decimated.label),
            name: hierarchy
                .get(decimated.label)
                .map(|e| e.name.clone())
                .unwrap_or_default(),
            file: path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
            extracted: raw.stats(),
            smoothed: smooth.stats(),
            decimated: decimated.stats(),
        });
    }
    for proxy in &proxies {
        save_msh(proxy, &mesh_cache_path(&proxies_dir(&args.out), proxy.label)).map_err(write)?;
    }

    let report = PreprocessReport {
        input: args.input.display().to_string(),
        dims: resampled.dims(),
        spacing_mm: resampled.spacing(),
        stride: args.stride,
        downsample: args.downsample,
        repaired_slices: gaps.into_iter().collect(),
        key_slices,
        dice_at_key_slices: dice.into_iter().map(|(k, v)| (label_name(k), v)).collect(),
        min_dice_at_key_slices: min_dice,
        voxels_per_organ: histogram.into_iter().map(|(k, v)| (label_name(k), v)).collect(),
        meshes: mesh_reports,
        proxies: proxies.len(),
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(report_path(&args.out), json + "\n").map_err(|e| CliError::Pipeline {
        stage: "write",
        message: e.to_string(),
    })?;
    if report.min_dice_at_key_slices < 1.0 {
        return Err(CliError::Pipeline {
            stage: "resample",
            message: format!(
                "key slices changed during resampling (min Dice {})",
                report.min_dice_at_key_slices
            ),
        });
    }
    Ok(report)
}
