//! Dense label grids from sparse segmentation slices.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use super::hermite::blend;
use super::sdf::{sentinel_distance, signed_distance_2d, DistanceField};
use crate::error::{Error, Result};
use crate::volume::{LabelKey, LabeledVolume, VoxelCode};

/// Labeled key slices taken every `stride` slices, starting at z = 0.
#[derive(Clone, Debug)]
pub struct SparseSlices {
    pub nx: usize,
    pub ny: usize,
    pub pixel: [f64; 2],
    pub stride: usize,
    pub slices: Vec<Vec<VoxelCode>>,
}

impl SparseSlices {
    /// Key slices `0, stride, 2*stride, ...` of a full-dims volume.
    pub fn from_volume(volume: &LabeledVolume, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::OutOfRange("stride must be >= 1".into()));
        }
        let [nx, ny, nz] = volume.dims();
        let spacing = volume.spacing();
        Ok(SparseSlices {
            nx,
            ny,
            pixel: [spacing[0], spacing[1]],
            stride,
            slices: (0..nz)
                .step_by(stride)
                .map(|z| volume.label_slice(z).to_vec())
                .collect(),
        })
    }
}

/// Per-key-slice distance fields for the organs present on that slice.
struct KeyFields {
    present: BTreeSet<LabelKey>,
    fields: BTreeMap<LabelKey, DistanceField>,
}

/// Interpolates `out_nz` slices from the key slices.
///
/// Output slice `z` lies in slab `i = z / stride` at `lambda = (z % stride) / stride`.
/// Each organ present on key `i` or `i + 1` is blended through its own homotopy;
/// the pixel takes the organ with the most negative value, or background if
/// none is negative. Key positions copy their input slice verbatim. The last
/// slab reuses `phi_{i+1}` for the missing `phi_{i+2}`; slices past the last
/// key repeat it.
pub fn resample_segmentation(sparse: &SparseSlices, out_nz: usize) -> Result<Vec<Vec<VoxelCode>>> {
    let n = sparse.nx * sparse.ny;
    if n == 0 {
        return Err(Error::Dimension("empty slices".into()));
    }
    if sparse.stride < 2 {
        return Err(Error::OutOfRange(format!(
            "stride {} must be >= 2 for interpolation",
            sparse.stride
        )));
    }
    if sparse.slices.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} key slices, need at least 3",
            sparse.slices.len()
        )));
    }
    if let Some(bad) = sparse.slices.iter().position(|s| s.len() != n) {
        return Err(Error::Dimension(format!(
            "key slice {bad} has {} pixels, expected {n}",
            sparse.slices[bad].len()
        )));
    }

    let large = sentinel_distance(sparse.nx, sparse.ny, sparse.pixel);
    let keys: Vec<KeyFields> = sparse
        .slices
        .par_iter()
        .map(|slice| key_fields(slice, sparse))
        .collect::<Result<_>>()?;

    let last = sparse.slices.len() - 1;
    (0..out_nz)
        .into_par_iter()
        .map(|z| {
            let i = z / sparse.stride;
            let offset = z % sparse.stride;
            if i >= last || offset == 0 {
                return Ok(sparse.slices[i.min(last)].clone());
            }
            let lambda = offset as f64 / sparse.stride as f64;
            let i2 = (i + 2).min(last);
            let candidates: BTreeSet<LabelKey> =
                keys[i].present.union(&keys[i + 1].present).copied().collect();
            blend_slice(&keys, [i, i + 1, i2], &candidates, lambda, large, n)
        })
        .collect()
}

fn key_fields(slice: &[VoxelCode], sparse: &SparseSlices) -> Result<KeyFields> {
    let present: BTreeSet<LabelKey> = slice.iter().filter_map(|c| c.organ()).collect();
    let mut fields = BTreeMap::new();
    for &key in &present {
        let mask: Vec<bool> = slice.iter().map(|c| c.organ() == Some(key)).collect();
        fields.insert(
            key,
            signed_distance_2d(&mask, sparse.nx, sparse.ny, sparse.pixel)?,
        );
    }
    Ok(KeyFields { present, fields })
}

fn blend_slice(
    keys: &[KeyFields],
    idx: [usize; 3],
    candidates: &BTreeSet<LabelKey>,
    lambda: f64,
    large: f64,
    n: usize,
) -> Result<Vec<VoxelCode>> {
    let mut best = vec![0.0f64; n];
    let mut out = vec![VoxelCode::BACKGROUND; n];
    for &key in candidates {
        let code = key.code()?;
        let fields = idx.map(|i| keys[i].fields.get(&key));
        for p in 0..n {
            let phi = fields.map(|f| f.map_or(large, |f| f.values()[p]));
            let h = blend(phi, lambda);
            // Strictly below both zero and the current best; ties keep the lower key.
            if h < best[p] {
                best[p] = h;
                out[p] = code;
            }
        }
    }
    Ok(out)
}

/// Replaces the labels of `volume` with homotopy-interpolated ones built from
/// every `stride`-th slice. Stride 1 returns the volume unchanged.
pub fn resample_volume(volume: &LabeledVolume, stride: usize) -> Result<LabeledVolume> {
    if stride == 1 {
        return Ok(volume.clone());
    }
    let sparse = SparseSlices::from_volume(volume, stride)?;
    let [_, _, nz] = volume.dims();
    let slices = resample_segmentation(&sparse, nz)?;
    let labels: Vec<VoxelCode> = slices.into_iter().flatten().collect();
    LabeledVolume::new(
        volume.dims(),
        volume.spacing(),
        volume.intensity().to_vec(),
        labels,
    )
}

/// Dice overlap `2|A∩B| / (|A| + |B|)` per organ present in either grid.
///
/// An organ absent from both grids is not reported.
pub fn dice_per_label(a: &[VoxelCode], b: &[VoxelCode]) -> BTreeMap<LabelKey, f64> {
    let mut counts: BTreeMap<LabelKey, [usize; 3]> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        let (ka, kb) = (x.organ(), y.organ());
        if let Some(k) = ka {
            counts.entry(k).or_default()[0] += 1;
        }
        if let Some(k) = kb {
            counts.entry(k).or_default()[1] += 1;
        }
        if let (Some(k), true) = (ka, ka == kb) {
            counts.entry(k).or_default()[2] += 1;
        }
    }
    counts
        .into_iter()
        .map(|(k, [na, nb, both])| (k, 2.0 * both as f64 / (na + nb) as f64))
        .collect()
}
