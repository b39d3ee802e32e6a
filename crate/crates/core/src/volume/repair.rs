use std::collections::BTreeSet;

use super::grid::LabeledVolume;
use crate::error::{Error, Result};

/// Fills each unlabeled slice with the labels of the nearest labeled slice.
///
/// Ties between equally distant neighbors go to the lower z. Intensities are
/// left untouched.
pub fn repair_labels(volume: &LabeledVolume, unlabeled: &BTreeSet<usize>) -> Result<LabeledVolume> {
    let nz = volume.dims()[2];
    if let Some(&z) = unlabeled.iter().find(|&&z| z >= nz) {
        return Err(Error::OutOfRange(format!("slice {z} outside 0..{nz}")));
    }
    let labeled: Vec<usize> = (0..nz).filter(|z| !unlabeled.contains(z)).collect();
    if labeled.is_empty() {
        return Err(Error::Unrepairable);
    }

    let mut out = volume.clone();
    let n = volume.slice_len();
    for &z in unlabeled {
        let source = nearest_labeled(&labeled, z);
        let src = volume.label_slice(source).to_vec();
        out.parts_mut().1[z * n..(z + 1) * n].copy_from_slice(&src);
    }
    Ok(out)
}

fn nearest_labeled(labeled: &[usize], z: usize) -> usize {
    // `labeled` is sorted ascending; min_by_key keeps the first (lowest z) on ties.
    *labeled
        .iter()
        .min_by_key(|&&s| s.abs_diff(z))
        .expect("non-empty")
}
