use std::collections::BTreeMap;

use nalgebra::Vector3;

use super::code::{LabelKey, VoxelCode};
use crate::error::{Error, Result};

pub type Dims = [usize; 3];

/// Intensity and hierarchical label grids sharing one lattice.
///
/// Voxel `(i, j, k)` has its center at `(i * sx, j * sy, k * sz)` millimeters.
/// Storage is x-fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledVolume {
    dims: Dims,
    spacing: [f64; 3],
    intensity: Vec<u8>,
    labels: Vec<VoxelCode>,
}

impl LabeledVolume {
    pub fn new(
        dims: Dims,
        spacing: [f64; 3],
        intensity: Vec<u8>,
        labels: Vec<VoxelCode>,
    ) -> Result<Self> {
        let count = voxel_count(dims)?;
        if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Dimension(format!(
                "spacing must be strictly positive, got {spacing:?}"
            )));
        }
        if intensity.len() != count || labels.len() != count {
            return Err(Error::Dimension(format!(
                "grid sizes {} / {} do not match dims {dims:?}",
                intensity.len(),
                labels.len()
            )));
        }
        Ok(LabeledVolume {
            dims,
            spacing,
            intensity,
            labels,
        })
    }

    /// An all-background volume.
    pub fn empty(dims: Dims, spacing: [f64; 3]) -> Result<Self> {
        let count = voxel_count(dims)?;
        Self::new(
            dims,
            spacing,
            vec![0; count],
            vec![VoxelCode::BACKGROUND; count],
        )
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn intensity(&self) -> &[u8] {
        &self.intensity
    }

    pub fn labels(&self) -> &[VoxelCode] {
        &self.labels
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut [u8], &mut [VoxelCode]) {
        (&mut self.intensity, &mut self.labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn label(&self, x: usize, y: usize, z: usize) -> VoxelCode {
        self.labels[self.index(x, y, z)]
    }

    #[inline]
    pub fn intensity_at(&self, x: usize, y: usize, z: usize) -> u8 {
        self.intensity[self.index(x, y, z)]
    }

    pub fn slice_len(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    pub fn label_slice(&self, z: usize) -> &[VoxelCode] {
        let n = self.slice_len();
        &self.labels[z * n..(z + 1) * n]
    }

    pub fn intensity_slice(&self, z: usize) -> &[u8] {
        let n = self.slice_len();
        &self.intensity[z * n..(z + 1) * n]
    }

    /// Index of the voxel whose cell contains `p` (millimeters), if any.
    #[inline]
    pub fn nearest_voxel(&self, p: &Vector3<f64>) -> Option<[usize; 3]> {
        let mut out = [0usize; 3];
        for axis in 0..3 {
            let f = (p[axis] / self.spacing[axis] + 0.5).floor();
            if !(f >= 0.0 && f < self.dims[axis] as f64) {
                return None;
            }
            out[axis] = f as usize;
        }
        Some(out)
    }

    /// Label and intensity of the voxel cell containing `p`; background outside the grid.
    #[inline]
    pub fn sample_nearest(&self, p: &Vector3<f64>) -> (VoxelCode, u8) {
        match self.nearest_voxel(p) {
            Some([x, y, z]) => {
                let i = self.index(x, y, z);
                (self.labels[i], self.intensity[i])
            }
            None => (VoxelCode::BACKGROUND, 0),
        }
    }

    /// Voxel counts per organ (L1, L2), background excluded.
    pub fn organ_histogram(&self) -> BTreeMap<LabelKey, usize> {
        let mut hist = BTreeMap::new();
        for code in &self.labels {
            if let Some(key) = code.organ() {
                *hist.entry(key).or_insert(0) += 1;
            }
        }
        hist
    }

    /// Axis-aligned extent of the voxel cells in millimeters: `(min, max)`.
    pub fn bounds_mm(&self) -> (Vector3<f64>, Vector3<f64>) {
        let s = Vector3::from(self.spacing);
        let lo = -0.5 * s;
        let hi = Vector3::new(
            (self.dims[0] as f64 - 0.5) * s.x,
            (self.dims[1] as f64 - 0.5) * s.y,
            (self.dims[2] as f64 - 0.5) * s.z,
        );
        (lo, hi)
    }

    /// Voxel-center bounding box of one organ, in millimeters.
    pub fn organ_bounds_mm(&self, key: LabelKey) -> Option<(Vector3<f64>, Vector3<f64>)> {
        let [nx, ny, nz] = self.dims;
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut found = false;
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    if self.label(x, y, z).organ() == Some(key) {
                        found = true;
                        for (axis, v) in [x, y, z].into_iter().enumerate() {
                            lo[axis] = lo[axis].min(v);
                            hi[axis] = hi[axis].max(v);
                        }
                    }
                }
            }
        }
        found.then(|| {
            let to_mm = |v: [usize; 3]| {
                Vector3::new(
                    v[0] as f64 * self.spacing[0],
                    v[1] as f64 * self.spacing[1],
                    v[2] as f64 * self.spacing[2],
                )
            };
            (to_mm(lo), to_mm(hi))
        })
    }

    /// Keeps every `factor`-th voxel along each axis.
    pub fn downsample(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::OutOfRange("downsample factor must be >= 1".into()));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let dims = self.dims.map(|n| n.div_ceil(factor));
        let mut intensity = Vec::with_capacity(dims.iter().product());
        let mut labels = Vec::with_capacity(intensity.capacity());
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let i = self.index(x * factor, y * factor, z * factor);
                    intensity.push(self.intensity[i]);
                    labels.push(self.labels[i]);
                }
            }
        }
        let spacing = self.spacing.map(|s| s * factor as f64);
        Self::new(dims, spacing, intensity, labels)
    }
}

pub(crate) fn voxel_count(dims: Dims) -> Result<usize> {
    if dims.contains(&0) {
        return Err(Error::Dimension(format!("zero-sized dims {dims:?}")));
    }
    dims.iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .ok_or_else(|| Error::Dimension(format!("dims {dims:?} overflow")))
}
