//! Mesh-guided volume ray marching.
//!
//! Every selected organ has a proxy surface enclosing all of its voxel cells.
//! Rays are intersected with those proxies and samples are only taken inside
//! the resulting intervals; the label grid still decides what each sample
//! shows. Samples sit on a fixed lattice along each ray, so the interval march
//! and a brute-force march over the whole volume composite the same samples.

pub mod bioscope;
pub mod intervals;
pub mod march;
pub mod scene;

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{extract_proxy_mesh, Bvh, Point, SurfaceMesh};
use crate::volume::{LabelKey, LabeledVolume, SegmentationHierarchy};

pub use bioscope::{bioscope_transform, exit_bioscope, BioscopeOutcome};
pub use intervals::{pair_hits, ray_intervals_for_selection, Interval};
pub use march::{
    composite_ray, pick_organ, pick_pixel, render_frame, render_frame_with, render_mapped,
    trace_pixel, MarchMode, MarchRay, Probe, RenderOptions, RenderStats, SampleObserver,
    TransferFunction,
};
pub use scene::{
    Camera, ClipPlane, Eye, Mode, ModelTransform, OrientedClip, Ray, RenderSettings, SceneState,
    SelectionSet,
};

/// Row-major RGBA8 image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbaImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl RgbaImage {
    pub fn filled(width: u32, height: u32, rgba: [u8; 4]) -> Self {
        RgbaImage {
            width,
            height,
            data: rgba.repeat((width * height) as usize),
        }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if data.len() != 4 * width as usize * height as usize {
            return Err(Error::Format(format!(
                "{} bytes for a {width}x{height} RGBA image",
                data.len()
            )));
        }
        Ok(RgbaImage {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 4] {
        let i = 4 * (y as usize * self.width as usize + x as usize);
        self.data[i..i + 4].try_into().expect("4 bytes")
    }

    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32, [u8; 4])> + '_ {
        self.data.chunks_exact(4).enumerate().map(|(i, px)| {
            (
                (i % self.width as usize) as u32,
                (i / self.width as usize) as u32,
                px.try_into().expect("4 bytes"),
            )
        })
    }
}

/// Immutable render inputs shared by every session.
#[derive(Clone, Debug)]
pub struct RenderContext {
    volume: LabeledVolume,
    hierarchy: SegmentationHierarchy,
    proxies: BTreeMap<LabelKey, Bvh>,
    organ_bounds: BTreeMap<LabelKey, (Point, Point)>,
}

impl RenderContext {
    /// Builds proxy surfaces for every organ present in the volume.
    pub fn new(volume: LabeledVolume, hierarchy: SegmentationHierarchy) -> Self {
        let keys: Vec<LabelKey> = volume.organ_histogram().into_keys().collect();
        let meshes: Vec<SurfaceMesh> = keys
            .par_iter()
            .map(|&k| extract_proxy_mesh(&volume, k))
            .collect();
        Self::with_proxies(volume, hierarchy, &meshes)
    }

    /// Uses caller-supplied proxy meshes. They must enclose every voxel cell of
    /// their organ for interval rendering to match a full march.
    pub fn with_proxies(
        volume: LabeledVolume,
        hierarchy: SegmentationHierarchy,
        proxies: &[SurfaceMesh],
    ) -> Self {
        let proxies = proxies.iter().map(|m| (m.label, Bvh::new(m))).collect();
        let organ_bounds = organ_cell_bounds(&volume);
        RenderContext {
            volume,
            hierarchy,
            proxies,
            organ_bounds,
        }
    }

    pub fn volume(&self) -> &LabeledVolume {
        &self.volume
    }

    pub fn hierarchy(&self) -> &SegmentationHierarchy {
        &self.hierarchy
    }

    pub fn proxies(&self) -> &BTreeMap<LabelKey, Bvh> {
        &self.proxies
    }

    /// Model-space box around an organ's voxel cells.
    pub fn organ_bounds(&self, key: LabelKey) -> Option<(Point, Point)> {
        self.organ_bounds.get(&key).copied()
    }

    /// Model-space box of the whole volume.
    pub fn model_bounds(&self) -> (Point, Point) {
        self.volume.bounds_mm()
    }
}

fn organ_cell_bounds(volume: &LabeledVolume) -> BTreeMap<LabelKey, (Point, Point)> {
    let [nx, ny, nz] = volume.dims();
    let mut boxes: BTreeMap<LabelKey, ([usize; 3], [usize; 3])> = BTreeMap::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if let Some(k) = volume.label(x, y, z).organ() {
                    let b = boxes.entry(k).or_insert(([x, y, z], [x, y, z]));
                    for (a, v) in [x, y, z].into_iter().enumerate() {
                        b.0[a] = b.0[a].min(v);
                        b.1[a] = b.1[a].max(v);
                    }
                }
            }
        }
    }
    let s = Point::from(volume.spacing());
    boxes
        .into_iter()
        .map(|(k, (lo, hi))| {
            let lo = Point::new(lo[0] as f64, lo[1] as f64, lo[2] as f64).component_mul(&s) - s * 0.5;
            let hi = Point::new(hi[0] as f64, hi[1] as f64, hi[2] as f64).component_mul(&s) + s * 0.5;
            (k, (lo, hi))
        })
        .collect()
}
