//! Synthetic labeled phantoms used in place of cadaver data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::code::{encode_code, LabelKey};
use super::grid::{Dims, LabeledVolume};
use super::hierarchy::{HierarchyEntry, Rgba, SegmentationHierarchy};
use crate::error::{Error, Result};

/// Geometry in voxel-index coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Ellipsoid {
        center: [f64; 3],
        radii: [f64; 3],
    },
    /// Ellipsoid minus a concentric ellipsoid shrunk by `thickness` voxels.
    Shell {
        center: [f64; 3],
        radii: [f64; 3],
        thickness: f64,
    },
    /// Disk in every slice of `z_range`, radius varying linearly from `r0` to `r1`.
    Frustum {
        center_xy: [f64; 2],
        z_range: [f64; 2],
        r0: f64,
        r1: f64,
    },
}

impl Shape {
    fn contains(&self, p: [f64; 3]) -> bool {
        match *self {
            Shape::Ellipsoid { center, radii } => ellipsoid_level(p, center, radii) <= 1.0,
            Shape::Shell {
                center,
                radii,
                thickness,
            } => {
                let inner = radii.map(|r| r - thickness);
                ellipsoid_level(p, center, radii) <= 1.0
                    && (inner.iter().any(|&r| r <= 0.0) || ellipsoid_level(p, center, inner) > 1.0)
            }
            Shape::Frustum {
                center_xy,
                z_range,
                r0,
                r1,
            } => {
                let [za, zb] = z_range;
                if p[2] < za || p[2] > zb {
                    return false;
                }
                let t = if zb > za { (p[2] - za) / (zb - za) } else { 0.0 };
                let r = r0 + t * (r1 - r0);
                let dx = p[0] - center_xy[0];
                let dy = p[1] - center_xy[1];
                dx * dx + dy * dy <= r * r
            }
        }
    }

    /// Inclusive voxel-coordinate bounding box.
    fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        match *self {
            Shape::Ellipsoid { center, radii } | Shape::Shell { center, radii, .. } => (
                [0, 1, 2].map(|a| center[a] - radii[a]),
                [0, 1, 2].map(|a| center[a] + radii[a]),
            ),
            Shape::Frustum {
                center_xy,
                z_range,
                r0,
                r1,
            } => {
                let r = r0.max(r1);
                (
                    [center_xy[0] - r, center_xy[1] - r, z_range[0]],
                    [center_xy[0] + r, center_xy[1] + r, z_range[1]],
                )
            }
        }
    }
}

fn ellipsoid_level(p: [f64; 3], c: [f64; 3], r: [f64; 3]) -> f64 {
    (0..3).map(|a| ((p[a] - c[a]) / r[a]).powi(2)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrganShape {
    pub l1: u8,
    pub l2: u8,
    pub name: String,
    #[serde(default)]
    pub color: Option<String>,
    pub shape: Shape,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: Dims,
    pub spacing: [f64; 3],
    #[serde(default)]
    pub seed: u64,
    pub organs: Vec<OrganShape>,
}

impl PhantomSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("phantom spec: {e}")))
    }

    /// Built-in specs: `sphere`, `three-organs`, `growing-disk`.
    pub fn preset(name: &str) -> Option<Self> {
        let organ = |l1, l2, name: &str, color: &str, shape| OrganShape {
            l1,
            l2,
            name: name.to_string(),
            color: Some(color.to_string()),
            shape,
        };
        let spec = match name {
            "sphere" => PhantomSpec {
                dims: [64, 64, 64],
                spacing: [1.0; 3],
                seed: 7,
                organs: vec![organ(
                    1,
                    1,
                    "sphere",
                    "#D04040C0",
                    Shape::Ellipsoid {
                        center: [31.5, 31.5, 31.5],
                        radii: [10.0; 3],
                    },
                )],
            },
            "three-organs" => PhantomSpec {
                dims: [64, 64, 64],
                spacing: [1.0; 3],
                seed: 7,
                organs: vec![
                    organ(
                        3,
                        5,
                        "liver",
                        "#A0522DB0",
                        Shape::Ellipsoid {
                            center: [22.0, 32.0, 30.0],
                            radii: [13.0, 10.0, 9.0],
                        },
                    ),
                    organ(
                        1,
                        2,
                        "heart",
                        "#E03030D0",
                        Shape::Shell {
                            center: [45.0, 30.0, 42.0],
                            radii: [9.0, 8.0, 9.0],
                            thickness: 3.0,
                        },
                    ),
                    organ(
                        6,
                        3,
                        "kidney",
                        "#6080E0C0",
                        Shape::Ellipsoid {
                            center: [44.0, 36.0, 16.0],
                            radii: [5.0, 7.0, 8.0],
                        },
                    ),
                ],
            },
            "growing-disk" => PhantomSpec {
                dims: [64, 64, 60],
                spacing: [1.0; 3],
                seed: 7,
                organs: vec![
                    organ(
                        2,
                        1,
                        "growing",
                        "#40C040C0",
                        Shape::Frustum {
                            center_xy: [22.0, 32.0],
                            z_range: [0.0, 59.0],
                            r0: 6.0,
                            r1: 20.0,
                        },
                    ),
                    organ(
                        4,
                        2,
                        "shrinking",
                        "#C0C040C0",
                        Shape::Frustum {
                            center_xy: [48.0, 32.0],
                            z_range: [0.0, 59.0],
                            r0: 12.0,
                            r1: 4.0,
                        },
                    ),
                ],
            },
            _ => return None,
        };
        Some(spec)
    }

    pub fn preset_names() -> &'static [&'static str] {
        &["sphere", "three-organs", "growing-disk"]
    }

    pub fn hierarchy(&self) -> Result<SegmentationHierarchy> {
        let mut entries: Vec<HierarchyEntry> = Vec::new();
        for organ in &self.organs {
            let key = LabelKey::new(organ.l1, organ.l2);
            if entries.iter().any(|e| e.key == key) {
                continue;
            }
            let color = match &organ.color {
                Some(c) => c.parse()?,
                None => default_color(key),
            };
            entries.push(HierarchyEntry {
                key,
                name: organ.name.clone(),
                color,
            });
        }
        SegmentationHierarchy::new(entries)
    }
}

fn default_color(key: LabelKey) -> Rgba {
    let h = (key.l1 as u32 * 97 + key.l2 as u32 * 57) % 256;
    Rgba([
        (64 + h % 192) as u8,
        (64 + (h * 7) % 192) as u8,
        (64 + (h * 13) % 192) as u8,
        0xC0,
    ])
}

/// Rasterizes the organs at voxel centers. Later organs overwrite earlier ones.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<LabeledVolume> {
    let dims = spec.dims;
    if dims.iter().any(|&n| n < 8) {
        return Err(Error::Dimension(format!("phantom dims {dims:?} below 8")));
    }
    let mut codes = Vec::with_capacity(spec.organs.len());
    for organ in &spec.organs {
        if organ.l1 == 0 && organ.l2 == 0 {
            return Err(Error::Geometry(format!("organ {:?} uses the background label", organ.name)));
        }
        codes.push(encode_code(organ.l1 as i64, organ.l2 as i64, 0)?);
        let (lo, hi) = organ.shape.bounds();
        for axis in 0..3 {
            let max = (dims[axis] - 1) as f64;
            if lo[axis] < 0.0 || hi[axis] > max || lo[axis] > hi[axis] {
                return Err(Error::Geometry(format!(
                    "organ {:?} exceeds the grid along axis {axis}: [{}, {}] not within [0, {max}]",
                    organ.name, lo[axis], hi[axis]
                )));
            }
        }
    }

    let mut volume = LabeledVolume::empty(dims, spec.spacing)?;
    let ripple = Ripple::new(spec.seed);
    let [nx, ny, nz] = dims;
    let (intensity, labels) = volume.parts_mut();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let p = [x as f64, y as f64, z as f64];
                let i = x + nx * (y + ny * z);
                for (organ, &code) in spec.organs.iter().zip(&codes) {
                    if organ.shape.contains(p) {
                        labels[i] = code;
                    }
                }
                if !labels[i].is_background() {
                    let base = 40.0 + 15.0 * labels[i].l2() as f64;
                    intensity[i] = (base + ripple.at(p)).round().clamp(0.0, 255.0) as u8;
                }
            }
        }
    }
    Ok(volume)
}

struct Ripple {
    phase: [f64; 3],
}

impl Ripple {
    const AMPLITUDE: f64 = 6.0;
    const FREQ: [f64; 3] = [0.45, 0.40, 0.35];

    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ripple {
            phase: [0; 3].map(|_| rng.random_range(0.0..std::f64::consts::TAU)),
        }
    }

    fn at(&self, p: [f64; 3]) -> f64 {
        Self::AMPLITUDE
            * (0..3)
                .map(|a| (Self::FREQ[a] * p[a] + self.phase[a]).sin())
                .product::<f64>()
    }
}
