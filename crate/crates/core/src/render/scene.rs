use std::collections::BTreeSet;

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::volume::{LabelKey, LabeledVolume, Rgba, SegmentationHierarchy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Eye {
    Left,
    Right,
    Mono,
}

impl Eye {
    /// Signed multiple of the interocular distance along camera-right.
    fn offset_sign(self) -> f64 {
        match self {
            Eye::Left => -0.5,
            Eye::Right => 0.5,
            Eye::Mono => 0.0,
        }
    }
}

/// A world-space ray with unit direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Point,
    pub direction: Point,
}

/// Pinhole camera. Distances in millimeters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: Point,
    pub forward: Point,
    pub up: Point,
    pub vertical_fov: f64,
    pub width: u32,
    pub height: u32,
    pub ipd: f64,
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        let f = self.forward.norm();
        let u = self.up.norm();
        if !(f > 0.0 && f.is_finite() && u > 0.0 && u.is_finite()) {
            return Err(Error::Geometry("camera forward/up must be non-zero".into()));
        }
        if self.forward.cross(&self.up).norm() <= 1e-9 * f * u {
            return Err(Error::Geometry("camera forward and up are parallel".into()));
        }
        if !(self.vertical_fov > 0.0 && self.vertical_fov < std::f64::consts::PI) {
            return Err(Error::Geometry(format!("fov {} outside (0, pi)", self.vertical_fov)));
        }
        if !(self.ipd >= 0.0 && self.ipd.is_finite()) {
            return Err(Error::Geometry(format!("ipd {} must be >= 0", self.ipd)));
        }
        if !self.position.iter().all(|c| c.is_finite()) {
            return Err(Error::Geometry("camera position is not finite".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Dimension(format!("image {}x{}", self.width, self.height)));
        }
        Ok(())
    }

    /// Orthonormal `(forward, right, up)`.
    pub fn basis(&self) -> (Point, Point, Point) {
        let f = self.forward.normalize();
        let r = f.cross(&self.up).normalize();
        (f, r, r.cross(&f))
    }

    /// Focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        0.5 * self.height as f64 / (0.5 * self.vertical_fov).tan()
    }

    pub fn eye_position(&self, eye: Eye) -> Point {
        let (_, r, _) = self.basis();
        self.position + r * (eye.offset_sign() * self.ipd)
    }

    /// Ray through the continuous image position `(x, y)`; pixel `(i, j)` has
    /// its center at `(i + 0.5, j + 0.5)`, y pointing down.
    pub fn ray_through(&self, eye: Eye, x: f64, y: f64) -> Ray {
        let (f, r, u) = self.basis();
        let focal = self.focal_px();
        let dx = (x - 0.5 * self.width as f64) / focal;
        let dy = (0.5 * self.height as f64 - y) / focal;
        Ray {
            origin: self.eye_position(eye),
            direction: (f + r * dx + u * dy).normalize(),
        }
    }

    /// Image position of a world point seen from `eye`, if in front of it.
    pub fn project(&self, eye: Eye, p: &Point) -> Option<(f64, f64)> {
        let (f, r, u) = self.basis();
        let d = p - self.eye_position(eye);
        let depth = d.dot(&f);
        if depth <= 0.0 {
            return None;
        }
        let focal = self.focal_px();
        Some((
            0.5 * self.width as f64 + focal * d.dot(&r) / depth,
            0.5 * self.height as f64 - focal * d.dot(&u) / depth,
        ))
    }
}

/// Clipping plane. When enabled, the half-space on the camera's side is removed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipPlane {
    pub point: Point,
    pub normal: Point,
    pub enabled: bool,
}

impl ClipPlane {
    pub fn disabled() -> Self {
        ClipPlane {
            point: Point::zeros(),
            normal: Point::z(),
            enabled: false,
        }
    }

    /// Enabled plane with a normalized normal.
    pub fn new(point: Point, normal: Point) -> Result<Self> {
        let n = normal.norm();
        if !(n > 0.0 && n.is_finite()) || !point.iter().all(|c| c.is_finite()) {
            return Err(Error::Geometry(format!("invalid clip plane {point:?} / {normal:?}")));
        }
        Ok(ClipPlane {
            point,
            normal: normal / n,
            enabled: true,
        })
    }

    /// The plane with its normal turned toward `camera`.
    pub fn oriented(&self, camera: &Point) -> OrientedClip {
        if !self.enabled {
            return OrientedClip(None);
        }
        let side = (camera - self.point).dot(&self.normal);
        let normal = if side < 0.0 { -self.normal } else { self.normal };
        OrientedClip(Some((self.point, normal)))
    }
}

/// A clip plane whose normal points into the removed half-space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientedClip(Option<(Point, Point)>);

impl OrientedClip {
    pub const NONE: OrientedClip = OrientedClip(None);

    #[inline]
    pub fn removes(&self, p: &Point) -> bool {
        match self.0 {
            Some((point, normal)) => (p - point).dot(&normal) > 0.0,
            None => false,
        }
    }

    pub fn normal(&self) -> Option<Point> {
        self.0.map(|(_, n)| n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderSettings {
    /// Sample spacing in model millimeters.
    pub step_size: f64,
    /// Samples beyond index `max_steps` along a ray are never taken.
    pub max_steps: usize,
    pub early_termination_alpha: f64,
    pub background: Rgba,
}

impl RenderSettings {
    /// Half the smallest voxel spacing.
    pub fn for_volume(volume: &LabeledVolume) -> Self {
        let s = volume.spacing();
        RenderSettings {
            step_size: 0.5 * s[0].min(s[1]).min(s[2]),
            max_steps: 8192,
            early_termination_alpha: 0.98,
            background: Rgba([0, 0, 0, 255]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) || self.max_steps == 0 {
            return Err(Error::OutOfRange("step size and max steps must be > 0".into()));
        }
        if !(self.early_termination_alpha > 0.0 && self.early_termination_alpha <= 1.0) {
            return Err(Error::OutOfRange(format!(
                "early termination alpha {} outside (0, 1]",
                self.early_termination_alpha
            )));
        }
        Ok(())
    }
}

/// Organs currently rendered.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionSet(BTreeSet<LabelKey>);

impl SelectionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, key: LabelKey) -> bool {
        self.0.contains(&key)
    }

    pub fn insert(&mut self, key: LabelKey) -> bool {
        self.0.insert(key)
    }

    pub fn remove(&mut self, key: LabelKey) -> bool {
        self.0.remove(&key)
    }

    pub fn toggle(&mut self, key: LabelKey) {
        if !self.0.remove(&key) {
            self.0.insert(key);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = LabelKey> + '_ {
        self.0.iter().copied()
    }
}

impl FromIterator<LabelKey> for SelectionSet {
    fn from_iter<I: IntoIterator<Item = LabelKey>>(iter: I) -> Self {
        SelectionSet(iter.into_iter().collect())
    }
}

/// Places the volume in the world: `world = translation + scale * rotation * model`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelTransform {
    pub rotation: UnitQuaternion<f64>,
    pub scale: f64,
    pub translation: Vector3<f64>,
}

impl Default for ModelTransform {
    fn default() -> Self {
        ModelTransform {
            rotation: UnitQuaternion::identity(),
            scale: 1.0,
            translation: Vector3::zeros(),
        }
    }
}

impl ModelTransform {
    pub fn to_world(&self, p: &Point) -> Point {
        self.translation + self.rotation * p * self.scale
    }

    pub fn to_model(&self, p: &Point) -> Point {
        self.rotation.inverse() * (p - self.translation) / self.scale
    }

    /// Direction mapped so that one unit of world ray parameter stays one unit
    /// of model ray parameter.
    pub fn direction_to_model(&self, d: &Point) -> Point {
        self.rotation.inverse() * d / self.scale
    }

    /// World-space axis-aligned box around a transformed model box.
    pub fn world_box(&self, lo: &Point, hi: &Point) -> (Point, Point) {
        let mut wlo = Point::repeat(f64::INFINITY);
        let mut whi = Point::repeat(f64::NEG_INFINITY);
        for c in 0..8 {
            let corner = Point::new(
                if c & 1 == 0 { lo.x } else { hi.x },
                if c & 2 == 0 { lo.y } else { hi.y },
                if c & 4 == 0 { lo.z } else { hi.z },
            );
            let w = self.to_world(&corner);
            wlo = wlo.inf(&w);
            whi = whi.sup(&w);
        }
        (wlo, whi)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Explore,
    Bioscope,
}

/// Everything a frame depends on. Control messages transform it; the renderer reads it.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneState {
    pub camera: Camera,
    pub selection: SelectionSet,
    pub clip: ClipPlane,
    /// Gaze point in full-resolution pixels.
    pub gaze: [f64; 2],
    pub mode: Mode,
    pub bioscope_target: Option<LabelKey>,
    pub model_transform: ModelTransform,
    pub settings: RenderSettings,
    /// Foveation reduction factor per axis.
    pub reduction: u32,
    /// Scene to return to when leaving bioscope mode.
    pub restore: Option<Box<SceneState>>,
}

impl SceneState {
    /// Frontal view of the whole volume with every known organ selected.
    pub fn initial(volume: &LabeledVolume, hierarchy: &SegmentationHierarchy, width: u32, height: u32) -> Self {
        let (lo, hi) = volume.bounds_mm();
        let center = (lo + hi) * 0.5;
        let diag = (hi - lo).norm();
        let camera = Camera {
            position: center - Point::y() * (1.6 * diag),
            forward: Point::y(),
            up: Point::z(),
            vertical_fov: 40f64.to_radians(),
            width,
            height,
            ipd: 32.0,
        };
        SceneState {
            gaze: [0.5 * width as f64, 0.5 * height as f64],
            camera,
            selection: hierarchy.keys().collect(),
            clip: ClipPlane::disabled(),
            mode: Mode::Explore,
            bioscope_target: None,
            model_transform: ModelTransform::default(),
            settings: RenderSettings::for_volume(volume),
            reduction: 3,
            restore: None,
        }
    }
}
