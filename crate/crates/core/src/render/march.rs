use rayon::prelude::*;

use super::intervals::{ray_intervals_for_selection, Interval};
use super::scene::{Eye, OrientedClip, Ray, RenderSettings, SceneState, SelectionSet};
use super::{RenderContext, RgbaImage};
use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::volume::{LabelKey, LabeledVolume, SegmentationHierarchy, VoxelCode};

/// How a ray chooses where to sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MarchMode {
    /// Only inside selected organs' proxy intervals.
    Intervals,
    /// Every lattice sample inside the volume box.
    Naive,
}

/// Callback receiving the world position of every composited sample.
pub type SampleObserver<'a> = &'a (dyn Fn(&Point) + Sync);

#[derive(Clone, Copy)]
pub struct RenderOptions<'a> {
    pub mode: MarchMode,
    pub observer: Option<SampleObserver<'a>>,
}

impl Default for RenderOptions<'_> {
    fn default() -> Self {
        RenderOptions {
            mode: MarchMode::Intervals,
            observer: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RenderStats {
    pub rays: u64,
    /// Lattice samples visited, clipped or not.
    pub samples: u64,
}

impl std::ops::Add for RenderStats {
    type Output = RenderStats;
    fn add(self, o: RenderStats) -> RenderStats {
        RenderStats {
            rays: self.rays + o.rays,
            samples: self.samples + o.samples,
        }
    }
}

/// Per-organ color and opacity for the selected organs; everything else is transparent.
#[derive(Clone, Debug)]
pub struct TransferFunction {
    /// Indexed by the code's (L1, L2) bits; straight RGB and alpha in [0, 1].
    table: Vec<Option<[f64; 4]>>,
}

impl TransferFunction {
    pub fn new(hierarchy: &SegmentationHierarchy, selection: &SelectionSet) -> Self {
        let mut table = vec![None; 256];
        for key in selection.iter() {
            if let Some(entry) = hierarchy.get(key) {
                table[Self::slot(key)] = Some(entry.color.0.map(|c| c as f64 / 255.0));
            }
        }
        TransferFunction { table }
    }

    fn slot(key: LabelKey) -> usize {
        ((key.l1 as usize) << 4) | key.l2 as usize
    }

    /// Straight color and opacity of one sample, or `None` when transparent.
    #[inline]
    pub fn sample(&self, code: VoxelCode, intensity: u8) -> Option<([f64; 3], f64)> {
        if code.is_background() {
            return None;
        }
        let [r, g, b, a] = self.table[(code.raw() >> 7) as usize]?;
        let alpha = a * intensity as f64 / 255.0;
        (alpha > 0.0).then_some(([r, g, b], alpha))
    }
}

/// A primary ray in world and model space with its sample spacing.
///
/// Sample `k` sits at ray parameter `k * dt` in both spaces.
#[derive(Clone, Copy, Debug)]
pub struct MarchRay {
    pub world: Ray,
    pub model: Ray,
    pub dt: f64,
}

impl MarchRay {
    pub fn new(scene: &SceneState, world: Ray) -> Self {
        let t = &scene.model_transform;
        MarchRay {
            world,
            model: Ray {
                origin: t.to_model(&world.origin),
                direction: t.direction_to_model(&world.direction),
            },
            dt: scene.settings.step_size * t.scale,
        }
    }

    #[inline]
    fn world_at(&self, k: i64) -> Point {
        self.world.origin + self.world.direction * (k as f64 * self.dt)
    }

    #[inline]
    fn model_at(&self, k: i64) -> Point {
        self.model.origin + self.model.direction * (k as f64 * self.dt)
    }

    fn t_far(&self, settings: &RenderSettings) -> f64 {
        (settings.max_steps as f64 + 1.0) * self.dt
    }
}

/// Counts samples and reports composited positions.
pub struct Probe<'a> {
    pub samples: u64,
    observer: Option<SampleObserver<'a>>,
}

impl<'a> Probe<'a> {
    pub fn new(observer: Option<SampleObserver<'a>>) -> Self {
        Probe { samples: 0, observer }
    }
}

/// Lattice index ranges covered by the intervals, merged and capped.
fn index_ranges(intervals: &[Interval], dt: f64, max_steps: usize) -> Vec<(i64, i64)> {
    let mut ranges: Vec<(i64, i64)> = Vec::with_capacity(intervals.len());
    for iv in intervals {
        let k0 = (iv.t_enter / dt).ceil().max(0.0) as i64;
        let k1 = (iv.t_exit / dt).floor().min(max_steps as f64) as i64;
        if k1 < k0 {
            continue;
        }
        match ranges.last_mut() {
            Some(last) if k0 <= last.1 + 1 => last.1 = last.1.max(k1),
            _ => ranges.push((k0, k1)),
        }
    }
    ranges
}

/// Front-to-back compositing of the lattice samples inside `intervals`.
///
/// Each sample takes the label and intensity of its nearest voxel; samples on
/// the removed side of `clip` are skipped; marching stops once opacity reaches
/// the early-termination threshold. Returns straight RGBA in [0, 1] over the
/// background.
pub fn composite_ray(
    volume: &LabeledVolume,
    ray: &MarchRay,
    intervals: &[Interval],
    clip: &OrientedClip,
    settings: &RenderSettings,
    transfer: &TransferFunction,
    probe: &mut Probe<'_>,
) -> [f64; 4] {
    let mut color = [0.0f64; 3];
    let mut alpha = 0.0f64;
    'outer: for (k0, k1) in index_ranges(intervals, ray.dt, settings.max_steps) {
        for k in k0..=k1 {
            probe.samples += 1;
            let pw = ray.world_at(k);
            if clip.removes(&pw) {
                continue;
            }
            let (code, intensity) = volume.sample_nearest(&ray.model_at(k));
            let Some((rgb, a)) = transfer.sample(code, intensity) else {
                continue;
            };
            if let Some(observe) = probe.observer {
                observe(&pw);
            }
            let w = (1.0 - alpha) * a;
            for c in 0..3 {
                color[c] += w * rgb[c];
            }
            alpha += w;
            if alpha >= settings.early_termination_alpha {
                break 'outer;
            }
        }
    }
    let bg = settings.background.0.map(|c| c as f64 / 255.0);
    let rest = 1.0 - alpha;
    [
        color[0] + rest * bg[0],
        color[1] + rest * bg[1],
        color[2] + rest * bg[2],
        alpha + rest * bg[3],
    ]
}

/// Parameter range of a model-space ray inside the volume's cell box.
fn volume_span(volume: &LabeledVolume, ray: &Ray) -> Option<(f64, f64)> {
    let (lo, hi) = volume.bounds_mm();
    let mut t0 = 0.0f64;
    let mut t1 = f64::INFINITY;
    for a in 0..3 {
        let d = ray.direction[a];
        let o = ray.origin[a];
        if d == 0.0 {
            if o < lo[a] || o > hi[a] {
                return None;
            }
            continue;
        }
        let (mut near, mut far) = ((lo[a] - o) / d, (hi[a] - o) / d);
        if near > far {
            std::mem::swap(&mut near, &mut far);
        }
        t0 = t0.max(near);
        t1 = t1.min(far);
    }
    (t0 <= t1).then_some((t0, t1))
}

/// Frame-invariant pieces shared by every ray of one render.
struct Prepared<'a> {
    ctx: &'a RenderContext,
    scene: &'a SceneState,
    transfer: TransferFunction,
    clip: OrientedClip,
}

impl<'a> Prepared<'a> {
    fn new(ctx: &'a RenderContext, scene: &'a SceneState) -> Self {
        Prepared {
            ctx,
            scene,
            transfer: TransferFunction::new(ctx.hierarchy(), &scene.selection),
            clip: scene.clip.oriented(&scene.camera.position),
        }
    }

    fn intervals(&self, ray: &MarchRay, mode: MarchMode) -> Vec<Interval> {
        match mode {
            MarchMode::Intervals => ray_intervals_for_selection(
                self.ctx.proxies(),
                &self.scene.selection,
                &ray.model,
                ray.t_far(&self.scene.settings),
            ),
            MarchMode::Naive => {
                if self.scene.selection.is_empty() {
                    return Vec::new();
                }
                volume_span(self.ctx.volume(), &ray.model)
                    .map(|(t0, t1)| Interval {
                        t_enter: t0,
                        t_exit: t1,
                        label: LabelKey::new(0, 0),
                    })
                    .into_iter()
                    .collect()
            }
        }
    }

    fn trace(&self, world: Ray, mode: MarchMode, probe: &mut Probe<'_>) -> [f64; 4] {
        let ray = MarchRay::new(self.scene, world);
        let intervals = self.intervals(&ray, mode);
        composite_ray(
            self.ctx.volume(),
            &ray,
            &intervals,
            &self.clip,
            &self.scene.settings,
            &self.transfer,
            probe,
        )
    }
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Float RGBA of the primary ray through image position `(x, y)`.
pub fn trace_pixel(
    ctx: &RenderContext,
    scene: &SceneState,
    eye: Eye,
    x: f64,
    y: f64,
    mode: MarchMode,
) -> [f64; 4] {
    let prepared = Prepared::new(ctx, scene);
    prepared.trace(scene.camera.ray_through(eye, x, y), mode, &mut Probe::new(None))
}

/// Renders a `width x height` image whose pixel `(i, j)` is traced through the
/// full-frame position `position(i, j)`.
pub fn render_mapped<F>(
    ctx: &RenderContext,
    scene: &SceneState,
    eye: Eye,
    width: u32,
    height: u32,
    position: F,
    options: RenderOptions<'_>,
) -> Result<(RgbaImage, RenderStats)>
where
    F: Fn(u32, u32) -> (f64, f64) + Sync,
{
    scene.settings.validate()?;
    if width == 0 || height == 0 || scene.camera.width == 0 || scene.camera.height == 0 {
        return Err(Error::Dimension(format!("zero-area image {width}x{height}")));
    }
    let prepared = Prepared::new(ctx, scene);
    let row_bytes = 4 * width as usize;
    let mut data = vec![0u8; row_bytes * height as usize];
    let stats = data
        .par_chunks_mut(row_bytes)
        .enumerate()
        .map(|(j, row)| {
            let mut probe = Probe::new(options.observer);
            for i in 0..width {
                let (x, y) = position(i, j as u32);
                let rgba = prepared.trace(scene.camera.ray_through(eye, x, y), options.mode, &mut probe);
                let px = &mut row[4 * i as usize..4 * i as usize + 4];
                for c in 0..4 {
                    px[c] = to_u8(rgba[c]);
                }
            }
            RenderStats {
                rays: width as u64,
                samples: probe.samples,
            }
        })
        .reduce(RenderStats::default, |a, b| a + b);
    Ok((RgbaImage::from_raw(width, height, data)?, stats))
}

pub fn render_frame_with(
    ctx: &RenderContext,
    scene: &SceneState,
    eye: Eye,
    options: RenderOptions<'_>,
) -> Result<(RgbaImage, RenderStats)> {
    let (w, h) = (scene.camera.width, scene.camera.height);
    render_mapped(ctx, scene, eye, w, h, |i, j| (i as f64 + 0.5, j as f64 + 0.5), options)
}

/// Full-resolution image for one eye.
pub fn render_frame(ctx: &RenderContext, scene: &SceneState, eye: Eye) -> Result<RgbaImage> {
    Ok(render_frame_with(ctx, scene, eye, RenderOptions::default())?.0)
}

/// The organ seen first along `ray`, honoring selection and clipping.
///
/// Intervals are visited in order; the first one containing an unclipped
/// sample whose voxel belongs to a selected organ decides the answer.
pub fn pick_organ(ctx: &RenderContext, scene: &SceneState, ray: &Ray) -> Option<(LabelKey, String)> {
    let prepared = Prepared::new(ctx, scene);
    let world = Ray {
        origin: ray.origin,
        direction: ray.direction.try_normalize(0.0)?,
    };
    let march = MarchRay::new(scene, world);
    for iv in prepared.intervals(&march, MarchMode::Intervals) {
        for (k0, k1) in index_ranges(&[iv], march.dt, scene.settings.max_steps) {
            for k in k0..=k1 {
                if prepared.clip.removes(&march.world_at(k)) {
                    continue;
                }
                let (code, _) = ctx.volume().sample_nearest(&march.model_at(k));
                if let Some(key) = code.organ().filter(|k| scene.selection.contains(*k)) {
                    let name = ctx
                        .hierarchy()
                        .get(key)
                        .map_or_else(|| key.to_string(), |e| e.name.clone());
                    return Some((key, name));
                }
            }
        }
    }
    None
}

/// [`pick_organ`] through a pixel of the mono view.
pub fn pick_pixel(ctx: &RenderContext, scene: &SceneState, x: f64, y: f64) -> Option<(LabelKey, String)> {
    pick_organ(ctx, scene, &scene.camera.ray_through(Eye::Mono, x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::scene::ClipPlane;
    use crate::volume::{HierarchyEntry, Rgba};

    fn uniform_volume(alpha: u8, intensity: u8) -> (LabeledVolume, SegmentationHierarchy) {
        let key = LabelKey::new(2, 2);
        let mut vol = LabeledVolume::empty([8, 8, 8], [1.0; 3]).unwrap();
        let (ints, labels) = vol.parts_mut();
        ints.fill(intensity);
        labels.fill(key.code().unwrap());
        let h = SegmentationHierarchy::new(vec![HierarchyEntry {
            key,
            name: "block".into(),
            color: Rgba([255, 128, 0, alpha]),
        }])
        .unwrap();
        (vol, h)
    }

    fn straight_ray(dt: f64) -> MarchRay {
        let r = Ray {
            origin: Point::new(3.0, -10.0, 3.0),
            direction: Point::y(),
        };
        MarchRay {
            world: r,
            model: r,
            dt,
        }
    }

    fn settings(early: f64) -> RenderSettings {
        RenderSettings {
            step_size: 1.0,
            max_steps: 1000,
            early_termination_alpha: early,
            background: Rgba([0, 0, 0, 0]),
        }
    }

    #[test]
    fn empty_intervals_give_background() {
        let (vol, h) = uniform_volume(255, 255);
        let sel: SelectionSet = h.keys().collect();
        let mut s = settings(0.98);
        s.background = Rgba([10, 20, 30, 255]);
        let out = composite_ray(
            &vol,
            &straight_ray(1.0),
            &[],
            &OrientedClip::NONE,
            &s,
            &TransferFunction::new(&h, &sel),
            &mut Probe::new(None),
        );
        assert_eq!(out, [10.0 / 255.0, 20.0 / 255.0, 30.0 / 255.0, 1.0]);
    }

    #[test]
    fn homogeneous_closed_form() {
        let (vol, h) = uniform_volume(51, 255);
        let alpha: f64 = 51.0 / 255.0;
        let sel: SelectionSet = h.keys().collect();
        let tf = TransferFunction::new(&h, &sel);
        // Samples k = 10..=15 land on voxel rows y = 0..5.
        let iv = Interval {
            t_enter: 10.0,
            t_exit: 15.0,
            label: LabelKey::new(2, 2),
        };
        let mut probe = Probe::new(None);
        let out = composite_ray(&vol, &straight_ray(1.0), &[iv], &OrientedClip::NONE, &settings(1.0), &tf, &mut probe);
        assert_eq!(probe.samples, 6);
        let expected = 1.0 - (1.0 - alpha).powi(6);
        assert!((out[3] - expected).abs() < 1e-6);
        assert!((out[0] - expected).abs() < 1e-6);
        assert!((out[1] - expected * 128.0 / 255.0).abs() < 1e-6);
    }

    #[test]
    fn opaque_first_sample_terminates() {
        let (vol, h) = uniform_volume(255, 255);
        let sel: SelectionSet = h.keys().collect();
        let tf = TransferFunction::new(&h, &sel);
        let iv = Interval {
            t_enter: 10.0,
            t_exit: 17.0,
            label: LabelKey::new(2, 2),
        };
        let mut probe = Probe::new(None);
        let out = composite_ray(&vol, &straight_ray(1.0), &[iv], &OrientedClip::NONE, &settings(0.98), &tf, &mut probe);
        assert_eq!(probe.samples, 1);
        assert_eq!(out, [1.0, 128.0 / 255.0, 0.0, 1.0]);
    }

    #[test]
    fn unselected_and_clipped_samples_are_transparent() {
        let (vol, h) = uniform_volume(255, 255);
        let tf = TransferFunction::new(&h, &SelectionSet::new());
        let iv = Interval {
            t_enter: 10.0,
            t_exit: 17.0,
            label: LabelKey::new(2, 2),
        };
        let out = composite_ray(&vol, &straight_ray(1.0), &[iv], &OrientedClip::NONE, &settings(0.98), &tf, &mut Probe::new(None));
        assert_eq!(out, [0.0; 4]);

        let sel: SelectionSet = h.keys().collect();
        let tf = TransferFunction::new(&h, &sel);
        // Plane y = 4.5 with the camera at y = -10: rows 0..=4 are removed.
        let clip = ClipPlane::new(Point::new(0.0, 4.5, 0.0), Point::y())
            .unwrap()
            .oriented(&Point::new(3.0, -10.0, 3.0));
        let seen = std::sync::Mutex::new(Vec::new());
        let record = |p: &Point| seen.lock().unwrap().push(p.y);
        let mut probe = Probe::new(Some(&record));
        composite_ray(&vol, &straight_ray(1.0), &[iv], &clip, &settings(0.98), &tf, &mut probe);
        assert_eq!(*seen.lock().unwrap(), [5.0]);
    }

    #[test]
    fn ranges_merge() {
        let k = LabelKey::new(1, 1);
        let iv = |a, b| Interval {
            t_enter: a,
            t_exit: b,
            label: k,
        };
        assert_eq!(index_ranges(&[iv(0.2, 3.0), iv(2.5, 5.1), iv(9.0, 9.5)], 1.0, 100), [(1, 5), (9, 9)]);
        assert_eq!(index_ranges(&[iv(0.0, 2.0), iv(4.0, 5.0)], 1.0, 100), [(0, 2), (4, 5)]);
        assert_eq!(index_ranges(&[iv(0.0, 50.0)], 1.0, 10), [(0, 10)]);
    }
}
