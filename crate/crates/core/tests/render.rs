use std::sync::atomic::{AtomicU64, Ordering};

use anatoview_core::mesh::Point;
use anatoview_core::render::*;
use anatoview_core::volume::{generate_phantom, LabelKey, OrganShape, PhantomSpec, Shape};
use anatoview_core::Error;

fn context(preset: &str) -> RenderContext {
    let spec = PhantomSpec::preset(preset).unwrap();
    RenderContext::new(generate_phantom(&spec).unwrap(), spec.hierarchy().unwrap())
}

fn looking_at(ctx: &RenderContext, target: Point, distance: f64, size: u32) -> SceneState {
    let mut scene = SceneState::initial(ctx.volume(), ctx.hierarchy(), size, size);
    scene.camera.position = target - Point::y() * distance;
    scene.camera.forward = Point::y();
    scene.camera.up = Point::z();
    scene
}

fn foreground(img: &RgbaImage, bg: [u8; 4]) -> Vec<(f64, f64)> {
    img.pixels()
        .filter(|(_, _, px)| *px != bg)
        .map(|(x, y, _)| (x as f64 + 0.5, y as f64 + 0.5))
        .collect()
}

fn centroid(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    (sx / n, sy / n)
}

fn background(scene: &SceneState) -> [u8; 4] {
    scene.settings.background.0
}

#[test]
fn empty_selection_is_uniform_background() {
    let ctx = context("three-organs");
    let mut scene = SceneState::initial(ctx.volume(), ctx.hierarchy(), 48, 32);
    scene.selection = SelectionSet::new();
    let img = render_frame(&ctx, &scene, Eye::Mono).unwrap();
    assert_eq!(img, RgbaImage::filled(48, 32, background(&scene)));
}

#[test]
fn zero_area_image_rejected() {
    let ctx = context("sphere");
    let mut scene = SceneState::initial(ctx.volume(), ctx.hierarchy(), 16, 16);
    scene.camera.width = 0;
    assert!(matches!(
        render_frame(&ctx, &scene, Eye::Mono),
        Err(Error::Dimension(_))
    ));
}

#[test]
fn sphere_blob_is_centered() {
    let ctx = context("sphere");
    let center = Point::repeat(31.5);
    let scene = looking_at(&ctx, center, 90.0, 96);
    let img = render_frame(&ctx, &scene, Eye::Mono).unwrap();
    let fg = foreground(&img, background(&scene));
    assert!(fg.len() > 100);
    let (cx, cy) = centroid(&fg);
    assert!((cx - 48.0).abs() <= 2.0 && (cy - 48.0).abs() <= 2.0, "{cx} {cy}");
}

#[test]
fn stereo_disparity_matches_pinhole() {
    let ctx = context("sphere");
    let center = Point::repeat(31.5);
    let depth = 90.0;
    let mut scene = looking_at(&ctx, center, depth, 128);
    scene.camera.ipd = 12.0;
    let bg = background(&scene);
    let left = render_frame(&ctx, &scene, Eye::Left).unwrap();
    let right = render_frame(&ctx, &scene, Eye::Right).unwrap();
    let (xl, yl) = centroid(&foreground(&left, bg));
    let (xr, yr) = centroid(&foreground(&right, bg));
    let expected = scene.camera.focal_px() * scene.camera.ipd / depth;
    assert!(((xl - xr) - expected).abs() <= 1.0, "{} vs {expected}", xl - xr);
    assert!((yl - yr).abs() < 1e-9);
}

#[test]
fn stereo_symmetry() {
    let ctx = context("three-organs");
    let mut scene = SceneState::initial(ctx.volume(), ctx.hierarchy(), 40, 30);
    scene.camera.ipd = 9.0;
    let left = render_frame(&ctx, &scene, Eye::Left).unwrap();
    let right = render_frame(&ctx, &scene, Eye::Right).unwrap();
    scene.camera.ipd = -9.0;
    assert_eq!(render_frame(&ctx, &scene, Eye::Right).unwrap(), left);
    assert_eq!(render_frame(&ctx, &scene, Eye::Left).unwrap(), right);
}

#[test]
fn renders_are_deterministic() {
    let ctx = context("three-organs");
    let scene = SceneState::initial(ctx.volume(), ctx.hierarchy(), 64, 48);
    let a = render_frame(&ctx, &scene, Eye::Left).unwrap();
    let b = render_frame(&ctx, &scene, Eye::Left).unwrap();
    assert_eq!(a, b);
}

fn soundness_scenes(ctx: &RenderContext) -> Vec<SceneState> {
    let base = SceneState::initial(ctx.volume(), ctx.hierarchy(), 64, 64);
    let mut scenes = vec![base.clone()];

    let mut oblique = base.clone();
    oblique.camera.position = Point::new(-40.0, -50.0, 90.0);
    oblique.camera.forward = Point::new(31.5, 31.5, 31.5) - oblique.camera.position;
    oblique.selection = [LabelKey::new(1, 2), LabelKey::new(6, 3)].into_iter().collect();
    scenes.push(oblique);

    let mut clipped = base.clone();
    clipped.clip = ClipPlane::new(Point::new(30.0, 32.0, 30.0), Point::new(0.3, -1.0, 0.2)).unwrap();
    scenes.push(clipped);

    let mut inside = base.clone();
    inside.camera.position = Point::new(22.0, 32.0, 30.0);
    inside.camera.forward = Point::new(1.0, 0.2, 0.1);
    scenes.push(inside);

    let mut scaled = base.clone();
    scaled.model_transform.scale = 1.7;
    scaled.model_transform.rotation = nalgebra::UnitQuaternion::from_euler_angles(0.2, 0.1, -0.4);
    scaled.model_transform.translation = Point::new(-20.0, 5.0, -10.0);
    scaled.camera.position = Point::new(30.0, -120.0, 40.0);
    scenes.push(scaled);
    scenes
}

#[test]
fn interval_render_matches_naive_march() {
    let ctx = context("three-organs");
    for (n, scene) in soundness_scenes(&ctx).iter().enumerate() {
        for y in 0..64 {
            for x in 0..64 {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let fast = trace_pixel(&ctx, scene, Eye::Mono, px, py, MarchMode::Intervals);
                let slow = trace_pixel(&ctx, scene, Eye::Mono, px, py, MarchMode::Naive);
                for c in 0..4 {
                    assert!((fast[c] - slow[c]).abs() <= 1e-5, "scene {n} pixel {x},{y}: {fast:?} vs {slow:?}");
                }
            }
        }
        let naive = render_frame_with(&ctx, scene, Eye::Mono, RenderOptions { mode: MarchMode::Naive, observer: None })
            .unwrap()
            .0;
        assert_eq!(render_frame(&ctx, scene, Eye::Mono).unwrap(), naive, "scene {n}");
    }
}

#[test]
fn interval_march_takes_far_fewer_samples() {
    let ctx = context("three-organs");
    let selected: usize = ctx.volume().organ_histogram().values().sum();
    assert!((selected as f64) <= 0.10 * ctx.volume().len() as f64);
    let scene = SceneState::initial(ctx.volume(), ctx.hierarchy(), 64, 64);
    let run = |mode| render_frame_with(&ctx, &scene, Eye::Mono, RenderOptions { mode, observer: None }).unwrap().1;
    let fast = run(MarchMode::Intervals);
    let slow = run(MarchMode::Naive);
    assert_eq!(fast.rays, slow.rays);
    assert!(fast.samples * 4 <= slow.samples, "{} vs {}", fast.samples, slow.samples);
}

#[test]
fn clipped_side_never_rendered() {
    let ctx = context("three-organs");
    let mut scene = SceneState::initial(ctx.volume(), ctx.hierarchy(), 96, 96);
    scene.clip = ClipPlane::new(Point::new(31.0, 30.0, 33.0), Point::new(0.2, 1.0, -0.4)).unwrap();
    let camera = scene.camera.position;
    let plane = scene.clip.clone();
    let toward_camera = if (camera - plane.point).dot(&plane.normal) >= 0.0 {
        plane.normal
    } else {
        -plane.normal
    };
    let seen = AtomicU64::new(0);
    let bad = AtomicU64::new(0);
    let check = |p: &Point| {
        seen.fetch_add(1, Ordering::Relaxed);
        if (p - plane.point).dot(&toward_camera) > 0.0 {
            bad.fetch_add(1, Ordering::Relaxed);
        }
    };
    let opts = RenderOptions {
        mode: MarchMode::Intervals,
        observer: Some(&check),
    };
    render_frame_with(&ctx, &scene, Eye::Mono, opts).unwrap();
    assert!(seen.load(Ordering::Relaxed) > 1000, "{}", seen.load(Ordering::Relaxed));
    assert_eq!(bad.load(Ordering::Relaxed), 0);
}

#[test]
fn clip_through_sphere_center_halves_coverage() {
    let ctx = context("sphere");
    let center = Point::repeat(31.5);
    let mut scene = looking_at(&ctx, center, 90.0, 96);
    let bg = background(&scene);
    let full = foreground(&render_frame(&ctx, &scene, Eye::Mono).unwrap(), bg).len() as f64;
    // Vertical plane through the center, facing sideways: removes one half of the disk.
    scene.clip = ClipPlane::new(center, Point::new(1.0, -0.2, 0.0)).unwrap();
    let half = foreground(&render_frame(&ctx, &scene, Eye::Mono).unwrap(), bg).len() as f64;
    assert!((half / full - 0.5).abs() <= 0.15 * 0.5 + 0.05, "{half} / {full}");
}

fn two_sphere_context() -> RenderContext {
    let ball = |l2, name: &str, y| OrganShape {
        l1: 1,
        l2,
        name: name.into(),
        color: None,
        shape: Shape::Ellipsoid {
            center: [32.0, y, 32.0],
            radii: [8.0; 3],
        },
    };
    let spec = PhantomSpec {
        dims: [64, 64, 64],
        spacing: [1.0; 3],
        seed: 1,
        organs: vec![ball(1, "near", 20.0), ball(2, "far", 45.0)],
    };
    RenderContext::new(generate_phantom(&spec).unwrap(), spec.hierarchy().unwrap())
}

#[test]
fn picking() {
    let ctx = two_sphere_context();
    let mut scene = looking_at(&ctx, Point::new(32.0, 32.0, 32.0), 92.0, 64);
    let ray = |z: f64| Ray {
        origin: Point::new(32.0, -60.0, z),
        direction: Point::y(),
    };
    let near = LabelKey::new(1, 1);
    let far = LabelKey::new(1, 2);
    assert_eq!(pick_organ(&ctx, &scene, &ray(32.0)).map(|p| p.0), Some(near));
    assert_eq!(pick_organ(&ctx, &scene, &ray(32.0)).unwrap().1, "near");
    assert_eq!(
        pick_organ(&ctx, &scene, &Ray { origin: Point::new(0.0, -60.0, 0.0), direction: Point::z() }),
        None
    );
    assert_eq!(pick_pixel(&ctx, &scene, 32.0, 32.0).map(|p| p.0), Some(near));

    // Unselected organs are transparent to picking.
    scene.selection = [far].into_iter().collect();
    assert_eq!(pick_organ(&ctx, &scene, &ray(32.0)).map(|p| p.0), Some(far));
    scene.selection = [near, far].into_iter().collect();

    // Near half of the near sphere removed: the far half still answers.
    scene.clip = ClipPlane::new(Point::new(32.0, 20.0, 32.0), Point::y()).unwrap();
    assert_eq!(pick_organ(&ctx, &scene, &ray(32.0)).map(|p| p.0), Some(near));

    // Tilted plane removing everything of the near sphere below its center line:
    // the ray's whole passage through it is clipped, so the far sphere answers.
    scene.clip = ClipPlane::new(Point::new(32.0, 20.0, 32.0), Point::new(0.0, 1.0, 1.0)).unwrap();
    assert_eq!(pick_organ(&ctx, &scene, &ray(26.0)).map(|p| p.0), Some(far));
}

#[test]
fn bioscope_round_trip_and_errors() {
    let ctx = context("three-organs");
    let scene = SceneState::initial(ctx.volume(), ctx.hierarchy(), 32, 32);
    let liver = LabelKey::new(3, 5);
    let BioscopeOutcome::Entered(inside) = bioscope_transform(&ctx, &scene, liver).unwrap() else {
        panic!("liver has voxels");
    };
    assert_eq!(inside.mode, Mode::Bioscope);
    assert_eq!(inside.bioscope_target, Some(liver));
    assert_eq!(inside.selection.iter().collect::<Vec<_>>(), [liver]);
    assert_eq!(inside.model_transform.scale, 2.0);
    assert_eq!(exit_bioscope(&inside), scene);

    // Target lands on the camera axis at 1.5 scaled diagonals.
    let (lo, hi) = ctx.organ_bounds(liver).unwrap();
    let c = inside.model_transform.to_world(&((lo + hi) * 0.5));
    let d = c - inside.camera.position;
    let expected = 1.5 * 2.0 * (hi - lo).norm();
    assert!((d.norm() - expected).abs() < 1e-9);
    assert!(d.normalize().dot(&inside.camera.forward.normalize()) > 1.0 - 1e-12);

    let mut unselected = scene.clone();
    unselected.selection.remove(liver);
    assert!(matches!(
        bioscope_transform(&ctx, &unselected, liver),
        Err(Error::Precondition(_))
    ));

    let mut with_missing = scene.clone();
    with_missing.selection.insert(LabelKey::new(9, 9));
    assert_eq!(
        bioscope_transform(&ctx, &with_missing, LabelKey::new(9, 9)).unwrap(),
        BioscopeOutcome::EmptyTarget
    );
}

#[test]
fn bioscope_quadruples_projected_area() {
    let ctx = context("sphere");
    let key = LabelKey::new(1, 1);
    let (lo, hi) = ctx.organ_bounds(key).unwrap();
    let center = (lo + hi) * 0.5;
    let distance = 1.5 * 2.0 * (hi - lo).norm();
    let before_scene = looking_at(&ctx, center, distance, 128);
    let bg = background(&before_scene);
    let before = foreground(&render_frame(&ctx, &before_scene, Eye::Mono).unwrap(), bg).len() as f64;
    let BioscopeOutcome::Entered(after_scene) = bioscope_transform(&ctx, &before_scene, key).unwrap() else {
        panic!("sphere has voxels");
    };
    let after = foreground(&render_frame(&ctx, &after_scene, Eye::Mono).unwrap(), bg).len() as f64;
    let ratio = after / before;
    assert!((ratio - 4.0).abs() <= 0.8, "ratio {ratio}");
}
