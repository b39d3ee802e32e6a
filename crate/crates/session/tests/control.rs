use std::sync::Arc;

use anatoview_core::mesh::Point;
use anatoview_core::render::{Mode, RenderContext};
use anatoview_core::volume::{generate_phantom, HierarchyEntry, LabelKey, PhantomSpec, Rgba, SegmentationHierarchy};
use anatoview_session::*;

/// Three-organ phantom whose hierarchy also names an organ with no voxels.
fn context() -> RenderContext {
    let spec = PhantomSpec::preset("three-organs").unwrap();
    let mut entries = spec.hierarchy().unwrap().entries().to_vec();
    entries.push(HierarchyEntry {
        key: LabelKey::new(3, 7),
        name: "gallbladder".into(),
        color: Rgba([40, 160, 60, 200]),
    });
    RenderContext::new(
        generate_phantom(&spec).unwrap(),
        SegmentationHierarchy::new(entries).unwrap(),
    )
}

fn apply(ctx: &RenderContext, s: &SessionState, msg: ControlMessage) -> SessionState {
    apply_control(ctx, s, &msg).unwrap().state
}

fn code(ctx: &RenderContext, s: &SessionState, msg: ControlMessage) -> &'static str {
    apply_control(ctx, s, &msg).unwrap_err().code
}

#[test]
fn toggle_is_an_involution() {
    let ctx = context();
    let s0 = SessionState::initial(&ctx, 64, 48);
    let t = ControlMessage::ToggleOrgan { l1: 3, l2: 5 };
    let s1 = apply(&ctx, &s0, t.clone());
    assert!(!s1.scene.selection.contains(LabelKey::new(3, 5)));
    assert_eq!(apply(&ctx, &s1, t), s0);
    assert_eq!(code(&ctx, &s0, ControlMessage::ToggleOrgan { l1: 9, l2: 9 }), "unknown-organ");
}

#[test]
fn system_selection_is_idempotent() {
    let ctx = context();
    let mut s = SessionState::initial(&ctx, 64, 48);
    s.scene.selection = Default::default();
    let all = ControlMessage::SelectAllInSystem { l1: 3 };
    let once = apply(&ctx, &s, all.clone());
    assert_eq!(apply(&ctx, &once, all), once);
    for key in ctx.hierarchy().keys_in_system(3) {
        assert!(once.scene.selection.contains(key));
    }
    assert!(!once.scene.selection.contains(LabelKey::new(1, 2)));
    let none = ControlMessage::DeselectAllInSystem { l1: 3 };
    let cleared = apply(&ctx, &once, none.clone());
    assert_eq!(apply(&ctx, &cleared, none), cleared);
    assert!(cleared.scene.selection.is_empty());
    assert_eq!(code(&ctx, &s, ControlMessage::SelectAllInSystem { l1: 12 }), "unknown-organ");
}

#[test]
fn bioscope_round_trip_restores_state() {
    let ctx = context();
    let s0 = SessionState::initial(&ctx, 64, 48);
    let inside = apply(&ctx, &s0, ControlMessage::EnterBioscope { l1: 3, l2: 5 });
    assert_eq!(inside.scene.mode, Mode::Bioscope);
    assert_eq!(inside.scene.bioscope_target, Some(LabelKey::new(3, 5)));
    assert_eq!(inside.scene.model_transform.scale, 2.0);
    let toggled = apply(&ctx, &inside, ControlMessage::ToggleOrgan { l1: 1, l2: 2 });
    assert_eq!(apply(&ctx, &toggled, ControlMessage::ExitBioscope {}), s0);
    assert_eq!(apply(&ctx, &s0, ControlMessage::ExitBioscope {}), s0);
}

#[test]
fn bioscope_rejections() {
    let ctx = context();
    let s0 = SessionState::initial(&ctx, 64, 48);
    let off = apply(&ctx, &s0, ControlMessage::ToggleOrgan { l1: 6, l2: 3 });
    assert_eq!(code(&ctx, &off, ControlMessage::EnterBioscope { l1: 6, l2: 3 }), "target-not-selected");
    assert_eq!(code(&ctx, &s0, ControlMessage::EnterBioscope { l1: 3, l2: 7 }), "empty-target");
    assert_eq!(code(&ctx, &s0, ControlMessage::EnterBioscope { l1: 9, l2: 1 }), "unknown-organ");
}

#[test]
fn clip_normal_is_normalized() {
    let ctx = context();
    let s0 = SessionState::initial(&ctx, 64, 48);
    let msg = ControlMessage::SetClipPlane {
        point: [30.0, 30.0, 30.0],
        normal: [0.0, 3.0, 4.0],
        enabled: true,
    };
    let s = apply(&ctx, &s0, msg);
    assert!((s.scene.clip.normal - Point::new(0.0, 0.6, 0.8)).norm() < 1e-15);
    assert!(s.scene.clip.enabled);
    let zero = ControlMessage::SetClipPlane {
        point: [0.0; 3],
        normal: [0.0; 3],
        enabled: true,
    };
    assert_eq!(code(&ctx, &s0, zero), "bad-message");
}

#[test]
fn camera_gaze_and_reduction_validation() {
    let ctx = context();
    let s0 = SessionState::initial(&ctx, 64, 48);
    let mut cam = s0.scene.camera.clone();
    cam.up = cam.forward;
    assert_eq!(code(&ctx, &s0, ControlMessage::SetCamera { camera: cam }), "bad-message");
    let mut big = s0.scene.camera.clone();
    big.width = 5000;
    assert_eq!(code(&ctx, &s0, ControlMessage::SetCamera { camera: big }), "bad-message");
    let mut tiny = s0.scene.camera.clone();
    tiny.width = 6;
    assert_eq!(code(&ctx, &s0, ControlMessage::SetCamera { camera: tiny }), "bad-message");

    let g = apply(&ctx, &s0, ControlMessage::SetGaze { x: 1e6, y: -3.0 });
    assert_eq!(g.scene.gaze, [64.0, 0.0]);
    assert_eq!(code(&ctx, &s0, ControlMessage::SetGaze { x: f64::NAN, y: 0.0 }), "bad-message");

    assert_eq!(apply(&ctx, &s0, ControlMessage::SetReduction { k: 1 }).scene.reduction, 1);
    assert_eq!(code(&ctx, &s0, ControlMessage::SetReduction { k: 0 }), "bad-message");
    assert_eq!(code(&ctx, &s0, ControlMessage::SetReduction { k: 16 }), "bad-message");
    assert_eq!(code(&ctx, &s0, ControlMessage::SetReduction { k: 17 }), "bad-message");
    assert_eq!(apply(&ctx, &s0, ControlMessage::SetReduction { k: 12 }).scene.reduction, 12);
}

#[test]
fn pick_replies_without_changing_state() {
    let ctx = context();
    let s0 = SessionState::initial(&ctx, 96, 96);
    let liver = Point::new(22.0, 32.0, 30.0);
    let (x, y) = s0.scene.camera.project(anatoview_core::render::Eye::Mono, &liver).unwrap();
    let applied = apply_control(&ctx, &s0, &ControlMessage::PickOrgan { x, y }).unwrap();
    assert_eq!(applied.state, s0);
    let Some(DataMessage::PickResult(reply)) = applied.reply else {
        panic!("no pick reply")
    };
    let organ = reply.organ.unwrap();
    assert_eq!((organ.l1, organ.l2, organ.name.as_str()), (3, 5, "liver"));
    let miss = apply_control(&ctx, &s0, &ControlMessage::PickOrgan { x: 0.5, y: 0.5 }).unwrap();
    assert!(matches!(miss.reply, Some(DataMessage::PickResult(PickReply { organ: None, .. }))));
    assert_eq!(code(&ctx, &s0, ControlMessage::PickOrgan { x: 97.0, y: 3.0 }), "bad-message");
}

#[test]
fn speed_law() {
    let (v, d0) = (40.0, 90.0);
    let tau = d0 / 3.0;
    assert_eq!(navigation_speed(d0, v, d0, tau), v);
    assert_eq!(navigation_speed(d0 * 1e6, v, d0, tau), v);
    let below = navigation_speed(d0 - tau, v, d0, tau);
    assert!((below - v * (-1.0f64).exp()).abs() <= 1e-9 * v);
    assert!((below / v - 0.36787944117144233).abs() < 1e-12);
    let left = navigation_speed(d0 - 1e-9, v, d0, tau);
    assert!((v - left).abs() < 1e-6);
    let mut prev = 0.0;
    for i in 0..=900 {
        let s = navigation_speed(i as f64 * 0.1, v, d0, tau);
        assert!(s > prev || i as f64 * 0.1 >= d0);
        prev = s;
    }
    assert_eq!(navigation_speed(-4.0, v, d0, tau), navigation_speed(0.0, v, d0, tau));
}

#[test]
fn navigation_moves_model_against_the_command() {
    let ctx = context();
    let s0 = SessionState::initial(&ctx, 64, 48).scene;
    let (f, r, u) = s0.camera.basis();
    let delta = |dir, dt| step_navigation(&ctx, &s0, dir, dt).model_transform.translation - s0.model_transform.translation;
    assert!(delta(NavDirection::Left, 0.1).dot(&r) > 0.0);
    assert!(delta(NavDirection::Right, 0.1).dot(&r) < 0.0);
    assert!(delta(NavDirection::Up, 0.1).dot(&u) < 0.0);
    assert!(delta(NavDirection::Forward, 0.1).dot(&f) < 0.0);
    assert!(delta(NavDirection::Backward, 0.1).dot(&f) > 0.0);
    let moved = step_navigation(&ctx, &s0, NavDirection::Down, 0.5);
    assert_eq!(moved.camera, s0.camera);
    assert!(delta(NavDirection::Down, 1e-9).norm() < 1e-6);
    assert_eq!(delta(NavDirection::Down, 0.0).norm(), 0.0);

    // The camera starts further than d0 away, so the first steps run at v_max.
    let p = NavParams::for_scene(&ctx, &s0);
    assert!(distance_to_model(&ctx, &s0) > p.d0);
    assert!((delta(NavDirection::Left, 0.2).norm() - 0.2 * p.v_max).abs() < 1e-9);
}

#[test]
fn two_half_steps_match_one_full_step() {
    let ctx = context();
    let mut s0 = SessionState::initial(&ctx, 64, 48).scene;
    let p = NavParams::for_scene(&ctx, &s0);
    // Place the camera inside the slow zone.
    let (lo, hi) = ctx.model_bounds();
    s0.camera.position = (lo + hi) * 0.5 - Point::y() * ((hi - lo).y * 0.5 + 0.4 * p.d0);
    let d = distance_to_model(&ctx, &s0);
    assert!(d < p.d0 && d > 0.0);
    for dt in [0.01, 0.05, 0.2] {
        let once = step_navigation(&ctx, &s0, NavDirection::Forward, 2.0 * dt);
        let half = step_navigation(&ctx, &s0, NavDirection::Forward, dt);
        let twice = step_navigation(&ctx, &half, NavDirection::Forward, dt);
        let gap = (once.model_transform.translation - twice.model_transform.translation).norm();
        let v = navigation_speed(d, p.v_max, p.d0, p.tau);
        // |dv/dd| = v / tau below d0, and the distance shrinks by at most v dt.
        let bound = (v / p.tau) * v * dt * dt * (1.0 + 1e-9);
        assert!(gap <= bound, "dt={dt}: {gap} > {bound}");
        assert!(gap > 0.0);
    }
}

#[test]
fn held_keys_advance_each_tick() {
    let ctx = Arc::new(context());
    let mut session = Session::new(ctx.clone(), 64, 48);
    let before = session.state().scene.model_transform.translation;
    session.handle(&ControlMessage::Navigate {
        direction: NavDirection::Left,
        active: true,
    });
    let v0 = session.version();
    session.advance(0.1);
    assert!(session.version() > v0);
    let moved = session.state().scene.model_transform.translation;
    assert!(moved != before);
    session.handle(&ControlMessage::Navigate {
        direction: NavDirection::Left,
        active: false,
    });
    let v1 = session.version();
    session.advance(0.1);
    assert_eq!(session.version(), v1);
    assert_eq!(session.state().scene.model_transform.translation, moved);
}

#[test]
fn replaying_a_log_is_deterministic() {
    let ctx = Arc::new(context());
    let log = [
        ControlMessage::SetGaze { x: 20.0, y: 30.0 },
        ControlMessage::ToggleOrgan { l1: 1, l2: 2 },
        ControlMessage::SetClipPlane {
            point: [30.0, 30.0, 30.0],
            normal: [1.0, 1.0, 0.0],
            enabled: true,
        },
        ControlMessage::Navigate {
            direction: NavDirection::Forward,
            active: true,
        },
        ControlMessage::EnterBioscope { l1: 3, l2: 5 },
        ControlMessage::ExitBioscope {},
    ];
    let run = || {
        let mut s = Session::new(ctx.clone(), 64, 48);
        let mut frames = Vec::new();
        for msg in &log {
            s.handle(msg);
            s.advance(1.0 / 30.0);
            frames.extend(s.render().unwrap());
        }
        frames
    };
    let a = run();
    assert_eq!(a, run());
    assert_eq!(a.len(), 2 * log.len());
    assert!(a.chunks(2).all(|p| p[0].frame_id == p[1].frame_id));
    assert!(a.windows(3).step_by(2).all(|w| w[0].frame_id < w[2].frame_id));
}
