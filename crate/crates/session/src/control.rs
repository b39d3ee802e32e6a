use std::collections::BTreeSet;

use anatoview_core::foveate::{build_mapping, default_fovea_radius};
use anatoview_core::mesh::Point;
use anatoview_core::render::{
    bioscope_transform, exit_bioscope, pick_pixel, BioscopeOutcome, ClipPlane, RenderContext,
    SceneState,
};
use anatoview_core::volume::LabelKey;
use anatoview_core::Error as CoreError;

use crate::messages::{ControlMessage, DataMessage, NavDirection, PickReply, PickedOrgan};

/// Largest image side a client may request per eye.
pub const MAX_VIEW_SIDE: u32 = 2048;
/// Largest per-axis foveation reduction a client may request.
pub const MAX_REDUCTION: u32 = 16;

/// A rejected control message. The scene is left untouched.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{code}: {text}")]
pub struct ControlError {
    pub code: &'static str,
    pub text: String,
}

impl ControlError {
    fn new(code: &'static str, text: impl Into<String>) -> Self {
        ControlError {
            code,
            text: text.into(),
        }
    }

    fn bad(text: impl Into<String>) -> Self {
        Self::new("bad-message", text)
    }

    pub fn to_message(&self) -> DataMessage {
        DataMessage::error(self.code, self.text.clone())
    }
}

/// Scene plus the navigation keys currently held.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionState {
    pub scene: SceneState,
    pub navigation: BTreeSet<NavDirection>,
}

impl SessionState {
    pub fn initial(ctx: &RenderContext, width: u32, height: u32) -> Self {
        SessionState {
            scene: SceneState::initial(ctx.volume(), ctx.hierarchy(), width, height),
            navigation: BTreeSet::new(),
        }
    }
}

/// Result of applying one control message.
#[derive(Clone, Debug, PartialEq)]
pub struct Applied {
    pub state: SessionState,
    /// Direct answer to the sender, if the message asks for one.
    pub reply: Option<DataMessage>,
}

fn check_reduction(scene: &SceneState, k: u32) -> Result<(), ControlError> {
    if !(1..=MAX_REDUCTION).contains(&k) {
        return Err(ControlError::bad(format!("reduction {k} outside 1..={MAX_REDUCTION}")));
    }
    let (w, h) = (scene.camera.width, scene.camera.height);
    build_mapping((w, h), k as f32, (0.0, 0.0), default_fovea_radius(w, h))
        .map(|_| ())
        .map_err(|e| ControlError::bad(e.to_string()))
}

fn clamp_gaze(scene: &mut SceneState) {
    scene.gaze[0] = scene.gaze[0].clamp(0.0, scene.camera.width as f64);
    scene.gaze[1] = scene.gaze[1].clamp(0.0, scene.camera.height as f64);
}

fn organ(ctx: &RenderContext, l1: u8, l2: u8) -> Result<LabelKey, ControlError> {
    let key = LabelKey::new(l1, l2);
    if ctx.hierarchy().contains(key) {
        Ok(key)
    } else {
        Err(ControlError::new("unknown-organ", format!("no organ {key}")))
    }
}

/// Applies one control message to a copy of `state`.
pub fn apply_control(
    ctx: &RenderContext,
    state: &SessionState,
    msg: &ControlMessage,
) -> Result<Applied, ControlError> {
    let mut next = state.clone();
    let scene = &mut next.scene;
    let mut reply = None;
    match msg {
        ControlMessage::SetCamera { camera } => {
            camera.validate().map_err(|e| ControlError::bad(e.to_string()))?;
            if camera.width > MAX_VIEW_SIDE || camera.height > MAX_VIEW_SIDE {
                return Err(ControlError::bad(format!(
                    "image {}x{} exceeds {MAX_VIEW_SIDE} per side",
                    camera.width, camera.height
                )));
            }
            let mut candidate = scene.clone();
            candidate.camera = camera.clone();
            check_reduction(&candidate, candidate.reduction)?;
            *scene = candidate;
            clamp_gaze(scene);
        }
        ControlMessage::SetGaze { x, y } => {
            if !(x.is_finite() && y.is_finite()) {
                return Err(ControlError::bad("gaze must be finite"));
            }
            scene.gaze = [*x, *y];
            clamp_gaze(scene);
        }
        ControlMessage::ToggleOrgan { l1, l2 } => {
            scene.selection.toggle(organ(ctx, *l1, *l2)?);
        }
        ControlMessage::SelectAllInSystem { l1 } | ControlMessage::DeselectAllInSystem { l1 } => {
            let keys: Vec<LabelKey> = ctx.hierarchy().keys_in_system(*l1).collect();
            if keys.is_empty() {
                return Err(ControlError::new("unknown-organ", format!("no organs in system {l1}")));
            }
            let select = matches!(msg, ControlMessage::SelectAllInSystem { .. });
            for key in keys {
                if select {
                    scene.selection.insert(key);
                } else {
                    scene.selection.remove(key);
                }
            }
        }
        ControlMessage::SetClipPlane {
            point,
            normal,
            enabled,
        } => {
            let plane = ClipPlane::new(Point::from(*point), Point::from(*normal))
                .map_err(|e| ControlError::bad(e.to_string()))?;
            scene.clip = ClipPlane {
                enabled: *enabled,
                ..plane
            };
        }
        ControlMessage::Navigate { direction, active } => {
            if *active {
                next.navigation.insert(*direction);
            } else {
                next.navigation.remove(direction);
            }
        }
        ControlMessage::EnterBioscope { l1, l2 } => {
            let key = organ(ctx, *l1, *l2)?;
            match bioscope_transform(ctx, scene, key) {
                Ok(BioscopeOutcome::Entered(s)) => *scene = s,
                Ok(BioscopeOutcome::EmptyTarget) => {
                    return Err(ControlError::new("empty-target", format!("organ {key} has no voxels")))
                }
                Err(CoreError::Precondition(text)) => {
                    return Err(ControlError::new("target-not-selected", text))
                }
                Err(e) => return Err(ControlError::bad(e.to_string())),
            }
        }
        ControlMessage::ExitBioscope {} => *scene = exit_bioscope(scene),
        ControlMessage::PickOrgan { x, y } => {
            let (w, h) = (scene.camera.width as f64, scene.camera.height as f64);
            if !((0.0..=w).contains(x) && (0.0..=h).contains(y)) {
                return Err(ControlError::bad(format!("pick position ({x}, {y}) outside the image")));
            }
            let organ = pick_pixel(ctx, scene, *x, *y).map(|(key, name)| PickedOrgan {
                l1: key.l1,
                l2: key.l2,
                name,
            });
            reply = Some(DataMessage::PickResult(PickReply {
                x: *x,
                y: *y,
                organ,
            }));
        }
        ControlMessage::SetReduction { k } => {
            check_reduction(scene, *k)?;
            scene.reduction = *k;
        }
    }
    Ok(Applied { state: next, reply })
}

/// Speed law: constant `v_max` at or beyond `d0`, decaying exponentially with
/// scale `tau` closer in. Negative distances count as zero.
pub fn navigation_speed(distance: f64, v_max: f64, d0: f64, tau: f64) -> f64 {
    let d = distance.max(0.0);
    if d >= d0 {
        v_max
    } else {
        v_max * ((d - d0) / tau).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NavParams {
    pub v_max: f64,
    pub d0: f64,
    pub tau: f64,
}

impl NavParams {
    /// Constants scaled to the model as currently placed: `d0` is its bounding
    /// box diagonal, `tau = d0 / 3`, `v_max = d0 / 2` per second.
    pub fn for_scene(ctx: &RenderContext, scene: &SceneState) -> Self {
        let (lo, hi) = world_box(ctx, scene);
        let d0 = (hi - lo).norm();
        NavParams {
            v_max: d0 / 2.0,
            d0,
            tau: d0 / 3.0,
        }
    }
}

fn world_box(ctx: &RenderContext, scene: &SceneState) -> (Point, Point) {
    let (lo, hi) = ctx.model_bounds();
    scene.model_transform.world_box(&lo, &hi)
}

/// Distance from the camera to the model's world bounding box; zero inside.
pub fn distance_to_model(ctx: &RenderContext, scene: &SceneState) -> f64 {
    let (lo, hi) = world_box(ctx, scene);
    let p = scene.camera.position;
    let gap = (lo - p).sup(&(p - hi)).sup(&Point::zeros());
    gap.norm()
}

/// Camera-frame unit vector of a navigation direction.
pub fn direction_vector(scene: &SceneState, direction: NavDirection) -> Point {
    let (f, r, u) = scene.camera.basis();
    match direction {
        NavDirection::Left => -r,
        NavDirection::Right => r,
        NavDirection::Up => u,
        NavDirection::Down => -u,
        NavDirection::Forward => f,
        NavDirection::Backward => -f,
    }
}

/// Moves the model against the commanded direction for `dt` seconds. The
/// camera stays where it is.
pub fn step_navigation(
    ctx: &RenderContext,
    scene: &SceneState,
    direction: NavDirection,
    dt: f64,
) -> SceneState {
    let mut next = scene.clone();
    if !(dt > 0.0 && dt.is_finite()) {
        return next;
    }
    let p = NavParams::for_scene(ctx, scene);
    let v = navigation_speed(distance_to_model(ctx, scene), p.v_max, p.d0, p.tau);
    next.model_transform.translation -= direction_vector(scene, direction) * (v * dt);
    next
}

/// Applies every held navigation key for one time step.
pub fn advance_navigation(ctx: &RenderContext, state: &SessionState, dt: f64) -> SessionState {
    let mut next = state.clone();
    for &dir in &state.navigation {
        next.scene = step_navigation(ctx, &next.scene, dir, dt);
    }
    next
}
