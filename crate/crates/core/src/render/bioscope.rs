use super::scene::{Mode, ModelTransform, SceneState, SelectionSet};
use super::RenderContext;
use crate::error::{Error, Result};
use crate::volume::LabelKey;

/// Magnification applied on entry.
pub const BIOSCOPE_SCALE: f64 = 2.0;
/// Viewing distance as a multiple of the scaled bounding-box diagonal.
pub const BIOSCOPE_DISTANCE: f64 = 1.5;

#[derive(Clone, Debug, PartialEq)]
pub enum BioscopeOutcome {
    Entered(SceneState),
    /// The target has no voxels; the scene is left as it was.
    EmptyTarget,
}

/// Isolates `target`, doubles its scale and centers it in front of the camera.
///
/// Re-entering while already in bioscope mode starts again from the stored
/// explore state, so one exit always returns there.
pub fn bioscope_transform(
    ctx: &RenderContext,
    scene: &SceneState,
    target: LabelKey,
) -> Result<BioscopeOutcome> {
    let base = match (&scene.mode, &scene.restore) {
        (Mode::Bioscope, Some(prev)) => prev.as_ref(),
        _ => scene,
    };
    if !base.selection.contains(target) && scene.bioscope_target != Some(target) {
        return Err(Error::Precondition(format!("target {target} is not selected")));
    }
    let Some((lo, hi)) = ctx.organ_bounds(target) else {
        return Ok(BioscopeOutcome::EmptyTarget);
    };

    let old = &base.model_transform;
    let scale = old.scale * BIOSCOPE_SCALE;
    let center = (lo + hi) * 0.5;
    let diagonal = (hi - lo).norm() * scale;
    let (forward, _, _) = base.camera.basis();
    let anchor = base.camera.position + forward * (BIOSCOPE_DISTANCE * diagonal);
    let transform = ModelTransform {
        rotation: old.rotation,
        scale,
        translation: anchor - old.rotation * center * scale,
    };

    let mut next = base.clone();
    next.model_transform = transform;
    next.selection = SelectionSet::from_iter([target]);
    next.mode = Mode::Bioscope;
    next.bioscope_target = Some(target);
    next.restore = Some(Box::new(base.clone()));
    Ok(BioscopeOutcome::Entered(next))
}

/// Returns to the stored explore state; a no-op outside bioscope mode.
pub fn exit_bioscope(scene: &SceneState) -> SceneState {
    match &scene.restore {
        Some(prev) if scene.mode == Mode::Bioscope => prev.as_ref().clone(),
        _ => scene.clone(),
    }
}
