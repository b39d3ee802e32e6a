use std::sync::Arc;

use anatoview_core::foveate::{encode_frame, FoveatedFrame};
use anatoview_core::render::{Eye, RenderContext, SceneState};

use crate::control::{advance_navigation, apply_control, SessionState};
use crate::messages::{ControlMessage, DataMessage};

/// Renders both eyes of one snapshot under one frame id.
pub fn render_stereo(
    ctx: &RenderContext,
    scene: &SceneState,
    frame_id: u64,
) -> anatoview_core::Result<[FoveatedFrame; 2]> {
    Ok([
        encode_frame(ctx, scene, Eye::Left, frame_id)?,
        encode_frame(ctx, scene, Eye::Right, frame_id)?,
    ])
}

/// State of one client connection, independent of any transport.
///
/// Every accepted change bumps a version counter, so a render loop can skip
/// frames when nothing changed.
#[derive(Clone, Debug)]
pub struct Session {
    ctx: Arc<RenderContext>,
    state: SessionState,
    version: u64,
    drawn: u64,
    next_frame: u64,
}

impl Session {
    pub fn new(ctx: Arc<RenderContext>, width: u32, height: u32) -> Self {
        let state = SessionState::initial(&ctx, width, height);
        Session::with_state(ctx, state)
    }

    pub fn with_state(ctx: Arc<RenderContext>, state: SessionState) -> Self {
        Session {
            ctx,
            state,
            version: 1,
            drawn: 0,
            next_frame: 1,
        }
    }

    pub fn context(&self) -> &Arc<RenderContext> {
        &self.ctx
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Id the next rendered pair will carry.
    pub fn next_frame_id(&self) -> u64 {
        self.next_frame
    }

    pub fn hierarchy_message(&self) -> DataMessage {
        DataMessage::hierarchy(self.ctx.hierarchy(), |k| self.state.scene.selection.contains(k))
    }

    /// Applies one message. Returns the reply for the sender, which is an
    /// error message if the control was rejected.
    pub fn handle(&mut self, msg: &ControlMessage) -> Option<DataMessage> {
        match apply_control(&self.ctx, &self.state, msg) {
            Ok(applied) => {
                if applied.state != self.state {
                    self.state = applied.state;
                    self.version += 1;
                }
                applied.reply
            }
            Err(e) => Some(e.to_message()),
        }
    }

    /// Runs held navigation keys for `dt` seconds.
    pub fn advance(&mut self, dt: f64) {
        if self.state.navigation.is_empty() {
            return;
        }
        let next = advance_navigation(&self.ctx, &self.state, dt);
        if next != self.state {
            self.state = next;
            self.version += 1;
        }
    }

    pub fn navigating(&self) -> bool {
        !self.state.navigation.is_empty()
    }

    /// Copies the scene and reserves a frame id for rendering it.
    pub fn snapshot(&mut self) -> (SceneState, u64) {
        let id = self.next_frame;
        self.next_frame += 1;
        self.drawn = self.version;
        (self.state.scene.clone(), id)
    }

    /// A snapshot if the state changed since the last one was taken.
    pub fn pending_render(&mut self) -> Option<(SceneState, u64)> {
        (self.drawn != self.version).then(|| self.snapshot())
    }

    /// Snapshot and render in one call.
    pub fn render(&mut self) -> anatoview_core::Result<[FoveatedFrame; 2]> {
        let (scene, id) = self.snapshot();
        render_stereo(&self.ctx, &scene, id)
    }
}
