//! Message vocabulary of both logical streams.
//!
//! Control messages travel client to server as JSON objects tagged by a
//! `"type"` field. Data messages travel back; frames are binary, everything
//! else is JSON.

use anatoview_core::foveate::FoveatedFrame;
use anatoview_core::render::Camera;
use anatoview_core::volume::{LabelKey, SegmentationHierarchy};
use serde::{Deserialize, Serialize};

/// One of the six navigation axes, relative to the camera.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NavDirection {
    Left,
    Right,
    Up,
    Down,
    Forward,
    Backward,
}

impl NavDirection {
    pub const ALL: [NavDirection; 6] = [
        NavDirection::Left,
        NavDirection::Right,
        NavDirection::Up,
        NavDirection::Down,
        NavDirection::Forward,
        NavDirection::Backward,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlMessage {
    SetCamera { camera: Camera },
    /// Gaze in full-resolution pixels.
    SetGaze { x: f64, y: f64 },
    ToggleOrgan { l1: u8, l2: u8 },
    SelectAllInSystem { l1: u8 },
    DeselectAllInSystem { l1: u8 },
    SetClipPlane { point: [f64; 3], normal: [f64; 3], enabled: bool },
    Navigate { direction: NavDirection, active: bool },
    EnterBioscope { l1: u8, l2: u8 },
    ExitBioscope {},
    /// Pick through a full-resolution pixel position of the center view.
    PickOrgan { x: f64, y: f64 },
    SetReduction { k: u32 },
}

impl ControlMessage {
    /// Selection and mode changes; these must never be coalesced away.
    pub fn is_discrete(&self) -> bool {
        !matches!(
            self,
            ControlMessage::SetCamera { .. }
                | ControlMessage::SetGaze { .. }
                | ControlMessage::PickOrgan { .. }
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PickedOrgan {
    pub l1: u8,
    pub l2: u8,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PickReply {
    pub x: f64,
    pub y: f64,
    pub organ: Option<PickedOrgan>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorReply {
    pub code: String,
    pub text: String,
}

/// Display entry for one organ, sent once when a session opens.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrganInfo {
    pub l1: u8,
    pub l2: u8,
    pub name: String,
    /// `#RRGGBBAA`.
    pub color: String,
    pub selected: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataMessage {
    Frame(FoveatedFrame),
    PickResult(PickReply),
    /// Heartbeat naming the newest frame sent.
    Ack { frame_id: u64 },
    Error(ErrorReply),
    Hierarchy(Vec<OrganInfo>),
}

impl DataMessage {
    pub fn error(code: &str, text: impl Into<String>) -> Self {
        DataMessage::Error(ErrorReply {
            code: code.to_string(),
            text: text.into(),
        })
    }

    pub fn hierarchy(hierarchy: &SegmentationHierarchy, selected: impl Fn(LabelKey) -> bool) -> Self {
        DataMessage::Hierarchy(
            hierarchy
                .entries()
                .iter()
                .map(|e| OrganInfo {
                    l1: e.key.l1,
                    l2: e.key.l2,
                    name: e.name.clone(),
                    color: e.color.to_hex(),
                    selected: selected(e.key),
                })
                .collect(),
        )
    }
}
