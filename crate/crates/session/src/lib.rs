//! Client/server contract for remote viewing sessions.
//!
//! A client sends [`ControlMessage`]s; the server keeps one [`SessionState`]
//! per connection, renders stereo foveated frames from snapshots of it and
//! answers with [`DataMessage`]s. Both directions use the `HVW1` framing in
//! [`wire`] over a single WebSocket connection.

pub mod control;
pub mod messages;
pub mod server;
pub mod session;
pub mod wire;

pub use control::{
    advance_navigation, apply_control, direction_vector, distance_to_model, navigation_speed,
    step_navigation, Applied, ControlError, NavParams, SessionState,
};
pub use messages::{ControlMessage, DataMessage, ErrorReply, NavDirection, OrganInfo, PickReply, PickedOrgan};
pub use server::{Cadence, Server, ServerConfig};
pub use session::{render_stereo, Session};
pub use wire::{decode_control, decode_data, encode_control, encode_data, WireError};
