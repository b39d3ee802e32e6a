use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anatoview_core::foveate::{build_mapping, default_fovea_radius};
use anatoview_session::control::{MAX_REDUCTION, MAX_VIEW_SIDE};
use anatoview_session::{Cadence, Server, ServerConfig};

use crate::assets::Assets;
use crate::{CliError, CliResult};

pub struct ServeArgs {
    pub input: PathBuf,
    pub bind: String,
    pub fps: f64,
    /// Advance one fixed step per control message instead of a wall clock.
    pub lockstep: Option<f64>,
    pub reduction: u32,
    pub width: u32,
    pub height: u32,
    pub max_sessions: usize,
}

fn config(args: &ServeArgs) -> CliResult<ServerConfig> {
    if !(1..=MAX_REDUCTION).contains(&args.reduction) {
        return Err(CliError::usage(format!(
            "--reduction {} outside 1..={MAX_REDUCTION}",
            args.reduction
        )));
    }
    if args.width == 0 || args.height == 0 || args.width > MAX_VIEW_SIDE || args.height > MAX_VIEW_SIDE {
        return Err(CliError::usage(format!(
            "view size {}x{} outside 1..={MAX_VIEW_SIDE} per side",
            args.width, args.height
        )));
    }
    build_mapping(
        (args.width, args.height),
        args.reduction as f32,
        (0.0, 0.0),
        default_fovea_radius(args.width, args.height),
    )
    .map_err(|e| CliError::usage(format!("--reduction {}: {e}", args.reduction)))?;
    if args.max_sessions == 0 {
        return Err(CliError::usage("--max-sessions must be at least 1"));
    }
    let cadence = match args.lockstep {
        Some(dt) if dt > 0.0 && dt.is_finite() => Cadence::Lockstep { dt },
        Some(dt) => return Err(CliError::usage(format!("--lockstep {dt} must be a positive step"))),
        None if args.fps > 0.0 && args.fps.is_finite() => Cadence::Fixed { fps: args.fps },
        None => return Err(CliError::usage(format!("--fps {} must be positive", args.fps))),
    };
    Ok(ServerConfig {
        cadence,
        max_sessions: args.max_sessions,
        idle_ack: Duration::from_secs(2),
        width: args.width,
        height: args.height,
        reduction: args.reduction,
    })
}

/// Binds, reports the listening address through `on_listen`, and serves until
/// `shutdown` resolves.
pub async fn run(
    args: &ServeArgs,
    on_listen: impl FnOnce(SocketAddr),
    shutdown: impl Future<Output = ()>,
) -> CliResult<()> {
    let config = config(args)?;
    let ctx = Assets::load(&args.input)?.into_context();
    let server = Server::bind(args.bind.as_str(), Arc::new(ctx), config)
        .await
        .map_err(|e| CliError::usage(format!("cannot listen on {}: {e}", args.bind)))?;
    let addr = server
        .local_addr()
        .map_err(|e| CliError::usage(format!("cannot listen on {}: {e}", args.bind)))?;
    on_listen(addr);
    server.run(shutdown).await.map_err(|e| CliError::Pipeline {
        stage: "serve",
        message: e.to_string(),
    })
}
