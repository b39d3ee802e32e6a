use std::path::PathBuf;
use std::process::ExitCode;

use anatoview_cli::commands::{phantom, preprocess, render, serve};
use anatoview_cli::{parse, CliError, CliResult};
use anatoview_core::render::Eye;
use clap::{Parser, Subcommand, ValueEnum};
use tracing::info;

#[derive(Parser)]
#[command(name = "anatoview", version, about = "Labeled anatomy volumes: preprocessing, rendering, streaming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EyeArg {
    Mono,
    Left,
    Right,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Png,
    Raw,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled volume from a preset or JSON spec.
    Phantom {
        /// Preset name (sphere, three-organs, growing-disk) or spec file.
        #[arg(long = "in")]
        input: String,
        /// Output container base path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        downsample: usize,
    },
    /// Repair, resample and mesh a sparse volume into an asset directory.
    Preprocess {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Spacing of the labeled key slices.
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, default_value_t = 1)]
        downsample: usize,
        /// Comma-separated slice indices with missing labels.
        #[arg(long)]
        gaps: Option<String>,
        /// Organs to mesh (names or l1:l2); defaults to all.
        #[arg(long)]
        select: Option<String>,
        /// Fraction of triangles kept by decimation.
        #[arg(long, default_value_t = 0.5)]
        decimate: f64,
    },
    /// Render a still image.
    Render {
        /// Asset directory or volume container.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 320)]
        width: u32,
        #[arg(long, default_value_t = 240)]
        height: u32,
        #[arg(long, value_enum, default_value_t = EyeArg::Mono)]
        eye: EyeArg,
        /// px,py,pz,fx,fy,fz[,ux,uy,uz[,fov_degrees]]
        #[arg(long, allow_hyphen_values = true)]
        camera: Option<String>,
        /// Organs to show: names or l1:l2, comma-separated; `all` or `none`.
        #[arg(long)]
        select: Option<String>,
        /// px,py,pz,nx,ny,nz
        #[arg(long, allow_hyphen_values = true)]
        clip: Option<String>,
        /// Render through the foveated codec at this per-axis reduction.
        #[arg(long)]
        reduction: Option<u32>,
        /// Gaze x,y in pixels for --reduction.
        #[arg(long)]
        gaze: Option<String>,
        /// Output format; inferred from the extension by default.
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Serve interactive sessions over WebSocket.
    Serve {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
        /// Fixed time step per control message instead of a frame clock.
        #[arg(long)]
        lockstep: Option<f64>,
        #[arg(long, default_value_t = 3)]
        reduction: u32,
        #[arg(long, default_value_t = 720)]
        width: u32,
        #[arg(long, default_value_t = 480)]
        height: u32,
        #[arg(long, default_value_t = 8)]
        max_sessions: usize,
    },
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Phantom {
            input,
            out,
            seed,
            downsample,
        } => {
            let summary = phantom::run(&phantom::PhantomArgs {
                input,
                out: out.clone(),
                seed,
                downsample,
            })?;
            let [nx, ny, nz] = summary.dims;
            println!("wrote {} ({nx}x{ny}x{nz})", out.display());
            for (key, count) in &summary.histogram {
                let name = summary.names.get(key).map(String::as_str).unwrap_or("?");
                println!("{}:{}\t{name}\t{count}", key.l1, key.l2);
            }
        }
        Command::Preprocess {
            input,
            out,
            stride,
            downsample,
            gaps,
            select,
            decimate,
        } => {
            let gaps = match gaps {
                Some(text) => parse::slice_list(&text)?,
                None => Vec::new(),
            };
            let report = preprocess::run(&preprocess::PreprocessArgs {
                input,
                out: out.clone(),
                stride,
                downsample,
                gaps,
                select,
                decimate,
            })?;
            println!(
                "wrote {} ({} meshes, min Dice at key slices {})",
                out.display(),
                report.meshes.len(),
                report.min_dice_at_key_slices
            );
        }
        Command::Render {
            input,
            out,
            width,
            height,
            eye,
            camera,
            select,
            clip,
            reduction,
            gaze,
            format,
        } => {
            let summary = render::run(&render::RenderArgs {
                input,
                out: out.clone(),
                width,
                height,
                eye: match eye {
                    EyeArg::Mono => Eye::Mono,
                    EyeArg::Left => Eye::Left,
                    EyeArg::Right => Eye::Right,
                },
                camera,
                select,
                clip,
                reduction,
                gaze,
                format: format.map(|f| match f {
                    FormatArg::Png => render::ImageFormat::Png,
                    FormatArg::Raw => render::ImageFormat::Raw,
                }),
            })?;
            println!(
                "wrote {} ({}x{}, {} foreground pixels)",
                out.display(),
                summary.image.width,
                summary.image.height,
                summary.foreground_pixels
            );
        }
        Command::Serve {
            input,
            bind,
            fps,
            lockstep,
            reduction,
            width,
            height,
            max_sessions,
        } => {
            let args = serve::ServeArgs {
                input,
                bind,
                fps,
                lockstep,
                reduction,
                width,
                height,
                max_sessions,
            };
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| CliError::Pipeline {
                    stage: "serve",
                    message: e.to_string(),
                })?;
            runtime.block_on(async {
                let interrupted = interrupt_listener().map_err(|e| CliError::Pipeline {
                    stage: "serve",
                    message: format!("cannot install interrupt handler: {e}"),
                })?;
                serve::run(
                    &args,
                    |addr| {
                        info!("listening on {addr}");
                        println!("listening on ws://{addr}");
                    },
                    async {
                        interrupted.await;
                        info!("interrupt received, shutting down");
                    },
                )
                .await
            })?;
        }
    }
    Ok(())
}

/// Registers for SIGINT immediately, so an interrupt that arrives before the
/// server starts polling still triggers a clean shutdown.
#[cfg(unix)]
fn interrupt_listener() -> std::io::Result<impl std::future::Future<Output = ()>> {
    use tokio::signal::unix::{signal, SignalKind};
    let mut stream = signal(SignalKind::interrupt())?;
    Ok(async move {
        stream.recv().await;
    })
}

#[cfg(not(unix))]
fn interrupt_listener() -> std::io::Result<impl std::future::Future<Output = ()>> {
    Ok(async {
        let _ = tokio::signal::ctrl_c().await;
    })
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("anatoview: {e}");
            e.exit_code()
        }
    }
}
