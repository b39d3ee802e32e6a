use std::path::PathBuf;

use anatoview_core::foveate::{decode_frame, encode_frame};
use anatoview_core::render::{render_frame, Eye, RgbaImage, SceneState, SelectionSet};

use crate::assets::{check_output_parent, Assets};
use crate::parse;
use crate::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    /// Headerless row-major RGBA8.
    Raw,
}

pub struct RenderArgs {
    pub input: PathBuf,
    pub out: PathBuf,
    pub width: u32,
    pub height: u32,
    pub eye: Eye,
    pub camera: Option<String>,
    pub select: Option<String>,
    pub clip: Option<String>,
    /// Render through the foveated codec at this reduction and decode.
    pub reduction: Option<u32>,
    pub gaze: Option<String>,
    pub format: Option<ImageFormat>,
}

pub struct RenderSummary {
    pub image: RgbaImage,
    pub foreground_pixels: usize,
}

fn format_for(args: &RenderArgs) -> ImageFormat {
    args.format.unwrap_or_else(|| match args.out.extension() {
        Some(ext) if ext.eq_ignore_ascii_case("png") => ImageFormat::Png,
        _ => ImageFormat::Raw,
    })
}

pub fn run(args: &RenderArgs) -> CliResult<RenderSummary> {
    if args.width == 0 || args.height == 0 {
        return Err(CliError::usage("--width and --height must be positive"));
    }
    check_output_parent(&args.out)?;
    let assets = Assets::load(&args.input)?;
    let mut scene = SceneState::initial(&assets.volume, &assets.hierarchy, args.width, args.height);
    if let Some(text) = &args.camera {
        scene.camera = parse::camera(text, &scene.camera)?;
    }
    if let Some(text) = &args.select {
        let mut selection = SelectionSet::new();
        for key in parse::selection(text, &assets.hierarchy)? {
            selection.insert(key);
        }
        scene.selection = selection;
    }
    if let Some(text) = &args.clip {
        scene.clip = parse::clip(text)?;
    }
    if let Some(text) = &args.gaze {
        let v = parse::floats(text, "--gaze")?;
        let [x, y] = v[..] else {
            return Err(CliError::usage("--gaze takes x,y"));
        };
        if !(0.0..=args.width as f64).contains(&x) || !(0.0..=args.height as f64).contains(&y) {
            return Err(CliError::usage(format!("--gaze ({x}, {y}) lies outside the image")));
        }
        scene.gaze = [x, y];
    }

    let ctx = assets.into_context();
    let image = match args.reduction {
        None => render_frame(&ctx, &scene, args.eye).map_err(CliError::stage("render"))?,
        Some(k) => {
            if k == 0 {
                return Err(CliError::usage("--reduction must be at least 1"));
            }
            scene.reduction = k;
            let frame = encode_frame(&ctx, &scene, args.eye, 0)
                .map_err(|e| CliError::usage(format!("--reduction {k}: {e}")))?;
            decode_frame(&frame).map_err(CliError::stage("decode"))?
        }
    };

    let failed = |e: String| CliError::usage(format!("cannot write {}: {e}", args.out.display()));
    match format_for(args) {
        ImageFormat::Raw => std::fs::write(&args.out, &image.data).map_err(|e| failed(e.to_string()))?,
        ImageFormat::Png => image::save_buffer(
            &args.out,
            &image.data,
            image.width,
            image.height,
            image::ExtendedColorType::Rgba8,
        )
        .map_err(|e| failed(e.to_string()))?,
    }
    let background = scene.settings.background.0;
    let foreground_pixels = image.data.chunks(4).filter(|p| *p != background).count();
    Ok(RenderSummary {
        image,
        foreground_pixels,
    })
}
