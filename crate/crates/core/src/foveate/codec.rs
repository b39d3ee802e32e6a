use rayon::prelude::*;

use super::{build_mapping, default_fovea_radius, AxisWarp, FoveaMapping};
use crate::error::{Error, Result};
use crate::render::{render_mapped, Eye, RenderContext, RenderOptions, RenderStats, RgbaImage, SceneState};

/// Bytes before the pixel payload in the wire layout.
pub const FRAME_HEADER_LEN: usize = 8 + 1 + 4 * 2 + 4 * 4;

/// One eye's reduced-resolution frame plus everything needed to expand it.
#[derive(Clone, Debug, PartialEq)]
pub struct FoveatedFrame {
    pub mapping: FoveaMapping,
    pub eye: Eye,
    pub frame_id: u64,
    /// RGBA8 at the reduced dimensions.
    pub pixels: Vec<u8>,
}

fn eye_code(eye: Eye) -> u8 {
    match eye {
        Eye::Left => 0,
        Eye::Right => 1,
        Eye::Mono => 2,
    }
}

impl FoveatedFrame {
    pub fn new(mapping: FoveaMapping, eye: Eye, frame_id: u64, pixels: Vec<u8>) -> Result<Self> {
        let expected = 4 * mapping.sample_count() as usize;
        if pixels.len() != expected {
            return Err(Error::Format(format!(
                "{} pixel bytes, mapping needs {expected}",
                pixels.len()
            )));
        }
        Ok(FoveatedFrame {
            mapping,
            eye,
            frame_id,
            pixels,
        })
    }

    /// Little-endian wire layout: id, eye, four u16 sizes, four f32
    /// parameters, then the pixels.
    pub fn encode(&self) -> Vec<u8> {
        let m = &self.mapping;
        let mut out = Vec::with_capacity(FRAME_HEADER_LEN + self.pixels.len());
        out.extend_from_slice(&self.frame_id.to_le_bytes());
        out.push(eye_code(self.eye));
        for v in [m.full.0, m.full.1, m.reduced.0, m.reduced.1] {
            // FoveaMapping::new caps every size at u16::MAX.
            out.extend_from_slice(&(v as u16).to_le_bytes());
        }
        for v in [m.gaze.0, m.gaze.1, m.fovea_radius, m.reduction] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < FRAME_HEADER_LEN {
            return Err(Error::Format(format!("frame of {} bytes has no header", bytes.len())));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]) as u32;
        let f32_at = |i: usize| f32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        let frame_id = u64::from_le_bytes(bytes[0..8].try_into().expect("8 bytes"));
        let eye = match bytes[8] {
            0 => Eye::Left,
            1 => Eye::Right,
            2 => Eye::Mono,
            e => return Err(Error::Format(format!("unknown eye code {e}"))),
        };
        let full = (u16_at(9), u16_at(11));
        let reduced = (u16_at(13), u16_at(15));
        let gaze = (f32_at(17), f32_at(21));
        let mapping = FoveaMapping::new(full, reduced, gaze, f32_at(25), f32_at(29))
            .map_err(|e| Error::Format(format!("bad mapping: {e}")))?;
        FoveatedFrame::new(mapping, eye, frame_id, bytes[FRAME_HEADER_LEN..].to_vec())
    }
}

/// Renders one eye through the scene's gaze and reduction with the default
/// fovea radius.
pub fn encode_frame(
    ctx: &RenderContext,
    scene: &SceneState,
    eye: Eye,
    frame_id: u64,
) -> Result<FoveatedFrame> {
    let (w, h) = (scene.camera.width, scene.camera.height);
    let mapping = build_mapping(
        (w, h),
        scene.reduction as f32,
        (scene.gaze[0] as f32, scene.gaze[1] as f32),
        default_fovea_radius(w, h),
    )?;
    Ok(encode_frame_with(ctx, scene, eye, frame_id, &mapping, RenderOptions::default())?.0)
}

/// Marches one ray per reduced pixel, each through its mapped full-frame
/// position.
pub fn encode_frame_with(
    ctx: &RenderContext,
    scene: &SceneState,
    eye: Eye,
    frame_id: u64,
    mapping: &FoveaMapping,
    options: RenderOptions<'_>,
) -> Result<(FoveatedFrame, RenderStats)> {
    if mapping.full != (scene.camera.width, scene.camera.height) {
        return Err(Error::Dimension(format!(
            "mapping for {:?} but camera is {}x{}",
            mapping.full, scene.camera.width, scene.camera.height
        )));
    }
    let (w, h) = mapping.reduced;
    let (img, stats) = render_mapped(ctx, scene, eye, w, h, |i, j| mapping.sample_position(i, j), options)?;
    Ok((FoveatedFrame::new(*mapping, eye, frame_id, img.data)?, stats))
}

/// Interpolation taps of one full pixel along an axis.
#[derive(Clone, Copy)]
struct Tap {
    i0: usize,
    i1: usize,
    w1: f64,
}

fn taps(axis: &AxisWarp) -> Vec<Tap> {
    let last = axis.reduced as usize - 1;
    (0..axis.full)
        .map(|x| {
            let s = axis.to_reduced(x as f64 + 0.5) - 0.5;
            if s <= 0.0 {
                return Tap { i0: 0, i1: 0, w1: 0.0 };
            }
            let i0 = (s.floor() as usize).min(last);
            if i0 == last {
                return Tap { i0, i1: i0, w1: 0.0 };
            }
            Tap {
                i0,
                i1: i0 + 1,
                w1: s - i0 as f64,
            }
        })
        .collect()
}

/// Expands a frame to full resolution by bilinear interpolation between the
/// reduced samples, located through the inverse warp.
pub fn decode_frame(frame: &FoveatedFrame) -> Result<RgbaImage> {
    let m = &frame.mapping;
    let (w, h) = m.reduced;
    if frame.pixels.len() != 4 * w as usize * h as usize {
        return Err(Error::Format(format!(
            "{} pixel bytes for a {w}x{h} frame",
            frame.pixels.len()
        )));
    }
    let (cols, rows) = (taps(m.axis_x()), taps(m.axis_y()));
    let (full_w, full_h) = m.full;
    let src = &frame.pixels;
    let texel = |i: usize, j: usize, c: usize| src[4 * (j * w as usize + i) + c] as f64;
    let mut data = vec![0u8; 4 * full_w as usize * full_h as usize];
    data.par_chunks_mut(4 * full_w as usize)
        .zip(rows.par_iter())
        .for_each(|(row, ty)| {
            for (px, tx) in row.chunks_exact_mut(4).zip(&cols) {
                for (c, out) in px.iter_mut().enumerate() {
                    let top = texel(tx.i0, ty.i0, c) * (1.0 - tx.w1) + texel(tx.i1, ty.i0, c) * tx.w1;
                    let bottom = texel(tx.i0, ty.i1, c) * (1.0 - tx.w1) + texel(tx.i1, ty.i1, c) * tx.w1;
                    *out = (top * (1.0 - ty.w1) + bottom * ty.w1).round().clamp(0.0, 255.0) as u8;
                }
            }
        });
    RgbaImage::from_raw(full_w, full_h, data)
}

/// Peak signal-to-noise ratio over the RGB channels, in dB. Identical images
/// give infinity.
pub fn psnr(a: &RgbaImage, b: &RgbaImage) -> Result<f64> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(Error::Dimension(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let (sum, count) = a
        .data
        .chunks_exact(4)
        .zip(b.data.chunks_exact(4))
        .flat_map(|(p, q)| (0..3).map(move |c| (p[c] as f64 - q[c] as f64).powi(2)))
        .fold((0.0, 0usize), |(s, n), d| (s + d, n + 1));
    if count == 0 {
        return Err(Error::Dimension("empty images".into()));
    }
    let mse = sum / count as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0f64 * 255.0 / mse).log10()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(mapping: FoveaMapping, fill: impl Fn(u32, u32) -> [u8; 4]) -> FoveatedFrame {
        let (w, h) = mapping.reduced;
        let mut px = Vec::new();
        for j in 0..h {
            for i in 0..w {
                px.extend(fill(i, j));
            }
        }
        FoveatedFrame::new(mapping, Eye::Left, 7, px).unwrap()
    }

    #[test]
    fn wire_round_trip() {
        let m = build_mapping((64, 48), 3.0, (10.5, 40.25), 6.0).unwrap();
        let f = frame(m, |i, j| [i as u8, j as u8, 3, 255]);
        let bytes = f.encode();
        assert_eq!(bytes.len(), FRAME_HEADER_LEN + f.pixels.len());
        assert_eq!(&bytes[..8], &7u64.to_le_bytes());
        assert_eq!(FoveatedFrame::decode(&bytes).unwrap(), f);
    }

    #[test]
    fn malformed_wire_rejected() {
        let m = build_mapping((64, 48), 3.0, (10.0, 10.0), 6.0).unwrap();
        let bytes = frame(m, |_, _| [0; 4]).encode();
        assert!(FoveatedFrame::decode(&bytes[..10]).is_err());
        assert!(FoveatedFrame::decode(&bytes[..bytes.len() - 1]).is_err());
        let mut eye = bytes.clone();
        eye[8] = 9;
        assert!(FoveatedFrame::decode(&eye).is_err());
        let mut dims = bytes;
        dims[13] = 0xff;
        assert!(FoveatedFrame::decode(&dims).is_err());
    }

    #[test]
    fn constant_frame_decodes_exactly() {
        let m = build_mapping((50, 31), 3.0, (49.0, 0.0), 5.0).unwrap();
        let img = decode_frame(&frame(m, |_, _| [9, 80, 200, 255])).unwrap();
        assert!(img.pixels().all(|(_, _, p)| p == [9, 80, 200, 255]));
    }

    #[test]
    fn psnr_basics() {
        let a = RgbaImage::filled(4, 4, [10, 10, 10, 255]);
        let b = RgbaImage::filled(4, 4, [11, 10, 10, 255]);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let expected = 10.0 * (255.0f64.powi(2) * 3.0).log10();
        assert!((psnr(&a, &b).unwrap() - expected).abs() < 1e-9);
        assert!(psnr(&a, &RgbaImage::filled(2, 2, [0; 4])).is_err());
    }
}
