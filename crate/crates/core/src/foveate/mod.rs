//! Gaze-centered rectangular foveation.
//!
//! Each image axis is warped independently by a three-piece linear map between
//! a reduced grid of `n` samples and the full axis of `N` pixels. The middle
//! piece covers the fovea at unit slope and is aligned to whole pixels, so
//! every reduced sample in it lands exactly on a full pixel center. The two
//! outer pieces share the remaining samples in proportion to their length.

mod codec;

pub use codec::{
    decode_frame, encode_frame, encode_frame_with, psnr, FoveatedFrame, FRAME_HEADER_LEN,
};

use crate::error::{Error, Result};

/// Per-axis reduction used when nothing else is configured.
pub const DEFAULT_REDUCTION: f32 = 3.0;
/// Smallest reduced axis length accepted.
pub const MIN_REDUCED: u32 = 4;

/// Fovea half-size used when none is given: a sixth of the shorter side.
pub fn default_fovea_radius(width: u32, height: u32) -> f32 {
    width.min(height) as f32 / 6.0
}

/// Reduced length of an axis of `full` pixels.
pub fn reduced_len(full: u32, reduction: f32) -> u32 {
    (full as f64 / reduction as f64).round() as u32
}

/// Warp of one axis. Breakpoints are `0 < a <= a + fovea <= n` on the reduced
/// side and `0 <= lo < hi <= full` on the full side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AxisWarp {
    pub full: u32,
    pub reduced: u32,
    /// First full pixel of the fovea.
    pub lo: u32,
    /// One past the last full pixel of the fovea.
    pub hi: u32,
    /// Reduced index of the first foveal sample.
    pub a: u32,
}

impl AxisWarp {
    fn build(full: u32, reduced: u32, gaze: f64, radius: f64) -> AxisWarp {
        debug_assert!(reduced >= 1 && reduced <= full);
        let center = (gaze.floor() as i64).clamp(0, full as i64 - 1);
        let mut r = radius.round().clamp(0.0, full as f64) as i64;
        let (lo, hi) = loop {
            let lo = (center - r).max(0) as u32;
            let hi = (center + r + 1).min(full as i64) as u32;
            let cap = reduced - u32::from(lo > 0) - u32::from(hi < full);
            if hi - lo <= cap || r == 0 {
                break (lo, hi);
            }
            r -= 1;
        };
        let fovea = hi - lo;
        let spare = reduced - fovea;
        let periph = full - fovea;
        let ideal = if periph == 0 {
            0.0
        } else {
            lo as f64 * spare as f64 / periph as f64
        };
        let a_min = u32::from(lo > 0).max(spare.saturating_sub(full - hi));
        let a_max = lo.min(spare - u32::from(hi < full));
        let a = (ideal.round() as u32).clamp(a_min, a_max);
        AxisWarp {
            full,
            reduced,
            lo,
            hi,
            a,
        }
    }

    fn identity(full: u32) -> AxisWarp {
        AxisWarp {
            full,
            reduced: full,
            lo: 0,
            hi: full,
            a: 0,
        }
    }

    /// Reduced index just past the fovea.
    pub fn b(&self) -> u32 {
        self.a + self.hi - self.lo
    }

    /// Full-axis coordinate of reduced coordinate `u` in `[0, reduced]`.
    pub fn to_full(&self, u: f64) -> f64 {
        let (a, b) = (self.a as f64, self.b() as f64);
        if u < a {
            u * self.lo as f64 / a
        } else if u <= b {
            self.lo as f64 + (u - a)
        } else {
            let (n, full, hi) = (self.reduced as f64, self.full as f64, self.hi as f64);
            hi + (u - b) * (full - hi) / (n - b)
        }
    }

    /// Reduced coordinate of full-axis coordinate `x` in `[0, full]`.
    ///
    /// Points that are the exact image of a reduced sample center come back as
    /// that center, with no rounding drift.
    pub fn to_reduced(&self, x: f64) -> f64 {
        let (lo, hi) = (self.lo as f64, self.hi as f64);
        let u = if x < lo {
            x * self.a as f64 / lo
        } else if x <= hi {
            self.a as f64 + (x - lo)
        } else {
            let (n, full, b) = (self.reduced as f64, self.full as f64, self.b() as f64);
            b + (x - hi) * (n - b) / (full - hi)
        };
        let center = u.floor() + 0.5;
        for c in [center - 1.0, center, center + 1.0] {
            if c > 0.0 && c < self.reduced as f64 && self.to_full(c) == x {
                return c;
            }
        }
        u
    }

    /// Full pixels per reduced sample outside the fovea.
    pub fn peripheral_slopes(&self) -> (Option<f64>, Option<f64>) {
        let left = (self.a > 0).then(|| self.lo as f64 / self.a as f64);
        let right = (self.b() < self.reduced)
            .then(|| (self.full - self.hi) as f64 / (self.reduced - self.b()) as f64);
        (left, right)
    }
}

/// Warp between a full frame and its reduced-resolution encoding.
///
/// The mapping is a pure function of the fields that travel on the wire, so a
/// decoder rebuilds it with [`FoveaMapping::new`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FoveaMapping {
    pub full: (u32, u32),
    pub reduced: (u32, u32),
    pub gaze: (f32, f32),
    pub fovea_radius: f32,
    pub reduction: f32,
    axes: [AxisWarp; 2],
}

/// Builds the warp for a `full` frame reduced by `reduction` per axis.
///
/// A fovea that does not fit the reduced budget is shrunk until it does.
pub fn build_mapping(
    full: (u32, u32),
    reduction: f32,
    gaze: (f32, f32),
    fovea_radius: f32,
) -> Result<FoveaMapping> {
    if !(reduction.is_finite() && reduction >= 1.0) {
        return Err(Error::Precondition(format!("reduction {reduction} must be at least 1")));
    }
    let reduced = (reduced_len(full.0, reduction), reduced_len(full.1, reduction));
    FoveaMapping::new(full, reduced, gaze, fovea_radius, reduction)
}

impl FoveaMapping {
    /// Rebuilds a mapping from explicit reduced dimensions.
    pub fn new(
        full: (u32, u32),
        reduced: (u32, u32),
        gaze: (f32, f32),
        fovea_radius: f32,
        reduction: f32,
    ) -> Result<FoveaMapping> {
        let (w_full, h_full) = full;
        if w_full == 0 || h_full == 0 || w_full > u16::MAX as u32 || h_full > u16::MAX as u32 {
            return Err(Error::Dimension(format!("full frame {w_full}x{h_full}")));
        }
        if reduced.0 > w_full || reduced.1 > h_full {
            return Err(Error::Dimension(format!(
                "reduced frame {}x{} exceeds {w_full}x{h_full}",
                reduced.0, reduced.1
            )));
        }
        if reduced.0 < MIN_REDUCED || reduced.1 < MIN_REDUCED {
            return Err(Error::Capacity(format!(
                "reduced frame {}x{} is below {MIN_REDUCED} px per axis",
                reduced.0, reduced.1
            )));
        }
        if !(reduction.is_finite() && reduction >= 1.0) {
            return Err(Error::Precondition(format!("reduction {reduction} must be at least 1")));
        }
        if !(fovea_radius.is_finite() && fovea_radius >= 0.0) {
            return Err(Error::Precondition(format!("fovea radius {fovea_radius}")));
        }
        let in_axis = |g: f32, n: u32| g.is_finite() && g >= 0.0 && g <= n as f32;
        if !in_axis(gaze.0, w_full) || !in_axis(gaze.1, h_full) {
            return Err(Error::OutOfRange(format!(
                "gaze ({}, {}) outside {w_full}x{h_full}",
                gaze.0, gaze.1
            )));
        }
        let axis = |n: u32, m: u32, g: f32| {
            if n == m {
                AxisWarp::identity(n)
            } else {
                AxisWarp::build(n, m, g as f64, fovea_radius as f64)
            }
        };
        Ok(FoveaMapping {
            full,
            reduced,
            gaze,
            fovea_radius,
            reduction,
            axes: [axis(w_full, reduced.0, gaze.0), axis(h_full, reduced.1, gaze.1)],
        })
    }

    pub fn axis_x(&self) -> &AxisWarp {
        &self.axes[0]
    }

    pub fn axis_y(&self) -> &AxisWarp {
        &self.axes[1]
    }

    /// Number of rays the reduced frame marches.
    pub fn sample_count(&self) -> u64 {
        self.reduced.0 as u64 * self.reduced.1 as u64
    }

    /// Full-pixel rectangle `[x0, x1) x [y0, y1)` rendered at unit density.
    pub fn fovea_rect(&self) -> (u32, u32, u32, u32) {
        let (x, y) = (&self.axes[0], &self.axes[1]);
        (x.lo, y.lo, x.hi, y.hi)
    }

    pub fn in_fovea(&self, x: u32, y: u32) -> bool {
        let (x0, y0, x1, y1) = self.fovea_rect();
        (x0..x1).contains(&x) && (y0..y1).contains(&y)
    }

    /// Full-frame position of a reduced-frame point.
    pub fn map_to_full(&self, p: (f64, f64)) -> Result<(f64, f64)> {
        let (w, h) = self.reduced;
        check_point(p, w, h, "reduced")?;
        Ok((self.axes[0].to_full(p.0), self.axes[1].to_full(p.1)))
    }

    /// Reduced-frame position of a full-frame point.
    pub fn map_to_reduced(&self, p: (f64, f64)) -> Result<(f64, f64)> {
        let (w, h) = self.full;
        check_point(p, w, h, "full")?;
        Ok((self.axes[0].to_reduced(p.0), self.axes[1].to_reduced(p.1)))
    }

    /// Full-frame position traced for reduced pixel `(i, j)`.
    pub fn sample_position(&self, i: u32, j: u32) -> (f64, f64) {
        (
            self.axes[0].to_full(i as f64 + 0.5),
            self.axes[1].to_full(j as f64 + 0.5),
        )
    }
}

fn check_point(p: (f64, f64), w: u32, h: u32, space: &str) -> Result<()> {
    let ok = |v: f64, n: u32| v.is_finite() && (0.0..=n as f64).contains(&v);
    if ok(p.0, w) && ok(p.1, h) {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!(
            "point ({}, {}) outside the {w}x{h} {space} frame",
            p.0, p.1
        )))
    }
}
