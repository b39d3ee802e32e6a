//! Exact 2D Euclidean signed distance fields.

use crate::error::{Error, Result};
use crate::volume::LabelKey;

/// Row-major scalar field over a 2D pixel grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceField {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl DistanceField {
    pub fn constant(nx: usize, ny: usize, value: f64) -> Self {
        DistanceField {
            nx,
            ny,
            values: vec![value; nx * ny],
        }
    }

    pub fn from_values(nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if nx == 0 || ny == 0 || values.len() != nx * ny {
            return Err(Error::Dimension(format!(
                "{} values for a {nx}x{ny} field",
                values.len()
            )));
        }
        Ok(DistanceField { nx, ny, values })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[x + self.nx * y]
    }

    /// Bilinear interpolation at pixel-index coordinates, clamped to the grid.
    pub fn bilinear(&self, x: f64, y: f64) -> f64 {
        let cx = x.clamp(0.0, (self.nx - 1) as f64);
        let cy = y.clamp(0.0, (self.ny - 1) as f64);
        let x0 = (cx.floor() as usize).min(self.nx.saturating_sub(2));
        let y0 = (cy.floor() as usize).min(self.ny.saturating_sub(2));
        let x1 = (x0 + 1).min(self.nx - 1);
        let y1 = (y0 + 1).min(self.ny - 1);
        let fx = cx - x0 as f64;
        let fy = cy - y0 as f64;
        let top = self.at(x0, y0) * (1.0 - fx) + self.at(x1, y0) * fx;
        let bottom = self.at(x0, y1) * (1.0 - fx) + self.at(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// Signed distance field of one organ on one sparse slice.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedDistanceSlice {
    pub label: LabelKey,
    pub slice_index: usize,
    pub field: DistanceField,
}

/// Distance magnitude used for empty and full masks: the grid diagonal in mm.
pub fn sentinel_distance(nx: usize, ny: usize, pixel: [f64; 2]) -> f64 {
    ((nx as f64 * pixel[0]).powi(2) + (ny as f64 * pixel[1]).powi(2)).sqrt()
}

/// Signed distance (mm, negative inside) from every pixel center to the mask boundary.
///
/// The boundary sits halfway between inside and outside pixel centers: an
/// outside pixel stores its distance to the nearest inside pixel minus half a
/// pixel, an inside pixel the negated distance to the nearest outside pixel
/// minus half a pixel. All-outside masks map to `+sentinel`, all-inside masks
/// to `-sentinel`.
pub fn signed_distance_2d(
    mask: &[bool],
    nx: usize,
    ny: usize,
    pixel: [f64; 2],
) -> Result<DistanceField> {
    if nx == 0 || ny == 0 {
        return Err(Error::Dimension(format!("empty {nx}x{ny} mask")));
    }
    if mask.len() != nx * ny {
        return Err(Error::Dimension(format!(
            "mask has {} pixels, expected {}",
            mask.len(),
            nx * ny
        )));
    }
    if pixel.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::Dimension(format!("pixel size {pixel:?}")));
    }
    let large = sentinel_distance(nx, ny, pixel);
    let inside_count = mask.iter().filter(|&&m| m).count();
    if inside_count == 0 {
        return Ok(DistanceField::constant(nx, ny, large));
    }
    if inside_count == mask.len() {
        return Ok(DistanceField::constant(nx, ny, -large));
    }

    let to_inside = squared_edt(mask, nx, ny, pixel, true);
    let to_outside = squared_edt(mask, nx, ny, pixel, false);
    let half = 0.5 * pixel[0].min(pixel[1]);
    let values = mask
        .iter()
        .enumerate()
        .map(|(i, &inside)| {
            if inside {
                -(to_outside[i].sqrt() - half)
            } else {
                to_inside[i].sqrt() - half
            }
        })
        .collect();
    Ok(DistanceField { nx, ny, values })
}

/// Squared distance to the nearest pixel whose mask value equals `feature`.
fn squared_edt(mask: &[bool], nx: usize, ny: usize, pixel: [f64; 2], feature: bool) -> Vec<f64> {
    let mut grid: Vec<f64> = mask
        .iter()
        .map(|&m| if m == feature { 0.0 } else { f64::INFINITY })
        .collect();

    let mut buf = Envelope::with_capacity(nx.max(ny));
    let mut line = vec![0.0; nx.max(ny)];
    let mut out = vec![0.0; nx.max(ny)];

    for y in 0..ny {
        let row = &mut grid[y * nx..(y + 1) * nx];
        line[..nx].copy_from_slice(row);
        buf.transform(&line[..nx], pixel[0], &mut out[..nx]);
        row.copy_from_slice(&out[..nx]);
    }
    for x in 0..nx {
        for y in 0..ny {
            line[y] = grid[x + nx * y];
        }
        buf.transform(&line[..ny], pixel[1], &mut out[..ny]);
        for y in 0..ny {
            grid[x + nx * y] = out[y];
        }
    }
    grid
}

/// Lower envelope of parabolas for the 1D squared distance transform.
struct Envelope {
    vertices: Vec<usize>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Envelope {
            vertices: Vec::with_capacity(n),
            bounds: Vec::with_capacity(n + 1),
        }
    }

    /// `out[p] = min_q (s * (p - q))^2 + f[q]`
    fn transform(&mut self, f: &[f64], spacing: f64, out: &mut [f64]) {
        let n = f.len();
        self.vertices.clear();
        self.bounds.clear();
        let pos = |q: usize| q as f64 * spacing;

        for q in 0..n {
            if !f[q].is_finite() {
                continue;
            }
            loop {
                let Some(&v) = self.vertices.last() else {
                    self.vertices.push(q);
                    self.bounds.push(f64::NEG_INFINITY);
                    break;
                };
                let s = ((f[q] + pos(q) * pos(q)) - (f[v] + pos(v) * pos(v)))
                    / (2.0 * (pos(q) - pos(v)));
                if s <= *self.bounds.last().expect("paired with vertices") {
                    self.vertices.pop();
                    self.bounds.pop();
                } else {
                    self.vertices.push(q);
                    self.bounds.push(s);
                    break;
                }
            }
        }

        if self.vertices.is_empty() {
            out.fill(f64::INFINITY);
            return;
        }
        let mut k = 0;
        for (p, slot) in out.iter_mut().enumerate() {
            let x = pos(p);
            while k + 1 < self.vertices.len() && self.bounds[k + 1] < x {
                k += 1;
            }
            let v = self.vertices[k];
            let d = x - pos(v);
            *slot = d * d + f[v];
        }
    }
}
