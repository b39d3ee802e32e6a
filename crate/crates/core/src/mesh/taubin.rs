//! Taubin lambda/mu smoothing.

use super::{Point, SurfaceMesh};
use crate::error::{Error, Result};

pub const DEFAULT_ITERATIONS: usize = 20;
pub const DEFAULT_LAMBDA: f64 = 0.5;
pub const DEFAULT_MU: f64 = -0.53;

/// Runs `iterations` rounds of a shrinking umbrella step (`lambda_s`) followed
/// by an inflating one (`mu_s`). Boundary vertices of open meshes stay put.
///
/// Pass `mu_s = 0.0` for plain Laplacian smoothing.
pub fn taubin_smooth(
    mesh: &SurfaceMesh,
    iterations: usize,
    lambda_s: f64,
    mu_s: f64,
) -> Result<SurfaceMesh> {
    if lambda_s.is_nan() || lambda_s <= 0.0 {
        return Err(Error::Precondition(format!("lambda {lambda_s} must be > 0")));
    }
    if !(mu_s == 0.0 || mu_s < -lambda_s) {
        return Err(Error::Precondition(format!(
            "mu {mu_s} must be below -lambda ({}) or exactly 0",
            -lambda_s
        )));
    }
    mesh.check_manifold()?;

    let mut out = mesh.clone();
    if iterations == 0 {
        return Ok(out);
    }
    let neighbors = mesh.neighbors();
    let boundary = boundary_vertices(mesh);
    let mut scratch = out.vertices.clone();
    for _ in 0..iterations {
        for factor in [lambda_s, mu_s] {
            if factor == 0.0 {
                continue;
            }
            umbrella_step(&out.vertices, &mut scratch, &neighbors, &boundary, factor);
            std::mem::swap(&mut out.vertices, &mut scratch);
        }
    }
    Ok(out)
}

fn umbrella_step(
    src: &[Point],
    dst: &mut [Point],
    neighbors: &[Vec<u32>],
    boundary: &[bool],
    factor: f64,
) {
    for (i, (p, out)) in src.iter().zip(dst.iter_mut()).enumerate() {
        let adj = &neighbors[i];
        if adj.is_empty() || boundary[i] {
            *out = *p;
            continue;
        }
        let mean = adj.iter().map(|&j| src[j as usize]).sum::<Point>() / adj.len() as f64;
        *out = p + factor * (mean - p);
    }
}

fn boundary_vertices(mesh: &SurfaceMesh) -> Vec<bool> {
    let mut edges = std::collections::HashSet::new();
    for t in &mesh.triangles {
        for k in 0..3 {
            edges.insert((t[k], t[(k + 1) % 3]));
        }
    }
    let mut boundary = vec![false; mesh.vertices.len()];
    for &(a, b) in &edges {
        if !edges.contains(&(b, a)) {
            boundary[a as usize] = true;
            boundary[b as usize] = true;
        }
    }
    boundary
}
