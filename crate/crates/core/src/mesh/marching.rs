//! Marching cubes over a binary organ indicator.
//!
//! The 256-case table is generated rather than transcribed. For every cube
//! face the inside/outside crossings are paired with one fixed rule (inside
//! corners on an ambiguous face are cut off separately), so two cubes sharing
//! a face always agree on the contour segments of that face. Segments from the
//! six faces chain into closed loops, and each loop becomes a triangle fan.
//! Fan diagonals are never allowed to lie on a cube face; loops that would
//! need one get a center vertex instead. Together this makes every extracted
//! mesh a closed, consistently oriented 2-manifold.

use std::collections::HashMap;
use std::sync::OnceLock;

use super::{Point, SurfaceMesh};
use crate::volume::{LabelKey, LabeledVolume};

/// Corner `c` sits at offset `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
const fn corner_offset(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

/// Cube edges as `(low corner, axis)`; corners differ only along `axis`.
const EDGES: [(usize, usize); 12] = [
    (0, 0),
    (2, 0),
    (4, 0),
    (6, 0),
    (0, 1),
    (1, 1),
    (4, 1),
    (5, 1),
    (0, 2),
    (1, 2),
    (2, 2),
    (3, 2),
];

fn edge_between(a: usize, b: usize) -> usize {
    let (lo, hi) = (a.min(b), a.max(b));
    let axis = (hi ^ lo).trailing_zeros() as usize;
    EDGES
        .iter()
        .position(|&(c, ax)| c == lo && ax == axis)
        .expect("corners are adjacent")
}

/// Corner cycles of the six faces, counter-clockwise seen from outside the cube.
fn face_cycles() -> [[usize; 4]; 6] {
    let mut faces = [[0usize; 4]; 6];
    for axis in 0..3 {
        let u = (axis + 1) % 3;
        let v = (axis + 2) % 3;
        for side in 0..2 {
            let corner = |du: usize, dv: usize| (side << axis) | (du << u) | (dv << v);
            let mut cycle = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
            if side == 0 {
                cycle.reverse();
            }
            faces[2 * axis + side] = cycle;
        }
    }
    faces
}

/// One loop of cube-edge ids and how to triangulate it.
#[derive(Clone, Debug)]
struct CaseLoop {
    edges: Vec<u8>,
    /// `Some(start)`: fan from `edges[start]`; `None`: fan around a center vertex.
    fan_start: Option<usize>,
}

type CaseTable = Vec<Vec<CaseLoop>>;

fn case_table() -> &'static CaseTable {
    static TABLE: OnceLock<CaseTable> = OnceLock::new();
    TABLE.get_or_init(build_case_table)
}

fn build_case_table() -> CaseTable {
    let faces = face_cycles();
    let mut edge_faces = [[usize::MAX; 2]; 12];
    for (f, cycle) in faces.iter().enumerate() {
        for k in 0..4 {
            let e = edge_between(cycle[k], cycle[(k + 1) % 4]);
            let slot = if edge_faces[e][0] == usize::MAX { 0 } else { 1 };
            edge_faces[e][slot] = f;
        }
    }
    let share_face = |a: u8, b: u8| {
        edge_faces[a as usize]
            .iter()
            .any(|f| edge_faces[b as usize].contains(f))
    };

    (0..256usize)
        .map(|case| {
            let inside = |c: usize| case >> c & 1 == 1;
            let mut next = [u8::MAX; 12];
            for cycle in &faces {
                // Crossings in counter-clockwise order: (edge, is_exit).
                let crossings: Vec<(u8, bool)> = (0..4)
                    .filter_map(|k| {
                        let (a, b) = (cycle[k], cycle[(k + 1) % 4]);
                        (inside(a) != inside(b)).then(|| (edge_between(a, b) as u8, inside(a)))
                    })
                    .collect();
                // Each exit closes the inside run that began at the entry just before it.
                for (i, &(edge, is_exit)) in crossings.iter().enumerate() {
                    if is_exit {
                        let prev = crossings[(i + crossings.len() - 1) % crossings.len()];
                        debug_assert!(!prev.1);
                        next[edge as usize] = prev.0;
                    }
                }
            }

            let mut seen = [false; 12];
            let mut loops = Vec::new();
            for start in 0..12u8 {
                if next[start as usize] == u8::MAX || seen[start as usize] {
                    continue;
                }
                let mut edges = Vec::new();
                let mut e = start;
                while !seen[e as usize] {
                    seen[e as usize] = true;
                    edges.push(e);
                    e = next[e as usize];
                }
                debug_assert_eq!(e, start);
                let n = edges.len();
                let fan_start = (0..n).find(|&s| {
                    (2..n - 1).all(|k| !share_face(edges[s], edges[(s + k) % n]))
                });
                loops.push(CaseLoop { edges, fan_start });
            }
            loops
        })
        .collect()
}

/// Extracts the `iso` surface of `label`'s indicator field.
///
/// Vertices sit on grid edges at fraction `0.5 + iso_inset` from the inside
/// voxel center (`iso_inset = 0` is the exact midpoint; positive values move
/// the surface outward). An absent label yields an empty mesh.
pub fn extract_mesh(volume: &LabeledVolume, label: LabelKey, iso_inset: f64) -> SurfaceMesh {
    let dims = volume.dims();
    let labels = volume.labels();
    let indicator = |x: usize, y: usize, z: usize| {
        labels[x + dims[0] * (y + dims[1] * z)].organ() == Some(label)
    };
    let mut mesh = march(dims, volume.spacing(), label, iso_inset, &indicator);
    mesh.label = label;
    mesh
}

/// Surface of `label` dilated by one voxel (26-neighborhood).
///
/// The enclosed region covers the whole cell of every voxel carrying the label
/// with half a voxel to spare, so ray intervals against this mesh never miss a
/// sample whose nearest voxel belongs to the organ.
pub fn extract_proxy_mesh(volume: &LabeledVolume, label: LabelKey) -> SurfaceMesh {
    let [nx, ny, nz] = volume.dims();
    let mut base = vec![false; nx * ny * nz];
    for (slot, code) in base.iter_mut().zip(volume.labels()) {
        *slot = code.organ() == Some(label);
    }
    // Separable max filter along each axis gives the 3x3x3 dilation.
    let mut grid = base;
    for axis in 0..3 {
        let stride = [1, nx, nx * ny][axis];
        let len = [nx, ny, nz][axis];
        let src = grid.clone();
        for (i, slot) in grid.iter_mut().enumerate() {
            let c = (i / stride) % len;
            *slot = src[i] || (c > 0 && src[i - stride]) || (c + 1 < len && src[i + stride]);
        }
    }
    let dims = volume.dims();
    let indicator = |x: usize, y: usize, z: usize| grid[x + nx * (y + ny * z)];
    let mut mesh = march(dims, volume.spacing(), label, 0.0, &indicator);
    mesh.label = label;
    // The dilated region may touch the grid border; the padded march closes it
    // half a voxel outside.
    let _ = dims;
    mesh
}

fn march(
    dims: [usize; 3],
    spacing: [f64; 3],
    label: LabelKey,
    iso_inset: f64,
    indicator: &dyn Fn(usize, usize, usize) -> bool,
) -> SurfaceMesh {
    let mut mesh = SurfaceMesh::empty(label);

    // Bounding box of inside voxels.
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                if indicator(x, y, z) {
                    for (a, v) in [x, y, z].into_iter().enumerate() {
                        lo[a] = lo[a].min(v);
                        hi[a] = hi[a].max(v);
                    }
                }
            }
        }
    }
    if lo[0] == usize::MAX {
        return mesh;
    }

    let sample = |p: [i64; 3]| -> bool {
        (0..3).all(|a| p[a] >= 0 && (p[a] as usize) < dims[a])
            && indicator(p[0] as usize, p[1] as usize, p[2] as usize)
    };
    let frac = (0.5 + iso_inset).clamp(0.01, 0.99);
    let table = case_table();
    let mut edge_vertex: HashMap<([i64; 3], usize), u32> = HashMap::new();

    // Cube with low corner c spans grid points c..=c+1; c runs over lo-1..=hi.
    for cz in lo[2] as i64 - 1..=hi[2] as i64 {
        for cy in lo[1] as i64 - 1..=hi[1] as i64 {
            for cx in lo[0] as i64 - 1..=hi[0] as i64 {
                let base = [cx, cy, cz];
                let mut case = 0usize;
                for c in 0..8 {
                    let o = corner_offset(c);
                    if sample([cx + o[0] as i64, cy + o[1] as i64, cz + o[2] as i64]) {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                for lp in &table[case] {
                    let ids: Vec<u32> = lp
                        .edges
                        .iter()
                        .map(|&e| {
                            let (corner, axis) = EDGES[e as usize];
                            let o = corner_offset(corner);
                            let start = [base[0] + o[0] as i64, base[1] + o[1] as i64, base[2] + o[2] as i64];
                            *edge_vertex.entry((start, axis)).or_insert_with(|| {
                                let mut end = start;
                                end[axis] += 1;
                                let (inside, outside) =
                                    if sample(start) { (start, end) } else { (end, start) };
                                let t = frac;
                                let p = Point::new(
                                    (inside[0] as f64 + t * (outside[0] - inside[0]) as f64) * spacing[0],
                                    (inside[1] as f64 + t * (outside[1] - inside[1]) as f64) * spacing[1],
                                    (inside[2] as f64 + t * (outside[2] - inside[2]) as f64) * spacing[2],
                                );
                                mesh.vertices.push(p);
                                (mesh.vertices.len() - 1) as u32
                            })
                        })
                        .collect();
                    emit_loop(&mut mesh, &ids, lp.fan_start);
                }
            }
        }
    }
    mesh
}

fn emit_loop(mesh: &mut SurfaceMesh, ids: &[u32], fan_start: Option<usize>) {
    let n = ids.len();
    // Loops wind clockwise seen from outside; triangles are emitted reversed.
    match fan_start {
        Some(s) => {
            for k in 1..n - 1 {
                mesh.triangles
                    .push([ids[s], ids[(s + k + 1) % n], ids[(s + k) % n]]);
            }
        }
        None => {
            let center = ids
                .iter()
                .map(|&i| mesh.vertices[i as usize])
                .sum::<Point>()
                / n as f64;
            mesh.vertices.push(center);
            let c = (mesh.vertices.len() - 1) as u32;
            for k in 0..n {
                mesh.triangles.push([c, ids[(k + 1) % n], ids[k]]);
            }
        }
    }
}
