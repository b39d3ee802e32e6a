//! Bounding-volume hierarchy for ray/mesh queries.

use super::{Point, SurfaceMesh};
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 4;

/// Hits closer than this (relative to the ray length scale) with the same
/// direction flag are one crossing reported by two triangles sharing an edge.
const MERGE_EPS: f64 = 1e-9;

/// One surface crossing along a ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshHit {
    pub t: f64,
    /// True when the ray passes from outside to inside.
    pub entering: bool,
}

#[derive(Clone, Debug)]
struct Node {
    lo: Point,
    hi: Point,
    /// Leaf: `start..start + count` into `order`. Interior: children at `start`, `start + 1`.
    start: u32,
    count: u32,
}

/// Immutable BVH over a mesh's triangles. Shareable across threads.
#[derive(Clone, Debug)]
pub struct Bvh {
    tris: Vec<[Point; 3]>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

impl Bvh {
    pub fn new(mesh: &SurfaceMesh) -> Self {
        let tris: Vec<[Point; 3]> = mesh
            .triangles
            .iter()
            .map(|t| t.map(|v| mesh.vertices[v as usize]))
            .collect();
        let mut bvh = Bvh {
            order: (0..tris.len() as u32).collect(),
            tris,
            nodes: Vec::new(),
        };
        if !bvh.tris.is_empty() {
            let centroids: Vec<Point> = bvh
                .tris
                .iter()
                .map(|[a, b, c]| (a + b + c) / 3.0)
                .collect();
            bvh.nodes.push(Node {
                lo: Point::zeros(),
                hi: Point::zeros(),
                start: 0,
                count: 0,
            });
            bvh.build(0, 0, bvh.tris.len(), &centroids);
        }
        bvh
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    pub fn bounds(&self) -> Option<(Point, Point)> {
        self.nodes.first().map(|n| (n.lo, n.hi))
    }

    fn build(&mut self, node: usize, start: usize, end: usize, centroids: &[Point]) {
        let mut lo = Point::repeat(f64::INFINITY);
        let mut hi = Point::repeat(f64::NEG_INFINITY);
        let mut clo = lo;
        let mut chi = hi;
        for &t in &self.order[start..end] {
            for p in &self.tris[t as usize] {
                lo = lo.inf(p);
                hi = hi.sup(p);
            }
            clo = clo.inf(&centroids[t as usize]);
            chi = chi.sup(&centroids[t as usize]);
        }
        self.nodes[node].lo = lo;
        self.nodes[node].hi = hi;
        if end - start <= LEAF_SIZE {
            self.nodes[node].start = start as u32;
            self.nodes[node].count = (end - start) as u32;
            return;
        }
        let axis = (chi - clo).imax();
        let mid = (start + end) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a as usize][axis].total_cmp(&centroids[b as usize][axis])
        });
        let left = self.nodes.len();
        let blank = Node {
            lo,
            hi,
            start: 0,
            count: 0,
        };
        self.nodes.push(blank.clone());
        self.nodes.push(blank);
        self.nodes[node].start = left as u32;
        self.nodes[node].count = 0;
        self.build(left, start, mid, centroids);
        self.build(left + 1, mid, end, centroids);
    }

    /// All crossings at `t >= 0`, sorted by `t`.
    pub fn intersect(&self, origin: &Point, direction: &Point) -> Result<Vec<MeshHit>> {
        check_direction(direction)?;
        let mut hits = Vec::new();
        if self.nodes.is_empty() {
            return Ok(hits);
        }
        let inv = direction.map(|d| 1.0 / d);
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if !slab_hit(&node.lo, &node.hi, origin, &inv) {
                continue;
            }
            if node.count > 0 {
                let s = node.start as usize;
                for &t in &self.order[s..s + node.count as usize] {
                    if let Some(hit) = ray_triangle(origin, direction, &self.tris[t as usize]) {
                        hits.push(hit);
                    }
                }
            } else {
                stack.push(node.start as usize);
                stack.push(node.start as usize + 1);
            }
        }
        hits.sort_by(|a, b| a.t.total_cmp(&b.t));
        let scale = MERGE_EPS * (1.0 + hits.last().map_or(0.0, |h| h.t));
        let mut merged: Vec<MeshHit> = Vec::with_capacity(hits.len());
        for h in hits {
            let duplicate = merged
                .iter()
                .rev()
                .take_while(|m| h.t - m.t <= scale)
                .any(|m| m.entering == h.entering);
            if !duplicate {
                merged.push(h);
            }
        }
        Ok(merged)
    }

    /// Inside test by counting signed crossings along a fixed skew direction.
    pub fn contains(&self, p: &Point) -> bool {
        let dir = Point::new(0.577, 0.408, 0.709).normalize();
        let hits = self.intersect(p, &dir).expect("direction is non-zero");
        let balance: i64 = hits.iter().map(|h| if h.entering { -1 } else { 1 }).sum();
        balance > 0
    }
}

fn check_direction(direction: &Point) -> Result<()> {
    let n = direction.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::Geometry(format!("invalid ray direction {direction:?}")));
    }
    Ok(())
}

fn slab_hit(lo: &Point, hi: &Point, origin: &Point, inv: &Point) -> bool {
    let mut t0 = 0.0f64;
    let mut t1 = f64::INFINITY;
    for a in 0..3 {
        let (mut near, mut far) = ((lo[a] - origin[a]) * inv[a], (hi[a] - origin[a]) * inv[a]);
        if near > far {
            std::mem::swap(&mut near, &mut far);
        }
        // NaN from 0 * inf means the origin lies on the slab plane of a parallel ray.
        if near.is_nan() || far.is_nan() {
            if origin[a] < lo[a] || origin[a] > hi[a] {
                return false;
            }
            continue;
        }
        t0 = t0.max(near);
        t1 = t1.min(far * (1.0 + 4.0 * f64::EPSILON));
        if t0 > t1 {
            return false;
        }
    }
    true
}

/// Moller-Trumbore with closed barycentric bounds, so a ray through a shared
/// edge reports both triangles; `Bvh::intersect` merges the pair.
fn ray_triangle(origin: &Point, dir: &Point, [a, b, c]: &[Point; 3]) -> Option<MeshHit> {
    let e1 = b - a;
    let e2 = c - a;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    let scale = e1.norm() * e2.norm() * dir.norm();
    if det.abs() <= 1e-12 * scale {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    if t < 0.0 {
        return None;
    }
    // Outward normal e1 x e2 faces against the ray when entering.
    Some(MeshHit { t, entering: det > 0.0 })
}

/// Sorted crossings of a ray with `mesh`. Builds a throwaway BVH; renderers
/// should keep a [`Bvh`] per mesh instead.
pub fn ray_mesh_intersections(
    mesh: &SurfaceMesh,
    origin: &Point,
    direction: &Point,
) -> Result<Vec<MeshHit>> {
    check_direction(direction)?;
    Bvh::new(mesh).intersect(origin, direction)
}

/// Point-in-mesh by ray parity; `mesh` must be closed.
pub fn point_in_mesh(mesh: &SurfaceMesh, p: &Point) -> bool {
    Bvh::new(mesh).contains(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::testing::{icosphere, merge};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn through_center() {
        let m = icosphere(Point::new(1.0, 2.0, 3.0), 5.0, 3);
        let hits = ray_mesh_intersections(&m, &Point::new(-20.0, 2.0, 3.0), &Point::x()).unwrap();
        assert_eq!(hits.len(), 2);
        assert!(hits[0].entering && !hits[1].entering);
        assert!((hits[1].t - hits[0].t - 10.0).abs() < 0.2);
    }

    #[test]
    fn miss_is_empty() {
        let m = icosphere(Point::zeros(), 1.0, 2);
        let hits = ray_mesh_intersections(&m, &Point::new(0.0, 5.0, 0.0), &Point::x()).unwrap();
        assert!(hits.is_empty());
        let hits = ray_mesh_intersections(&m, &Point::new(5.0, 0.0, 0.0), &Point::x()).unwrap();
        assert!(hits.is_empty());
    }

    #[test]
    fn two_spheres_alternate() {
        let m = merge(
            &icosphere(Point::zeros(), 2.0, 2),
            &icosphere(Point::new(10.0, 0.0, 0.0), 3.0, 2),
        );
        let hits = ray_mesh_intersections(&m, &Point::new(-5.0, 0.1, 0.05), &Point::x()).unwrap();
        let flags: Vec<bool> = hits.iter().map(|h| h.entering).collect();
        assert_eq!(flags, [true, false, true, false]);
    }

    #[test]
    fn origin_inside_sees_only_exit() {
        let m = icosphere(Point::zeros(), 2.0, 2);
        let hits = ray_mesh_intersections(&m, &Point::zeros(), &Point::new(0.3, -0.2, 1.0)).unwrap();
        assert_eq!(hits.len(), 1);
        assert!(!hits[0].entering);
    }

    #[test]
    fn zero_direction_rejected() {
        let m = icosphere(Point::zeros(), 1.0, 0);
        assert!(matches!(
            ray_mesh_intersections(&m, &Point::zeros(), &Point::zeros()),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn through_vertices_and_edges() {
        // Octahedron: axis rays pass exactly through vertices, diagonal rays through edges.
        let m = SurfaceMesh {
            label: crate::volume::LabelKey::new(1, 1),
            vertices: vec![
                Point::x(),
                -Point::x(),
                Point::y(),
                -Point::y(),
                Point::z(),
                -Point::z(),
            ],
            triangles: vec![
                [0, 2, 4],
                [2, 1, 4],
                [1, 3, 4],
                [3, 0, 4],
                [2, 0, 5],
                [1, 2, 5],
                [3, 1, 5],
                [0, 3, 5],
            ],
        };
        m.check_closed_manifold().unwrap();
        assert!(m.signed_volume() > 0.0);
        for dir in [Point::x(), Point::new(1.0, 1.0, 0.0), Point::new(0.0, 1.0, 1.0)] {
            let hits = ray_mesh_intersections(&m, &(-3.0 * dir), &dir).unwrap();
            assert_eq!(hits.len(), 2, "{dir:?}: {hits:?}");
            assert!(hits[0].entering && !hits[1].entering);
        }
    }

    #[test]
    fn random_rays_hit_even() {
        let m = merge(
            &icosphere(Point::zeros(), 2.0, 3),
            &icosphere(Point::new(5.0, 1.0, 0.0), 1.5, 2),
        );
        let bvh = Bvh::new(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let o = Point::new(
                rng.random_range(-12.0..12.0),
                rng.random_range(-12.0..12.0),
                rng.random_range(-12.0..12.0),
            );
            let o = o.normalize() * 12.0;
            let target = Point::new(
                rng.random_range(-2.0..6.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let hits = bvh.intersect(&o, &(target - o)).unwrap();
            assert_eq!(hits.len() % 2, 0, "{hits:?}");
            assert!(hits.windows(2).all(|w| w[0].t <= w[1].t));
            for (i, h) in hits.iter().enumerate() {
                assert_eq!(h.entering, i % 2 == 0);
            }
        }
    }
}
