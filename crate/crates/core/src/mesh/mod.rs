//! Per-organ surface meshes: extraction, smoothing, decimation and ray queries.

pub mod bvh;
pub mod decimate;
pub mod io;
pub mod marching;
pub mod taubin;

use std::collections::HashMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::volume::LabelKey;

pub use bvh::{point_in_mesh, ray_mesh_intersections, Bvh, MeshHit};
pub use decimate::decimate_mesh;
pub use marching::{extract_mesh, extract_proxy_mesh};
pub use taubin::taubin_smooth;

pub type Point = Vector3<f64>;

/// Indexed triangle mesh in millimeters, tagged with its organ.
///
/// Triangles are counter-clockwise seen from outside.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceMesh {
    pub label: LabelKey,
    pub vertices: Vec<Point>,
    pub triangles: Vec<[u32; 3]>,
}

/// Summary used in reports and tests.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct MeshStats {
    pub vertices: usize,
    pub triangles: usize,
    pub euler_characteristic: i64,
    pub components: usize,
    pub closed_manifold: bool,
    pub volume_mm3: f64,
}

impl SurfaceMesh {
    pub fn empty(label: LabelKey) -> Self {
        SurfaceMesh {
            label,
            vertices: Vec::new(),
            triangles: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Index range and degenerate-triangle check.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len() as u32;
        for (i, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= n) {
                return Err(Error::Topology(format!("triangle {i} indexes past {n} vertices")));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::Topology(format!("triangle {i} is degenerate: {t:?}")));
            }
        }
        Ok(())
    }

    /// Directed edge -> number of triangles using it in that direction.
    fn directed_edges(&self) -> HashMap<(u32, u32), u32> {
        let mut edges = HashMap::with_capacity(self.triangles.len() * 3);
        for t in &self.triangles {
            for k in 0..3 {
                *edges.entry((t[k], t[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        edges
    }

    /// Every edge borders exactly two triangles, traversed in opposite directions.
    pub fn check_closed_manifold(&self) -> Result<()> {
        self.validate()?;
        let directed = self.directed_edges();
        for (&(a, b), &count) in &directed {
            if count != 1 {
                return Err(Error::Topology(format!(
                    "edge {a}->{b} used {count} times in the same direction"
                )));
            }
            if directed.get(&(b, a)) != Some(&1) {
                return Err(Error::Topology(format!(
                    "edge {a}-{b} is open or inconsistently oriented"
                )));
            }
        }
        Ok(())
    }

    /// Edge-manifold with consistent orientation; open boundaries are allowed.
    pub fn check_manifold(&self) -> Result<()> {
        self.validate()?;
        for (&(a, b), &count) in &self.directed_edges() {
            if count != 1 {
                return Err(Error::Topology(format!(
                    "edge {a}->{b} used {count} times in the same direction"
                )));
            }
        }
        Ok(())
    }

    pub fn is_closed_manifold(&self) -> bool {
        self.check_closed_manifold().is_ok()
    }

    pub fn edge_count(&self) -> usize {
        let mut edges: Vec<(u32, u32)> = self
            .triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]))))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges.len()
    }

    /// `V - E + F`, counting only vertices referenced by some triangle.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &v in t {
                used[v as usize] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        v - self.edge_count() as i64 + self.triangles.len() as i64
    }

    /// Connected components over shared vertices.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.vertices.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for t in &self.triangles {
            let a = find(&mut parent, t[0] as usize);
            for &v in &t[1..] {
                let b = find(&mut parent, v as usize);
                parent[b] = a;
            }
        }
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for (i, t) in self.triangles.iter().enumerate() {
            let root = find(&mut parent, t[0] as usize);
            groups.entry(root).or_default().push(i);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        out.sort_by_key(|g| g[0]);
        out
    }

    /// Sub-mesh made of the given triangles, with vertices compacted.
    pub fn submesh(&self, triangles: &[usize]) -> SurfaceMesh {
        let mut remap = HashMap::new();
        let mut vertices = Vec::new();
        let mut tris = Vec::with_capacity(triangles.len());
        for &ti in triangles {
            let t = self.triangles[ti].map(|v| {
                *remap.entry(v).or_insert_with(|| {
                    vertices.push(self.vertices[v as usize]);
                    (vertices.len() - 1) as u32
                })
            });
            tris.push(t);
        }
        SurfaceMesh {
            label: self.label,
            vertices,
            triangles: tris,
        }
    }

    /// Enclosed volume by the divergence theorem; positive for outward orientation.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|v| self.vertices[v as usize]);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn bounds(&self) -> Option<(Point, Point)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), p| {
            (lo.inf(p), hi.sup(p))
        }))
    }

    pub fn face_normal(&self, tri: usize) -> Point {
        let [a, b, c] = self.triangles[tri].map(|v| self.vertices[v as usize]);
        (b - a).cross(&(c - a))
    }

    pub fn stats(&self) -> MeshStats {
        MeshStats {
            vertices: self.vertices.len(),
            triangles: self.triangles.len(),
            euler_characteristic: self.euler_characteristic(),
            components: self.components().len(),
            closed_manifold: self.is_closed_manifold(),
            volume_mm3: self.signed_volume(),
        }
    }

    /// Vertex adjacency lists (sorted, unique).
    pub(crate) fn neighbors(&self) -> Vec<Vec<u32>> {
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); self.vertices.len()];
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                adj[a as usize].push(b);
                adj[b as usize].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}
