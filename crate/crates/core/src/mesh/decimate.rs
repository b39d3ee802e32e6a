//! Quadric-error edge collapse.
//!
//! Collapses are refused when they would break the surface: the endpoints must
//! share exactly the two vertices opposite their edge (link condition), those
//! opposite vertices must keep degree three or more, and no surviving triangle
//! may flip or degenerate. Under these guards a closed 2-manifold stays one,
//! with its genus and component count unchanged.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{Matrix3, Matrix4, Vector4};

use super::{Point, SurfaceMesh};
use crate::error::{Error, Result};

#[derive(Debug)]
struct Candidate {
    cost: f64,
    a: u32,
    b: u32,
    stamps: (u32, u32),
    target: Point,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    // Reversed so the max-heap pops the cheapest collapse.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| (other.a, other.b).cmp(&(self.a, self.b)))
    }
}

struct State {
    pos: Vec<Point>,
    quadric: Vec<Matrix4<f64>>,
    faces: Vec<[u32; 3]>,
    face_alive: Vec<bool>,
    vertex_faces: Vec<Vec<u32>>,
    stamp: Vec<u32>,
    alive_faces: usize,
}

impl State {
    fn new(mesh: &SurfaceMesh) -> Self {
        let n = mesh.vertices.len();
        let mut quadric = vec![Matrix4::zeros(); n];
        let mut vertex_faces = vec![Vec::new(); n];
        for (f, t) in mesh.triangles.iter().enumerate() {
            let [a, b, c] = t.map(|v| mesh.vertices[v as usize]);
            let cross = (b - a).cross(&(c - a));
            let area2 = cross.norm();
            if area2 > 0.0 {
                let normal = cross / area2;
                let plane = Vector4::new(normal.x, normal.y, normal.z, -normal.dot(&a));
                let k = plane * plane.transpose() * (0.5 * area2);
                for &v in t {
                    quadric[v as usize] += k;
                }
            }
            for &v in t {
                vertex_faces[v as usize].push(f as u32);
            }
        }
        State {
            pos: mesh.vertices.clone(),
            quadric,
            faces: mesh.triangles.clone(),
            face_alive: vec![true; mesh.triangles.len()],
            vertex_faces,
            stamp: vec![0; n],
            alive_faces: mesh.triangles.len(),
        }
    }

    fn neighbors(&self, v: u32) -> Vec<u32> {
        let mut out: Vec<u32> = self.vertex_faces[v as usize]
            .iter()
            .flat_map(|&f| self.faces[f as usize])
            .filter(|&u| u != v)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn candidate(&self, a: u32, b: u32) -> Candidate {
        let (a, b) = (a.min(b), a.max(b));
        let q = self.quadric[a as usize] + self.quadric[b as usize];
        let cost = |p: &Point| {
            let h = Vector4::new(p.x, p.y, p.z, 1.0);
            (h.transpose() * q * h)[0].max(0.0)
        };
        let (pa, pb) = (self.pos[a as usize], self.pos[b as usize]);
        let mut options = vec![(pa + pb) * 0.5, pa, pb];
        let m: Matrix3<f64> = q.fixed_view::<3, 3>(0, 0).into();
        if m.determinant().abs() > 1e-12 * m.norm().powi(3).max(f64::MIN_POSITIVE) {
            if let Some(inv) = m.try_inverse() {
                let opt = -inv * q.fixed_view::<3, 1>(0, 3);
                // Only trust the optimum near the edge it came from.
                if (opt - (pa + pb) * 0.5).norm() <= 2.0 * (pa - pb).norm() {
                    options.insert(0, opt);
                }
            }
        }
        let (target, c) = options
            .into_iter()
            .map(|p| (p, cost(&p)))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("options are non-empty");
        Candidate {
            cost: c,
            a,
            b,
            stamps: (self.stamp[a as usize], self.stamp[b as usize]),
            target,
        }
    }

    fn collapse_allowed(&self, a: u32, b: u32, target: &Point) -> bool {
        let shared: Vec<u32> = self.vertex_faces[a as usize]
            .iter()
            .copied()
            .filter(|f| self.faces[*f as usize].contains(&b))
            .collect();
        if shared.len() != 2 {
            return false;
        }
        let na = self.neighbors(a);
        let nb = self.neighbors(b);
        let common: Vec<u32> = na.iter().copied().filter(|v| nb.binary_search(v).is_ok()).collect();
        if common.len() != 2 {
            return false;
        }
        for &o in &common {
            if self.neighbors(o).len() < 4 {
                return false;
            }
        }
        for &v in &[a, b] {
            for &f in &self.vertex_faces[v as usize] {
                let t = self.faces[f as usize];
                if t.contains(&a) && t.contains(&b) {
                    continue;
                }
                let old = t.map(|u| self.pos[u as usize]);
                let new = t.map(|u| if u == v { *target } else { self.pos[u as usize] });
                let n_old = (old[1] - old[0]).cross(&(old[2] - old[0]));
                let n_new = (new[1] - new[0]).cross(&(new[2] - new[0]));
                if n_new.norm() <= 1e-12 * n_old.norm() || n_old.dot(&n_new) <= 0.0 {
                    return false;
                }
            }
        }
        true
    }

    /// Merges `b` into `a` at `target`.
    fn collapse(&mut self, a: u32, b: u32, target: Point) {
        self.pos[a as usize] = target;
        let qb = self.quadric[b as usize];
        self.quadric[a as usize] += qb;
        for f in std::mem::take(&mut self.vertex_faces[b as usize]) {
            let t = &mut self.faces[f as usize];
            if t.contains(&a) {
                self.face_alive[f as usize] = false;
                self.alive_faces -= 1;
                for &u in t.iter() {
                    if u != b {
                        self.vertex_faces[u as usize].retain(|&g| g != f);
                    }
                }
            } else {
                for u in t.iter_mut() {
                    if *u == b {
                        *u = a;
                    }
                }
                self.vertex_faces[a as usize].push(f);
            }
        }
        self.stamp[a as usize] += 1;
        self.stamp[b as usize] += 1;
    }
}

/// Reduces a closed 2-manifold to at most `target_triangles` triangles, or as
/// far as the topology guards allow.
pub fn decimate_mesh(mesh: &SurfaceMesh, target_triangles: usize) -> Result<SurfaceMesh> {
    if target_triangles < 4 {
        return Err(Error::Precondition(format!(
            "target {target_triangles} below the 4-triangle minimum"
        )));
    }
    mesh.check_closed_manifold()?;
    if target_triangles >= mesh.triangles.len() {
        return Ok(mesh.clone());
    }

    let mut state = State::new(mesh);
    let mut heap = BinaryHeap::new();
    for t in &mesh.triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if a < b {
                heap.push(state.candidate(a, b));
            }
        }
    }

    while state.alive_faces > target_triangles {
        let Some(c) = heap.pop() else { break };
        if c.stamps != (state.stamp[c.a as usize], state.stamp[c.b as usize])
            || state.vertex_faces[c.b as usize].is_empty()
            || !state.collapse_allowed(c.a, c.b, &c.target)
        {
            continue;
        }
        state.collapse(c.a, c.b, c.target);
        for n in state.neighbors(c.a) {
            heap.push(state.candidate(c.a, n));
        }
    }

    let mut remap = vec![u32::MAX; state.pos.len()];
    let mut out = SurfaceMesh::empty(mesh.label);
    for (f, t) in state.faces.iter().enumerate() {
        if !state.face_alive[f] {
            continue;
        }
        let t = t.map(|v| {
            if remap[v as usize] == u32::MAX {
                remap[v as usize] = out.vertices.len() as u32;
                out.vertices.push(state.pos[v as usize]);
            }
            remap[v as usize]
        });
        out.triangles.push(t);
    }
    Ok(out)
}
