use std::collections::BTreeMap;

use super::scene::{Ray, SelectionSet};
use crate::mesh::{Bvh, MeshHit};
use crate::volume::LabelKey;

/// Stretch of a ray inside one organ's proxy surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub t_enter: f64,
    pub t_exit: f64,
    pub label: LabelKey,
}

/// Turns sorted crossings into inside stretches.
///
/// A ray starting inside sees more exits than entries; the surplus opens an
/// interval at `t = 0`. A stretch left open at the end runs to `t_far`.
pub fn pair_hits(hits: &[MeshHit], label: LabelKey, t_far: f64) -> Vec<Interval> {
    let exits = hits.iter().filter(|h| !h.entering).count() as i64;
    let mut depth = (2 * exits - hits.len() as i64).max(0);
    let mut out = Vec::new();
    let mut start = if depth > 0 { Some(0.0) } else { None };
    for h in hits {
        if h.entering {
            depth += 1;
            if depth == 1 {
                start = Some(h.t);
            }
        } else if depth > 0 {
            depth -= 1;
            if depth == 0 {
                if let Some(s) = start.take() {
                    out.push(Interval {
                        t_enter: s,
                        t_exit: h.t,
                        label,
                    });
                }
            }
        }
    }
    if let Some(s) = start {
        if s < t_far {
            out.push(Interval {
                t_enter: s,
                t_exit: t_far,
                label,
            });
        }
    }
    out
}

/// Intervals of every selected organ along a model-space ray, sorted by entry
/// and then by label. Unselected organs contribute nothing.
pub fn ray_intervals_for_selection(
    proxies: &BTreeMap<LabelKey, Bvh>,
    selection: &SelectionSet,
    ray: &Ray,
    t_far: f64,
) -> Vec<Interval> {
    let mut out = Vec::new();
    for key in selection.iter() {
        let Some(bvh) = proxies.get(&key) else { continue };
        if bvh.is_empty() {
            continue;
        }
        let hits = bvh
            .intersect(&ray.origin, &ray.direction)
            .expect("ray directions are normalized before marching");
        out.extend(pair_hits(&hits, key, t_far));
    }
    out.sort_by(|a, b| a.t_enter.total_cmp(&b.t_enter).then(a.label.cmp(&b.label)));
    out
}
