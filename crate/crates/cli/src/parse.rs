//! Parsers for the comma-separated flag values.

use anatoview_core::mesh::Point;
use anatoview_core::render::{Camera, ClipPlane};
use anatoview_core::volume::{LabelKey, SegmentationHierarchy};

use crate::{CliError, CliResult};

pub fn floats(text: &str, what: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|s| {
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("{what}: {s:?} is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::usage(format!("{what}: {s:?} is not finite")))
            }
        })
        .collect()
}

/// `px,py,pz,nx,ny,nz`
pub fn clip(text: &str) -> CliResult<ClipPlane> {
    let v = floats(text, "--clip")?;
    let [px, py, pz, nx, ny, nz] = v[..] else {
        return Err(CliError::usage("--clip takes six numbers: px,py,pz,nx,ny,nz"));
    };
    ClipPlane::new(Point::new(px, py, pz), Point::new(nx, ny, nz))
        .map_err(|e| CliError::usage(format!("--clip: {e}")))
}

/// `px,py,pz,fx,fy,fz[,ux,uy,uz[,fov_degrees]]` applied on top of `base`.
pub fn camera(text: &str, base: &Camera) -> CliResult<Camera> {
    let v = floats(text, "--camera")?;
    if !matches!(v.len(), 6 | 9 | 10) {
        return Err(CliError::usage(
            "--camera takes px,py,pz,fx,fy,fz with optional ux,uy,uz and fov in degrees",
        ));
    }
    let mut cam = base.clone();
    cam.position = Point::new(v[0], v[1], v[2]);
    cam.forward = Point::new(v[3], v[4], v[5]);
    if v.len() >= 9 {
        cam.up = Point::new(v[6], v[7], v[8]);
    }
    if v.len() == 10 {
        cam.vertical_fov = v[9].to_radians();
    }
    cam.validate().map_err(|e| CliError::usage(format!("--camera: {e}")))?;
    Ok(cam)
}

/// Comma-separated organs as `l1:l2` or names; `all` and `none` are
/// shorthands.
pub fn selection(text: &str, hierarchy: &SegmentationHierarchy) -> CliResult<Vec<LabelKey>> {
    match text.trim() {
        "all" => return Ok(hierarchy.keys().collect()),
        "none" | "" => return Ok(Vec::new()),
        _ => {}
    }
    let mut keys = Vec::new();
    for item in text.split(',').map(str::trim) {
        let key = match item.split_once(':') {
            Some((a, b)) => match (a.parse::<u8>(), b.parse::<u8>()) {
                (Ok(l1), Ok(l2)) => Some(LabelKey::new(l1, l2)),
                _ => None,
            },
            None => hierarchy.find_by_name(item).map(|e| e.key),
        };
        match key {
            Some(k) if hierarchy.contains(k) => keys.push(k),
            _ => {
                let valid: Vec<String> = hierarchy
                    .entries()
                    .iter()
                    .map(|e| format!("{} ({}:{})", e.name, e.key.l1, e.key.l2))
                    .collect();
                return Err(CliError::usage(format!(
                    "unknown organ {item:?}; valid organs: {}",
                    valid.join(", ")
                )));
            }
        }
    }
    Ok(keys)
}

/// Comma-separated slice indices.
pub fn slice_list(text: &str) -> CliResult<Vec<usize>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::usage(format!("--gaps: {s:?} is not a slice index")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hierarchy() -> SegmentationHierarchy {
        SegmentationHierarchy::parse("3,5,liver,#A0522DC0\n1,2,heart,#FF0000FF\n").unwrap()
    }

    #[test]
    fn selection_forms() {
        let h = hierarchy();
        assert_eq!(selection("all", &h).unwrap().len(), 2);
        assert!(selection("none", &h).unwrap().is_empty());
        assert_eq!(selection("heart, 3:5", &h).unwrap(), [LabelKey::new(1, 2), LabelKey::new(3, 5)]);
        let err = selection("spleen", &h).unwrap_err().to_string();
        assert!(err.contains("liver (3:5)") && err.contains("heart (1:2)"), "{err}");
        assert!(selection("9:9", &h).is_err());
    }

    #[test]
    fn clip_and_camera_shapes() {
        assert!(clip("1,2,3,0,0,2").unwrap().normal.z == 1.0);
        assert!(clip("1,2,3,0,0,0").is_err());
        assert!(clip("1,2,3").is_err());
        assert!(floats("1,nan", "x").is_err());
    }
}
