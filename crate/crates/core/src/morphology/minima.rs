use std::collections::VecDeque;

use super::{for_each_neighbor, reconstruct_by_erosion, NEIGHBORS_8};
use crate::error::{AccError, Result};
use crate::imaging::{BinaryMask, GrayPlane};

/// Marks every 8-connected flat zone that has no strictly lower neighbour.
pub fn regional_minima(plane: &GrayPlane) -> BinaryMask {
    let (w, h) = (plane.width(), plane.height());
    let v = plane.as_slice();
    let mut out = vec![false; v.len()];
    let mut visited = vec![false; v.len()];
    let mut zone = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..v.len() {
        if visited[start] {
            continue;
        }
        let level = v[start];
        let mut is_min = true;
        zone.clear();
        visited[start] = true;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            zone.push(p);
            for_each_neighbor(p, w, h, &NEIGHBORS_8, |q| {
                let vq = v[q];
                if vq < level {
                    is_min = false;
                } else if vq == level && !visited[q] {
                    visited[q] = true;
                    queue.push_back(q);
                }
            });
        }
        if is_min {
            for &p in &zone {
                out[p] = true;
            }
        }
    }
    BinaryMask::from_vec(w, h, out).expect("shape preserved")
}

/// Extended-minima transform: regional minima of the reconstruction by
/// erosion of `plane + h` above `plane`. Only basins deeper than `h` survive.
pub fn extended_minima(plane: &GrayPlane, h: f64) -> Result<BinaryMask> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(AccError::Parameter(format!(
            "extended-minima depth must be positive, got {h}"
        )));
    }
    let raised = plane.map(|&v| v + h);
    let filled = reconstruct_by_erosion(&raised, plane)?;
    Ok(regional_minima(&filled))
}

/// Forces the marker pixels to be the only regional minima of `topography`
/// inside `domain`.
///
/// Marker pixels become `-inf`; every other domain pixel is raised to the
/// lowest level at which it can be reached from a marker. Pixels outside the
/// domain are set to `+inf`.
pub fn impose_minima(
    topography: &GrayPlane,
    markers: &BinaryMask,
    domain: &BinaryMask,
) -> Result<GrayPlane> {
    if !topography.same_shape(markers) || !topography.same_shape(domain) {
        return Err(AccError::Parameter(
            "topography, markers and domain must have identical dimensions".into(),
        ));
    }
    let (w, h) = (topography.width(), topography.height());
    let n = topography.len();
    let (t, m, d) = (topography.as_slice(), markers.as_slice(), domain.as_slice());
    let mut marker_img = Vec::with_capacity(n);
    let mut mask_img = Vec::with_capacity(n);
    for i in 0..n {
        if m[i] {
            marker_img.push(f64::NEG_INFINITY);
            mask_img.push(f64::NEG_INFINITY);
        } else if d[i] {
            marker_img.push(f64::INFINITY);
            mask_img.push(t[i]);
        } else {
            marker_img.push(f64::INFINITY);
            mask_img.push(f64::INFINITY);
        }
    }
    reconstruct_by_erosion(
        &GrayPlane::from_vec(w, h, marker_img)?,
        &GrayPlane::from_vec(w, h, mask_img)?,
    )
}
