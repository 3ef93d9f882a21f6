use std::collections::VecDeque;

use rayon::prelude::*;

use super::{SeShape, StructuringElement};
use crate::error::{AccError, Result};
use crate::imaging::GrayPlane;

/// Grayscale erosion by a flat element. Samples outside the image are ignored.
pub fn erode_gray(plane: &GrayPlane, se: &StructuringElement) -> GrayPlane {
    rank_filter(plane, se, f64::INFINITY, f64::min)
}

/// Grayscale dilation by a flat element. Samples outside the image are ignored.
pub fn dilate_gray(plane: &GrayPlane, se: &StructuringElement) -> GrayPlane {
    rank_filter(plane, se, f64::NEG_INFINITY, f64::max)
}

// The element is decomposed into horizontal segments, one per row offset;
// each segment is a 1-D running extremum (van Herk / Gil-Werman).
fn rank_filter(
    plane: &GrayPlane,
    se: &StructuringElement,
    pad: f64,
    op: fn(f64, f64) -> f64,
) -> GrayPlane {
    let (w, h) = (plane.width(), plane.height());
    let r = se.radius as isize;
    let src = plane.as_slice();
    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map_init(RunningExtremum::default, |scratch, y| {
            let mut out = vec![pad; w];
            for dy in -r..=r {
                let sy = y as isize + dy;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                let half = match se.shape {
                    SeShape::Square => se.radius,
                    SeShape::Disk => se.half_width(dy),
                };
                let row = &src[sy as usize * w..(sy as usize + 1) * w];
                scratch.apply(row, half, pad, op);
                for (o, v) in out.iter_mut().zip(&scratch.out) {
                    *o = op(*o, *v);
                }
            }
            out
        })
        .collect();
    GrayPlane::from_vec(w, h, rows.concat()).expect("shape preserved")
}

#[derive(Default)]
struct RunningExtremum {
    padded: Vec<f64>,
    fwd: Vec<f64>,
    bwd: Vec<f64>,
    out: Vec<f64>,
}

impl RunningExtremum {
    fn apply(&mut self, row: &[f64], half: usize, pad: f64, op: fn(f64, f64) -> f64) {
        let n = row.len();
        self.out.clear();
        if half == 0 {
            self.out.extend_from_slice(row);
            return;
        }
        let k = 2 * half + 1;
        let len = n + 2 * half;
        // round up to a whole number of blocks
        let blocks = len.div_ceil(k);
        let total = blocks * k;
        self.padded.clear();
        self.padded.resize(total, pad);
        self.padded[half..half + n].copy_from_slice(row);

        self.fwd.clear();
        self.fwd.resize(total, pad);
        self.bwd.clear();
        self.bwd.resize(total, pad);
        for b in 0..blocks {
            let start = b * k;
            let mut acc = pad;
            for i in start..start + k {
                acc = op(acc, self.padded[i]);
                self.fwd[i] = acc;
            }
            let mut acc = pad;
            for i in (start..start + k).rev() {
                acc = op(acc, self.padded[i]);
                self.bwd[i] = acc;
            }
        }
        // window for output x covers padded[x .. x + k)
        for x in 0..n {
            self.out.push(op(self.bwd[x], self.fwd[x + k - 1]));
        }
    }
}

/// Morphological reconstruction by dilation of `marker` under `mask`
/// (8-connectivity). The marker is first clipped to the mask.
pub fn reconstruct_by_dilation(marker: &GrayPlane, mask: &GrayPlane) -> Result<GrayPlane> {
    if !marker.same_shape(mask) {
        return Err(AccError::Parameter(
            "marker and mask must have identical dimensions".into(),
        ));
    }
    let (w, h) = (mask.width(), mask.height());
    let m = mask.as_slice();
    let mut j: Vec<f64> = marker
        .as_slice()
        .iter()
        .zip(m)
        .map(|(&a, &b)| a.min(b))
        .collect();

    // forward raster scan over the causal half-neighbourhood
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let mut v = j[i];
            if x > 0 {
                v = v.max(j[i - 1]);
            }
            if y > 0 {
                let up = i - w;
                v = v.max(j[up]);
                if x > 0 {
                    v = v.max(j[up - 1]);
                }
                if x + 1 < w {
                    v = v.max(j[up + 1]);
                }
            }
            j[i] = v.min(m[i]);
        }
    }

    let mut queue = VecDeque::new();
    let anti_causal = |x: usize, y: usize, f: &mut dyn FnMut(usize)| {
        let i = y * w + x;
        if x + 1 < w {
            f(i + 1);
        }
        if y + 1 < h {
            let dn = i + w;
            f(dn);
            if x > 0 {
                f(dn - 1);
            }
            if x + 1 < w {
                f(dn + 1);
            }
        }
    };
    for y in (0..h).rev() {
        for x in (0..w).rev() {
            let i = y * w + x;
            let mut v = j[i];
            anti_causal(x, y, &mut |q| v = v.max(j[q]));
            v = v.min(m[i]);
            j[i] = v;
            let mut enqueue = false;
            anti_causal(x, y, &mut |q| {
                if j[q] < v && j[q] < m[q] {
                    enqueue = true;
                }
            });
            if enqueue {
                queue.push_back(i);
            }
        }
    }

    while let Some(p) = queue.pop_front() {
        let jp = j[p];
        super::for_each_neighbor(p, w, h, &super::NEIGHBORS_8, |q| {
            if j[q] < jp && m[q] != j[q] {
                j[q] = jp.min(m[q]);
                queue.push_back(q);
            }
        });
    }
    GrayPlane::from_vec(w, h, j)
}

/// Morphological reconstruction by erosion of `marker` above `mask`
/// (8-connectivity). The marker is first raised to the mask.
pub fn reconstruct_by_erosion(marker: &GrayPlane, mask: &GrayPlane) -> Result<GrayPlane> {
    let neg_marker = marker.map(|v| -v);
    let neg_mask = mask.map(|v| -v);
    Ok(reconstruct_by_dilation(&neg_marker, &neg_mask)?.map(|v| -v))
}

/// Opening by reconstruction followed by closing by reconstruction.
///
/// Removes bright and then dark structures into which `se` does not fit while
/// leaving the contours of everything else intact.
pub fn open_close_by_reconstruction(
    plane: &GrayPlane,
    se: &StructuringElement,
) -> Result<GrayPlane> {
    if se.radius < 1 {
        return Err(AccError::Parameter(
            "structuring element radius must be at least 1".into(),
        ));
    }
    if se.radius > plane.width().min(plane.height()) {
        return Err(AccError::Parameter(format!(
            "structuring element radius {} exceeds image size {}x{}",
            se.radius,
            plane.width(),
            plane.height()
        )));
    }
    let eroded = erode_gray(plane, se);
    let opened = reconstruct_by_dilation(&eroded, plane)?;
    let dilated = dilate_gray(&opened, se);
    reconstruct_by_erosion(&dilated, &opened)
}
