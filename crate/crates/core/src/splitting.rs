//! Splitting blobs into colonies: an extended-minima watershed is run for a
//! range of depths `h`, and the partition whose colonies look most plausible
//! under three fuzzy membership functions (area, circularity, expected count)
//! wins.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blobs::Blob;
use crate::error::{AccError, Result};
use crate::imaging::{BinaryMask, GrayPlane, Raster};
use crate::morphology::{
    dilate, distance_transform, extended_minima, fill_holes, marker_watershed, LabelMap,
    StructuringElement,
};

/// Edges of a pi-shaped membership function. A ramp may have zero width, in
/// which case it degenerates to a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuzzyPiParams {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub e4: f64,
}

impl FuzzyPiParams {
    pub fn new(e1: f64, e2: f64, e3: f64, e4: f64) -> Result<Self> {
        if !(e1 <= e2 && e2 <= e3 && e3 <= e4) || ![e1, e2, e3, e4].iter().all(|e| e.is_finite()) {
            return Err(AccError::Parameter(format!(
                "pi-shaped edges must satisfy e1 <= e2 <= e3 <= e4, got ({e1}, {e2}, {e3}, {e4})"
            )));
        }
        Ok(Self { e1, e2, e3, e4 })
    }
}

/// Spline-based pi-shaped membership: quadratic ramps up on `[e1, e2]` and
/// down on `[e3, e4]`, 1 in between, 0 outside.
pub fn fuzzy_pi(u: f64, p: &FuzzyPiParams) -> f64 {
    let FuzzyPiParams { e1, e2, e3, e4 } = *p;
    if u < e1 || u > e4 || u.is_nan() {
        return 0.0;
    }
    if u >= e2 && u <= e3 {
        return 1.0;
    }
    if u < e2 {
        let t = (u - e1) / (e2 - e1);
        if u <= (e1 + e2) / 2.0 {
            2.0 * t * t
        } else {
            let s = (u - e2) / (e2 - e1);
            1.0 - 2.0 * s * s
        }
    } else {
        let s = (u - e3) / (e4 - e3);
        if u <= (e3 + e4) / 2.0 {
            1.0 - 2.0 * s * s
        } else {
            let t = (u - e4) / (e4 - e3);
            2.0 * t * t
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegParams {
    pub h_min: f64,
    pub h_max: f64,
    pub h_step: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub circ_edges: [f64; 4],
    pub a_thresh_factor: f64,
    pub circ_split: f64,
    pub max_recursion_depth: usize,
}

impl Default for SegParams {
    fn default() -> Self {
        Self {
            h_min: 0.15,
            h_max: 0.37,
            h_step: 0.01,
            a_min: 40.0,
            a_max: 8000.0,
            circ_edges: [0.15, 0.5, 0.9, 1.0],
            a_thresh_factor: 0.6,
            circ_split: 0.6,
            max_recursion_depth: 5,
        }
    }
}

impl SegParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(AccError::Parameter(m));
        if !(self.h_min > 0.0 && self.h_min < self.h_max) {
            return bad(format!("need 0 < h_min < h_max, got {} and {}", self.h_min, self.h_max));
        }
        if !(self.h_step > 0.0) {
            return bad(format!("h step must be positive, got {}", self.h_step));
        }
        if !(self.a_min >= 1.0 && self.a_min < self.a_max) {
            return bad(format!("need 1 <= a_min < a_max, got {} and {}", self.a_min, self.a_max));
        }
        let c = self.circ_edges;
        if !(0.0 <= c[0] && c[0] < c[1] && c[1] < c[2] && c[2] < c[3] && c[3] <= 1.0) {
            return bad(format!("circularity edges must satisfy 0 <= c1 < c2 < c3 < c4 <= 1, got {c:?}"));
        }
        if !(self.a_thresh_factor > 0.0) || !(self.circ_split > 0.0 && self.circ_split <= 1.0) {
            return bad("split thresholds must be positive".into());
        }
        Ok(())
    }

    /// Depth thresholds `h_min, h_min + dh, ..., h_max`.
    pub fn h_values(&self) -> Vec<f64> {
        let n = ((self.h_max - self.h_min) / self.h_step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.h_min + i as f64 * self.h_step).collect()
    }

    pub fn area_edges(&self) -> FuzzyPiParams {
        FuzzyPiParams {
            e1: 0.5 * self.a_min,
            e2: self.a_min,
            e3: (2.0 * self.a_min).max(self.a_max),
            e4: 2.0 * self.a_max,
        }
    }

    pub fn circ_params(&self) -> FuzzyPiParams {
        let c = self.circ_edges;
        FuzzyPiParams {
            e1: c[0],
            e2: c[1],
            e3: c[2],
            e4: c[3],
        }
    }

    /// Expected number of colonies in a blob of `blob_area` pixels.
    pub fn expected_count(blob_area: f64, median_area: f64) -> f64 {
        (blob_area / median_area).ceil().max(1.0)
    }

    pub fn count_edges(blob_area: f64, median_area: f64) -> FuzzyPiParams {
        let e = Self::expected_count(blob_area, median_area);
        FuzzyPiParams {
            e1: 1.0,
            e2: e,
            e3: 2.0 * e,
            e4: 3.0 * e - 1.0,
        }
    }

    pub fn a_thresh(&self, median_area: f64) -> f64 {
        self.a_thresh_factor * median_area
    }
}

/// Segmentation quality of a candidate partition: the mean over colonies of
/// area membership times circularity membership, times the count membership.
pub fn blob_quality(
    colonies: &[(usize, f64)],
    blob_area: usize,
    median_area: f64,
    params: &SegParams,
) -> f64 {
    if colonies.is_empty() {
        return 0.0;
    }
    let area = params.area_edges();
    let circ = params.circ_params();
    let mean = colonies
        .iter()
        .map(|&(a, c)| fuzzy_pi(a as f64, &area) * fuzzy_pi(c, &circ))
        .sum::<f64>()
        / colonies.len() as f64;
    let count = SegParams::count_edges(blob_area as f64, median_area);
    mean * fuzzy_pi(colonies.len() as f64, &count)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlobSegmentation {
    pub blob_id: u32,
    /// Selected depth of the top-level sweep; `None` when the blob was kept whole.
    pub h_opt: Option<f64>,
    /// Colonies within the blob's bounding box (label 0 = background or line).
    pub labels: LabelMap,
    pub bbox: (usize, usize, usize, usize),
    pub q: f64,
    /// `(area, circularity)` per colony, in label order.
    pub colonies: Vec<(usize, f64)>,
}

// room for the 3-pixel polarity ring and a background border for the distance map
const PAD: usize = 4;
const RING_WIDTH: usize = 3;

struct Window {
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
    image_width: usize,
}

impl Window {
    fn around(blob: &Blob, iw: usize, ih: usize) -> Self {
        let (bx, by, bw, bh) = blob.bbox;
        let x0 = bx.saturating_sub(PAD);
        let y0 = by.saturating_sub(PAD);
        let x1 = (bx + bw + PAD).min(iw);
        let y1 = (by + bh + PAD).min(ih);
        Window {
            x0,
            y0,
            w: x1 - x0,
            h: y1 - y0,
            image_width: iw,
        }
    }

    fn to_global(&self, local: usize) -> usize {
        (self.y0 + local / self.w) * self.image_width + self.x0 + local % self.w
    }

    fn blob_mask(&self, blob: &Blob) -> BinaryMask {
        BinaryMask::from_fn(self.w, self.h, |x, y| blob.contains(self.x0 + x, self.y0 + y))
    }
}

/// Partition of `blob` into colonies, each a list of global pixel indices.
struct Partition {
    h_opt: Option<f64>,
    colonies: Vec<Vec<usize>>,
}

fn colony_features(colonies: &[Vec<usize>], image_width: usize) -> Vec<(usize, f64)> {
    colonies
        .iter()
        .map(|c| {
            let b = Blob::from_pixels(0, c, image_width);
            (b.area, b.circularity)
        })
        .collect()
}

fn blob_pixels(blob: &Blob, image_width: usize) -> Vec<usize> {
    let (bx, by, bw, bh) = blob.bbox;
    let mut out = Vec::with_capacity(blob.area);
    for y in 0..bh {
        for x in 0..bw {
            if *blob.mask.get(x, y) {
                out.push((by + y) * image_width + bx + x);
            }
        }
    }
    out
}

/// One h-sweep over `blob` without recursion.
fn sweep(blob: &Blob, gray: &GrayPlane, median_area: f64, params: &SegParams) -> Result<Partition> {
    let iw = gray.width();
    let win = Window::around(blob, iw, gray.height());
    let mask = win.blob_mask(blob);
    let local = gray.crop(win.x0, win.y0, win.w, win.h);

    // colonies must be basins: flip when the blob is brighter than its rim
    let ring = dilate(&mask, &StructuringElement::disk(RING_WIDTH));
    let (mut inside, mut n_in, mut rim, mut n_rim) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..mask.len() {
        let v = local.as_slice()[i];
        if mask.as_slice()[i] {
            inside += v;
            n_in += 1;
        } else if ring.as_slice()[i] {
            rim += v;
            n_rim += 1;
        }
    }
    let invert = n_rim > 0 && inside / n_in as f64 > rim / n_rim as f64;
    // depths are measured against the blob's own intensity range
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut plane = local.map(|&v| if invert { 1.0 - v } else { v });
    for (v, &m) in plane.as_slice().iter().zip(mask.as_slice()) {
        if m {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    for (v, &m) in plane.as_mut_slice().iter_mut().zip(mask.as_slice()) {
        *v = if m { (*v - lo) / span } else { 2.0 };
    }

    let dist = distance_transform(&mask).map(|&d| -d);
    let hs = params.h_values();
    let candidates: Vec<Option<(f64, Vec<Vec<usize>>)>> = hs
        .par_iter()
        .map(|&h| -> Result<Option<(f64, Vec<Vec<usize>>)>> {
            let mut markers = extended_minima(&plane, h)?;
            for (m, &d) in markers.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                *m &= d;
            }
            let labels = marker_watershed(&dist, &markers, &mask)?;
            if labels.count() < 2 {
                return Ok(None);
            }
            let colonies: Vec<Vec<usize>> = labels
                .regions()
                .into_iter()
                .map(|r| r.into_iter().map(|i| win.to_global(i)).collect())
                .collect();
            let q = blob_quality(&colony_features(&colonies, iw), blob.area, median_area, params);
            Ok(Some((q, colonies)))
        })
        .collect::<Result<_>>()?;

    let whole = Partition {
        h_opt: None,
        colonies: vec![blob_pixels(blob, iw)],
    };
    let unsplit_q = blob_quality(&[(blob.area, blob.circularity)], blob.area, median_area, params);
    let mut best_q = unsplit_q;
    let mut best: Option<usize> = None;
    // ascending h with a strict comparison keeps the smallest h on ties, and
    // a split has to beat the whole blob
    for (k, c) in candidates.iter().enumerate() {
        if let Some((q, _)) = c {
            if *q > best_q {
                best_q = *q;
                best = Some(k);
            }
        }
    }
    Ok(match best {
        None => whole,
        Some(k) => {
            let (_, colonies) = candidates[k].clone().expect("scored candidate");
            Partition {
                h_opt: Some(hs[k]),
                colonies,
            }
        }
    })
}

fn needs_split(area: usize, circ: f64, median_area: f64, params: &SegParams) -> bool {
    area as f64 > params.a_thresh(median_area) && circ < params.circ_split
}

fn split_recursive(
    blob: &Blob,
    gray: &GrayPlane,
    median_area: f64,
    params: &SegParams,
    depth: usize,
) -> Result<Partition> {
    let iw = gray.width();
    if !needs_split(blob.area, blob.circularity, median_area, params) {
        return Ok(Partition {
            h_opt: None,
            colonies: vec![blob_pixels(blob, iw)],
        });
    }
    let part = sweep(blob, gray, median_area, params)?;
    if part.colonies.len() < 2 {
        return Ok(part);
    }
    let mut colonies = Vec::new();
    for c in part.colonies {
        let child = Blob::from_pixels(0, &c, iw);
        if depth < params.max_recursion_depth
            && needs_split(child.area, child.circularity, median_area, params)
        {
            colonies.extend(split_recursive(&child, gray, median_area, params, depth + 1)?.colonies);
        } else {
            colonies.push(c);
        }
    }
    Ok(Partition {
        h_opt: part.h_opt,
        colonies,
    })
}

/// Splits one blob. `gray` is the full enhanced grayscale plane in `[0, 1]`;
/// only the pixels on the blob are consulted for the basin markers.
///
/// Blobs that are small (`area <= a_thresh_factor * median_area`) or round
/// (`circularity >= circ_split`) are returned whole. Otherwise every depth
/// `h` yields a watershed candidate on the negated distance map, seeded by
/// the extended minima of the intensity, and the best-scoring candidate is
/// kept (smallest `h` on ties). Colonies that again meet the split condition
/// are processed the same way up to `max_recursion_depth`.
pub fn split_blob(
    blob: &Blob,
    gray: &GrayPlane,
    median_area: f64,
    params: &SegParams,
    depth: usize,
) -> Result<BlobSegmentation> {
    params.validate()?;
    let iw = gray.width();
    let part = split_recursive(blob, gray, median_area, params, depth)?;
    let (bx, by, bw, bh) = blob.bbox;
    let mut raster = Raster::filled(bw, bh, 0u32);
    for (k, c) in part.colonies.iter().enumerate() {
        for &i in c {
            raster.set(i % iw - bx, i / iw - by, k as u32 + 1);
        }
    }
    let labels = LabelMap::renumber(raster);
    let colonies: Vec<(usize, f64)> = labels
        .regions()
        .iter()
        .map(|r| {
            let b = Blob::from_pixels(0, r, bw);
            (b.area, b.circularity)
        })
        .collect();
    let q = blob_quality(&colonies, blob.area, median_area, params);
    Ok(BlobSegmentation {
        blob_id: blob.id,
        h_opt: part.h_opt,
        labels,
        bbox: blob.bbox,
        q,
        colonies,
    })
}

/// Median blob area (mean of the two central values for an even count).
pub fn median_area(blobs: &[Blob]) -> f64 {
    let mut a: Vec<usize> = blobs.iter().map(|b| b.area).collect();
    if a.is_empty() {
        return 0.0;
    }
    a.sort_unstable();
    let n = a.len();
    if n % 2 == 1 {
        a[n / 2] as f64
    } else {
        (a[n / 2 - 1] + a[n / 2]) as f64 / 2.0
    }
}

#[derive(Debug, Clone)]
pub struct ImageSegmentation {
    /// Union of the final colonies; watershed lines stay background.
    pub mask: BinaryMask,
    /// Colonies numbered in raster order of their first pixel.
    pub labels: LabelMap,
    pub blobs: Vec<BlobSegmentation>,
}

impl ImageSegmentation {
    pub fn colony_count(&self) -> usize {
        self.labels.count() as usize
    }
}

/// Splits every blob and assembles the colony label image. Colonies smaller
/// than half the minimum area are dropped and holes inside each colony are
/// filled.
pub fn segment_image(blobs: &[Blob], gray: &GrayPlane, params: &SegParams) -> Result<ImageSegmentation> {
    params.validate()?;
    let (w, h) = (gray.width(), gray.height());
    let med = median_area(blobs);
    let segs = blobs
        .par_iter()
        .map(|b| split_blob(b, gray, med, params, 0))
        .collect::<Result<Vec<_>>>()?;

    let mut raster = Raster::filled(w, h, 0u32);
    let mut next = 0u32;
    for s in &segs {
        let (bx, by, _, _) = s.bbox;
        for r in s.labels.regions() {
            if (r.len() as f64) < 0.5 * params.a_min {
                continue;
            }
            next += 1;
            let lw = s.labels.width();
            let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
            for &i in &r {
                let (x, y) = (bx + i % lw, by + i / lw);
                raster.set(x, y, next);
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
            let sub = raster.crop(x0, y0, x1 - x0 + 1, y1 - y0 + 1).map(|&l| l == next);
            let filled = fill_holes(&sub);
            for y in 0..filled.height() {
                for x in 0..filled.width() {
                    if *filled.get(x, y) && *raster.get(x0 + x, y0 + y) == 0 {
                        raster.set(x0 + x, y0 + y, next);
                    }
                }
            }
        }
    }
    let labels = LabelMap::renumber(raster);
    Ok(ImageSegmentation {
        mask: labels.foreground(),
        labels,
        blobs: segs,
    })
}
