//! From the selected PC plane to a set of colony conglomerations (blobs).

use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;

use crate::error::Result;
use crate::imaging::{gaussian_filter, minmax_normalize, BinaryMask, GrayPlane};
use crate::morphology::{
    connected_components, dilate, fill_holes, open_close_by_reconstruction, StructuringElement,
};

/// Removes the slowly varying background with an opening-closing by
/// reconstruction and returns the smoothed, normalised absolute residual.
///
/// A residual whose peak rises less than `min_contrast` (in plane units)
/// above its median holds nothing but noise and is returned as all zeros.
pub fn suppress_background(
    plane: &GrayPlane,
    r_obrcbr: usize,
    smooth: (f64, f64),
    half_extent: f64,
    min_contrast: f64,
) -> Result<GrayPlane> {
    let background = open_close_by_reconstruction(plane, &StructuringElement::disk(r_obrcbr))?;
    let residual = GrayPlane::from_vec(
        plane.width(),
        plane.height(),
        plane
            .as_slice()
            .iter()
            .zip(background.as_slice())
            .map(|(p, b)| (p - b).abs())
            .collect(),
    )?;
    let smoothed = gaussian_filter(&residual, smooth.0, smooth.1, half_extent)?;
    let mut sorted = smoothed.as_slice().to_vec();
    let mid = sorted.len() / 2;
    let median = *sorted.select_nth_unstable_by(mid, f64::total_cmp).1;
    if smoothed.min_max().1 - median < min_contrast {
        return Ok(smoothed.map(|_| 0.0));
    }
    Ok(minmax_normalize(&smoothed))
}

/// Neighbour order of the feature rows 2..9: N, NE, E, SE, S, SW, W, NW.
pub const FEATURE_NEIGHBORS: [(isize, isize); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

/// 9 x (M N) matrix whose i-th column holds pixel i followed by its eight
/// neighbours (replicate padding). Columns are produced on demand.
#[derive(Debug, Clone)]
pub struct PixelFeatureMatrix {
    plane: GrayPlane,
}

impl PixelFeatureMatrix {
    pub const ROWS: usize = 9;

    pub fn width(&self) -> usize {
        self.plane.width()
    }

    pub fn height(&self) -> usize {
        self.plane.height()
    }

    pub fn cols(&self) -> usize {
        self.plane.len()
    }

    pub fn column(&self, i: usize) -> [f64; 9] {
        let w = self.plane.width();
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        let mut col = [0.0; 9];
        col[0] = self.plane.as_slice()[i];
        for (k, &(dx, dy)) in FEATURE_NEIGHBORS.iter().enumerate() {
            col[k + 1] = self.plane.get_clamped(x + dx, y + dy);
        }
        col
    }

    /// First row, i.e. the plane itself.
    pub fn center_row(&self) -> &[f64] {
        self.plane.as_slice()
    }
}

pub fn build_pixel_features(plane: &GrayPlane) -> PixelFeatureMatrix {
    PixelFeatureMatrix {
        plane: plane.clone(),
    }
}

pub const KMEANS_MAX_ITERATIONS: usize = 100;
const CHUNK: usize = 4096;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    /// Cluster index (0 or 1) per column.
    pub assignment: Vec<u8>,
    pub centroids: [[f64; 9]; 2],
    /// Number of centroid updates performed.
    pub iterations: usize,
    /// Objective after every assignment step, measured against the
    /// centroids used for that assignment.
    pub objective: Vec<f64>,
}

fn sq_dist(a: &[f64; 9], b: &[f64; 9]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Clone, Copy)]
struct Partial {
    sums: [[f64; 9]; 2],
    counts: [usize; 2],
    objective: f64,
    changed: usize,
}

impl Partial {
    fn zero() -> Self {
        Self {
            sums: [[0.0; 9]; 2],
            counts: [0; 2],
            objective: 0.0,
            changed: 0,
        }
    }

    fn add(&mut self, o: &Partial) {
        for c in 0..2 {
            for r in 0..9 {
                self.sums[c][r] += o.sums[c][r];
            }
            self.counts[c] += o.counts[c];
        }
        self.objective += o.objective;
        self.changed += o.changed;
    }
}

/// Two-class Lloyd iteration seeded at the all-zeros and all-ones vectors.
///
/// Ties in distance go to cluster 0. A cluster that loses all its columns
/// keeps its previous centroid. Partial sums are reduced in chunk order so
/// the result does not depend on the thread schedule.
pub fn kmeans_two_class(features: &PixelFeatureMatrix) -> KMeansResult {
    let n = features.cols();
    let mut centroids = [[0.0; 9], [1.0; 9]];
    let mut assignment = vec![u8::MAX; n];
    let mut objective = Vec::new();
    let mut iterations = 0;

    loop {
        let c = centroids;
        let partials: Vec<Partial> = assignment
            .par_chunks_mut(CHUNK)
            .enumerate()
            .map(|(ci, chunk)| {
                let mut p = Partial::zero();
                for (k, a) in chunk.iter_mut().enumerate() {
                    let col = features.column(ci * CHUNK + k);
                    let d0 = sq_dist(&col, &c[0]);
                    let d1 = sq_dist(&col, &c[1]);
                    let (cls, d) = if d1 < d0 { (1u8, d1) } else { (0u8, d0) };
                    if *a != cls {
                        p.changed += 1;
                        *a = cls;
                    }
                    p.objective += d;
                    let s = &mut p.sums[cls as usize];
                    for r in 0..9 {
                        s[r] += col[r];
                    }
                    p.counts[cls as usize] += 1;
                }
                p
            })
            .collect();
        let mut total = Partial::zero();
        for p in &partials {
            total.add(p);
        }
        objective.push(total.objective);
        if total.changed == 0 || iterations >= KMEANS_MAX_ITERATIONS {
            break;
        }
        for cls in 0..2 {
            if total.counts[cls] > 0 {
                let m = total.counts[cls] as f64;
                centroids[cls] = total.sums[cls].map(|s| s / m);
            }
        }
        iterations += 1;
    }

    KMeansResult {
        assignment,
        centroids,
        iterations,
        objective,
    }
}

/// Foreground mask from the two-class clustering: the cluster whose centroid
/// has the larger mean.
pub fn kmeans_blob_mask(features: &PixelFeatureMatrix) -> BinaryMask {
    let res = kmeans_two_class(features);
    mask_from_kmeans(features, &res)
}

pub fn mask_from_kmeans(features: &PixelFeatureMatrix, res: &KMeansResult) -> BinaryMask {
    let mean = |c: &[f64; 9]| c.iter().sum::<f64>() / 9.0;
    let fg = if mean(&res.centroids[1]) >= mean(&res.centroids[0]) {
        1
    } else {
        0
    };
    BinaryMask::from_vec(
        features.width(),
        features.height(),
        res.assignment.iter().map(|&a| a == fg).collect(),
    )
    .expect("shape preserved")
}

/// Pixel-rectangle `(x, y, w, h)`.
pub type BBox = (usize, usize, usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    /// 1-based, raster order of the blob's first pixel.
    pub id: u32,
    /// Support cropped to `bbox`.
    pub mask: BinaryMask,
    pub area: usize,
    pub circularity: f64,
    pub bbox: BBox,
}

impl Blob {
    /// Builds a blob from the pixels of `region` (indices into a `width`-wide image).
    pub fn from_pixels(id: u32, region: &[usize], width: usize) -> Blob {
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for &i in region {
            let (x, y) = (i % width, i / width);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        let (bw, bh) = (x1 - x0 + 1, y1 - y0 + 1);
        let mut mask = BinaryMask::filled(bw, bh, false);
        for &i in region {
            mask.set(i % width - x0, i / width - y0, true);
        }
        Blob {
            id,
            circularity: circularity(&mask),
            area: region.len(),
            mask,
            bbox: (x0, y0, bw, bh),
        }
    }

    /// Whether image pixel `(x, y)` belongs to the blob.
    pub fn contains(&self, x: usize, y: usize) -> bool {
        let (bx, by, bw, bh) = self.bbox;
        x >= bx && y >= by && x < bx + bw && y < by + bh && *self.mask.get(x - bx, y - by)
    }
}

// Clockwise ring starting west (y grows downwards).
const RING: [(isize, isize); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn ring_index(d: (isize, isize)) -> usize {
    RING.iter().position(|&r| r == d).expect("unit offset")
}

/// Length of the outer boundary of the 8-connected component that starts at
/// raster index `start`, traced with Moore's neighbour algorithm. Axis steps
/// count 1, diagonal steps sqrt(2).
fn trace_perimeter(mask: &BinaryMask, start: usize) -> f64 {
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    let fg = |x: isize, y: isize| x >= 0 && y >= 0 && x < w && y < h && *mask.get(x as usize, y as usize);
    let s = ((start as isize) % w, (start as isize) / w);
    let mut c = s;
    // the west neighbour of the first raster pixel is background
    let mut back = 0usize;
    let mut first_dir: Option<usize> = None;
    let mut length = 0.0;
    // upper bound on steps: each boundary pixel is left at most 4 times
    let limit = 4 * (w * h) as usize + 8;
    for _ in 0..limit {
        let mut next = None;
        for k in 1..=8 {
            let d = (back + k) % 8;
            let (dx, dy) = RING[d];
            if fg(c.0 + dx, c.1 + dy) {
                next = Some((d, (back + k - 1) % 8));
                break;
            }
        }
        let Some((d, prev)) = next else {
            return 0.0;
        };
        if c == s {
            match first_dir {
                Some(fd) if fd == d => break,
                None => first_dir = Some(d),
                _ => {}
            }
        }
        let (dx, dy) = RING[d];
        let p = (c.0 + dx, c.1 + dy);
        let q = (c.0 + RING[prev].0, c.1 + RING[prev].1);
        back = ring_index((q.0 - p.0, q.1 - p.1));
        length += if dx != 0 && dy != 0 { SQRT_2 } else { 1.0 };
        c = p;
    }
    length
}

/// Sum of the outer boundary lengths of all 8-connected components.
pub fn perimeter(mask: &BinaryMask) -> f64 {
    let labels = connected_components(mask);
    labels
        .regions()
        .iter()
        .map(|r| trace_perimeter(mask, r[0]))
        .sum()
}

/// `4 pi A / P^2` clamped to `[0, 1]`; a mask without boundary length
/// (single pixel or empty) scores 1.
pub fn circularity(mask: &BinaryMask) -> f64 {
    let p = perimeter(mask);
    if p <= 0.0 {
        return 1.0;
    }
    (4.0 * PI * mask.count() as f64 / (p * p)).clamp(0.0, 1.0)
}

/// Dilation, hole filling and removal of components smaller than half the
/// minimum colony area.
pub fn postprocess_blobs(mask: &BinaryMask, a_min: f64, dilation_radius: usize) -> Vec<Blob> {
    let grown = if dilation_radius > 0 {
        dilate(mask, &StructuringElement::disk(dilation_radius))
    } else {
        mask.clone()
    };
    let filled = fill_holes(&grown);
    let labels = connected_components(&filled);
    let regions = labels.regions();
    let kept: Vec<&Vec<usize>> = regions
        .iter()
        .filter(|r| r.len() as f64 >= 0.5 * a_min)
        .collect();
    kept.par_iter()
        .enumerate()
        .map(|(k, r)| Blob::from_pixels(k as u32 + 1, r, mask.width()))
        .collect()
}

/// Paints blobs back into a full-size mask.
pub fn blobs_to_mask(blobs: &[Blob], width: usize, height: usize) -> BinaryMask {
    let mut out = BinaryMask::filled(width, height, false);
    for b in blobs {
        let (bx, by, bw, bh) = b.bbox;
        for y in 0..bh {
            for x in 0..bw {
                if *b.mask.get(x, y) {
                    out.set(bx + x, by + y, true);
                }
            }
        }
    }
    out
}
