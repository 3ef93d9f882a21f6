use serde::{Deserialize, Serialize};

use crate::error::{AccError, Result};
use crate::imaging::GrayPlane;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClaheParams {
    pub tiles_x: usize,
    pub tiles_y: usize,
    /// Histogram bin cap as a fraction of the tile's pixel count.
    pub clip_limit: f64,
    pub bins: usize,
}

impl Default for ClaheParams {
    fn default() -> Self {
        Self {
            tiles_x: 16,
            tiles_y: 16,
            clip_limit: 0.008,
            bins: 256,
        }
    }
}

impl ClaheParams {
    /// Unlimited adaptive equalization (no clipping).
    pub fn unclipped(tiles_x: usize, tiles_y: usize) -> Self {
        Self {
            tiles_x,
            tiles_y,
            clip_limit: 1.0,
            bins: 256,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tiles_x == 0 || self.tiles_y == 0 {
            return Err(AccError::Parameter("CLAHE tile counts must be at least 1".into()));
        }
        if !(self.clip_limit > 0.0 && self.clip_limit <= 1.0) {
            return Err(AccError::Parameter(format!(
                "CLAHE clip limit must be in (0, 1], got {}",
                self.clip_limit
            )));
        }
        if self.bins < 2 {
            return Err(AccError::Parameter("CLAHE needs at least 2 histogram bins".into()));
        }
        Ok(())
    }
}

/// Bin index of a `[0, 1]` value.
#[inline]
pub(crate) fn bin_of(v: f64, bins: usize) -> usize {
    ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1)
}

/// Clips a histogram at `limit` and spreads the excess uniformly; whatever
/// the spreading pushes back over the limit is clipped once more and handed
/// to the bins that still have room.
pub(crate) fn clip_histogram(hist: &mut [f64], limit: f64) {
    let bins = hist.len() as f64;
    let mut excess = 0.0;
    for h in hist.iter_mut() {
        if *h > limit {
            excess += *h - limit;
            *h = limit;
        }
    }
    if excess <= 0.0 {
        return;
    }
    let share = excess / bins;
    let mut residual = 0.0;
    for h in hist.iter_mut() {
        *h += share;
        if *h > limit {
            residual += *h - limit;
            *h = limit;
        }
    }
    let open = hist.iter().filter(|&&h| h < limit).count();
    if residual > 0.0 && open > 0 {
        let share = residual / open as f64;
        for h in hist.iter_mut().filter(|h| **h < limit) {
            *h += share;
        }
    }
}

/// Equalization transfer function evaluated at bin centres: the cumulative
/// mass below the bin plus half of the bin itself, normalised to `[0, 1]`.
pub(crate) fn equalization_map(hist: &[f64]) -> Vec<f64> {
    let total: f64 = hist.iter().sum();
    let mut acc = 0.0;
    hist.iter()
        .map(|&h| {
            let v = if total > 0.0 { (acc + 0.5 * h) / total } else { 0.0 };
            acc += h;
            v
        })
        .collect()
}

fn tile_bounds(len: usize, tiles: usize) -> Vec<usize> {
    (0..=tiles).map(|i| i * len / tiles).collect()
}

/// Locates `pos` between tile centres: returns `(lower, upper, weight of upper)`.
fn interp_coords(pos: usize, centers: &[f64]) -> (usize, usize, f64) {
    let p = pos as f64;
    let last = centers.len() - 1;
    if p <= centers[0] {
        return (0, 0, 0.0);
    }
    if p >= centers[last] {
        return (last, last, 0.0);
    }
    let i = centers.partition_point(|&c| c <= p) - 1;
    let a = (p - centers[i]) / (centers[i + 1] - centers[i]);
    (i, i + 1, a)
}

/// Contrast-limited adaptive histogram equalization of a `[0, 1]` plane.
///
/// Per-tile clipped histograms are turned into equalization mappings which
/// are bilinearly blended between the four nearest tile centres.
pub fn clahe(plane: &GrayPlane, params: &ClaheParams) -> Result<GrayPlane> {
    params.validate()?;
    let (w, h) = (plane.width(), plane.height());
    if w / params.tiles_x < 2 || h / params.tiles_y < 2 {
        return Err(AccError::Parameter(format!(
            "CLAHE tiles of a {w}x{h} image on a {}x{} grid are smaller than 2x2",
            params.tiles_x, params.tiles_y
        )));
    }
    let bins = params.bins;
    let xb = tile_bounds(w, params.tiles_x);
    let yb = tile_bounds(h, params.tiles_y);

    let mut maps = Vec::with_capacity(params.tiles_x * params.tiles_y);
    for ty in 0..params.tiles_y {
        for tx in 0..params.tiles_x {
            let mut hist = vec![0.0; bins];
            for y in yb[ty]..yb[ty + 1] {
                for x in xb[tx]..xb[tx + 1] {
                    hist[bin_of(*plane.get(x, y), bins)] += 1.0;
                }
            }
            let pixels = ((xb[tx + 1] - xb[tx]) * (yb[ty + 1] - yb[ty])) as f64;
            let limit = (params.clip_limit * pixels).max(pixels / bins as f64);
            clip_histogram(&mut hist, limit);
            maps.push(equalization_map(&hist));
        }
    }

    let cx: Vec<f64> = xb.windows(2).map(|b| (b[0] + b[1] - 1) as f64 / 2.0).collect();
    let cy: Vec<f64> = yb.windows(2).map(|b| (b[0] + b[1] - 1) as f64 / 2.0).collect();
    let col_coords: Vec<_> = (0..w).map(|x| interp_coords(x, &cx)).collect();
    let tiles_x = params.tiles_x;
    let map_at = |tx: usize, ty: usize, b: usize| maps[ty * tiles_x + tx][b];

    let mut out = GrayPlane::filled(w, h, 0.0);
    for y in 0..h {
        let (y0, y1, ay) = interp_coords(y, &cy);
        for x in 0..w {
            let (x0, x1, ax) = col_coords[x];
            let b = bin_of(*plane.get(x, y), bins);
            let top = (1.0 - ax) * map_at(x0, y0, b) + ax * map_at(x1, y0, b);
            let bottom = (1.0 - ax) * map_at(x0, y1, b) + ax * map_at(x1, y1, b);
            out.set(x, y, ((1.0 - ay) * top + ay * bottom).clamp(0.0, 1.0));
        }
    }
    Ok(out)
}
