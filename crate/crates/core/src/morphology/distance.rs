use rayon::prelude::*;

use crate::imaging::{BinaryMask, Raster};

/// Euclidean distance (pixel units) from each foreground pixel to the
/// nearest background pixel; zero on background.
pub type DistanceMap = Raster<f64>;

/// Exact squared Euclidean distance transform (Felzenszwalb–Huttenlocher).
///
/// Only pixels inside the image count as background. A mask without any
/// background pixel yields `+inf` everywhere.
pub fn squared_distance_transform(mask: &BinaryMask) -> Raster<f64> {
    let (w, h) = (mask.width(), mask.height());
    let m = mask.as_slice();

    // columns first
    let mut cols = vec![f64::INFINITY; w * h];
    let col_results: Vec<Vec<f64>> = (0..w)
        .into_par_iter()
        .map_init(LowerEnvelope::default, |env, x| {
            let f: Vec<f64> = (0..h)
                .map(|y| if m[y * w + x] { f64::INFINITY } else { 0.0 })
                .collect();
            env.transform(&f)
        })
        .collect();
    for (x, col) in col_results.into_iter().enumerate() {
        for (y, v) in col.into_iter().enumerate() {
            cols[y * w + x] = v;
        }
    }

    let rows: Vec<Vec<f64>> = cols
        .par_chunks(w)
        .map_init(LowerEnvelope::default, |env, row| env.transform(row))
        .collect();
    Raster::from_vec(w, h, rows.concat()).expect("shape preserved")
}

/// Exact Euclidean distance transform.
pub fn distance_transform(mask: &BinaryMask) -> DistanceMap {
    squared_distance_transform(mask).map(|&d| d.sqrt())
}

#[derive(Default)]
struct LowerEnvelope {
    sites: Vec<usize>,
    bounds: Vec<f64>,
}

impl LowerEnvelope {
    /// 1-D distance transform `d(q) = min_p f(p) + (q - p)^2`, skipping
    /// infinite samples entirely.
    fn transform(&mut self, f: &[f64]) -> Vec<f64> {
        let n = f.len();
        self.sites.clear();
        self.bounds.clear();
        for q in 0..n {
            if !f[q].is_finite() {
                continue;
            }
            let fq = f[q] + (q * q) as f64;
            loop {
                let Some(&p) = self.sites.last() else {
                    self.sites.push(q);
                    self.bounds.push(f64::NEG_INFINITY);
                    break;
                };
                let s = (fq - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
                if s <= *self.bounds.last().unwrap() {
                    self.sites.pop();
                    self.bounds.pop();
                } else {
                    self.sites.push(q);
                    self.bounds.push(s);
                    break;
                }
            }
        }
        if self.sites.is_empty() {
            return vec![f64::INFINITY; n];
        }
        let mut out = Vec::with_capacity(n);
        let mut k = 0;
        for q in 0..n {
            while k + 1 < self.sites.len() && self.bounds[k + 1] < q as f64 {
                k += 1;
            }
            let p = self.sites[k];
            let d = q as f64 - p as f64;
            out.push(f[p] + d * d);
        }
        out
    }
}
