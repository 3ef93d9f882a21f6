use crate::error::{AccError, Result};
use crate::imaging::GrayPlane;

/// Pixel displacement `(dx, dy)`: the partner of `(x, y)` is `(x + dx, y + dy)`.
pub type Offset = (isize, isize);

/// The four unit-distance directions used for channel selection
/// (0, 45, 90 and 135 degrees, with y pointing down).
pub const SELECTION_OFFSETS: [Offset; 4] = [(1, 0), (1, -1), (0, -1), (-1, -1)];

/// Normalized gray-level co-occurrence matrix for one offset.
///
/// Ordered pairs are counted; the matrix is not symmetrized.
#[derive(Debug, Clone, PartialEq)]
pub struct GlcmMatrix {
    levels: usize,
    offset: Offset,
    probs: Vec<f64>,
    pairs: usize,
}

impl GlcmMatrix {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn offset(&self) -> Offset {
        self.offset
    }

    /// Number of pixel pairs that were counted.
    pub fn pairs(&self) -> usize {
        self.pairs
    }

    /// Relative frequency of (reference level `i`, partner level `j`), 0-based.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.levels + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
}

/// Uniform quantization of `[min, max]` into `levels` bins (0-based):
/// the minimum maps to bin 0 and the maximum to bin `levels - 1`.
/// A constant plane maps entirely to bin 0.
pub fn quantize(plane: &GrayPlane, levels: usize) -> Vec<usize> {
    let (lo, hi) = plane.min_max();
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![0; plane.len()];
    }
    let scale = levels as f64 / span;
    plane
        .as_slice()
        .iter()
        .map(|&v| (((v - lo) * scale) as usize).min(levels - 1))
        .collect()
}

pub fn glcm(plane: &GrayPlane, offset: Offset, levels: usize) -> Result<GlcmMatrix> {
    if levels < 2 {
        return Err(AccError::Parameter(format!(
            "GLCM needs at least 2 gray levels, got {levels}"
        )));
    }
    let q = quantize(plane, levels);
    let (w, h) = (plane.width() as isize, plane.height() as isize);
    let (dx, dy) = offset;
    let mut counts = vec![0u64; levels * levels];
    let mut pairs = 0usize;
    let (x0, x1) = (0.max(-dx), w.min(w - dx));
    let (y0, y1) = (0.max(-dy), h.min(h - dy));
    for y in y0..y1 {
        for x in x0..x1 {
            let i = q[(y * w + x) as usize];
            let j = q[((y + dy) * w + x + dx) as usize];
            counts[i * levels + j] += 1;
            pairs += 1;
        }
    }
    let probs = if pairs == 0 {
        vec![0.0; levels * levels]
    } else {
        counts.iter().map(|&c| c as f64 / pairs as f64).collect()
    };
    Ok(GlcmMatrix {
        levels,
        offset,
        probs,
        pairs,
    })
}

/// Haralick contrast `sum |i - j|^2 p(i, j)`.
pub fn glcm_contrast(g: &GlcmMatrix) -> f64 {
    let n = g.levels;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = i as f64 - j as f64;
            total += d * d * g.probs[i * n + j];
        }
    }
    total
}
