//! Grayscale and binary morphology: reconstruction, regional and extended
//! minima, exact Euclidean distance transform, marker-controlled watershed,
//! connected components and a few binary utilities.
//!
//! Grayscale reconstruction, minima detection and labeling use
//! 8-connectivity. Hole filling uses 4-connectivity for the background.

mod binary;
mod distance;
mod grey;
mod label;
mod minima;
mod watershed;

pub use binary::{dilate, fill_holes};
pub use distance::{distance_transform, squared_distance_transform, DistanceMap};
pub use grey::{
    dilate_gray, erode_gray, open_close_by_reconstruction, reconstruct_by_dilation,
    reconstruct_by_erosion,
};
pub use label::{connected_components, LabelMap};
pub use minima::{extended_minima, impose_minima, regional_minima};
pub use watershed::marker_watershed;

/// 8-neighbourhood offsets `(dx, dy)`.
pub(crate) const NEIGHBORS_8: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

pub(crate) const NEIGHBORS_4: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];

/// Calls `f(neighbor_index)` for every in-bounds neighbour of pixel `idx`.
#[inline]
pub(crate) fn for_each_neighbor(
    idx: usize,
    width: usize,
    height: usize,
    offsets: &[(isize, isize)],
    mut f: impl FnMut(usize),
) {
    let x = (idx % width) as isize;
    let y = (idx / width) as isize;
    for &(dx, dy) in offsets {
        let nx = x + dx;
        let ny = y + dy;
        if nx >= 0 && ny >= 0 && (nx as usize) < width && (ny as usize) < height {
            f(ny as usize * width + nx as usize);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeShape {
    Disk,
    Square,
}

/// Flat structuring element centred on the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructuringElement {
    pub shape: SeShape,
    pub radius: usize,
}

impl StructuringElement {
    /// All offsets with Euclidean norm at most `radius`.
    pub fn disk(radius: usize) -> Self {
        Self {
            shape: SeShape::Disk,
            radius,
        }
    }

    pub fn square(radius: usize) -> Self {
        Self {
            shape: SeShape::Square,
            radius,
        }
    }

    /// Horizontal half-width of the element on row `dy`.
    pub fn half_width(&self, dy: isize) -> usize {
        let r = self.radius as i64;
        let dy = dy.unsigned_abs() as i64;
        debug_assert!(dy <= r);
        match self.shape {
            SeShape::Square => self.radius,
            SeShape::Disk => {
                let rem = r * r - dy * dy;
                let mut w = (rem as f64).sqrt() as i64;
                while w * w > rem {
                    w -= 1;
                }
                while (w + 1) * (w + 1) <= rem {
                    w += 1;
                }
                w as usize
            }
        }
    }

    pub fn offsets(&self) -> Vec<(isize, isize)> {
        let r = self.radius as isize;
        let mut out = Vec::new();
        for dy in -r..=r {
            let w = self.half_width(dy) as isize;
            for dx in -w..=w {
                out.push((dx, dy));
            }
        }
        out
    }
}
