use std::collections::VecDeque;

use super::{for_each_neighbor, NEIGHBORS_8};
use crate::error::{AccError, Result};
use crate::imaging::{BinaryMask, Raster};

/// Partition of an image into numbered regions; 0 is background or
/// watershed line, positive labels are `1..=count` without gaps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    labels: Raster<u32>,
    count: u32,
}

impl LabelMap {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            labels: Raster::filled(width, height, 0),
            count: 0,
        }
    }

    /// Wraps a raw label raster, checking that the labels are gap-free.
    pub fn from_raster(labels: Raster<u32>) -> Result<Self> {
        let count = labels.as_slice().iter().copied().max().unwrap_or(0);
        let mut seen = vec![false; count as usize + 1];
        for &l in labels.as_slice() {
            seen[l as usize] = true;
        }
        if seen.iter().skip(1).any(|s| !s) {
            return Err(AccError::Input("label set has gaps".into()));
        }
        Ok(Self { labels, count })
    }

    /// Renumbers positive labels `1..` in raster order of their first pixel,
    /// dropping labels that no longer occur.
    pub fn renumber(labels: Raster<u32>) -> Self {
        let max = labels.as_slice().iter().copied().max().unwrap_or(0) as usize;
        let mut map = vec![0u32; max + 1];
        let mut next = 0;
        for &l in labels.as_slice() {
            if l > 0 && map[l as usize] == 0 {
                next += 1;
                map[l as usize] = next;
            }
        }
        Self {
            labels: labels.map(|&l| map[l as usize]),
            count: next,
        }
    }

    pub fn width(&self) -> usize {
        self.labels.width()
    }

    pub fn height(&self) -> usize {
        self.labels.height()
    }

    /// Number of positive labels.
    pub fn count(&self) -> u32 {
        self.count
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        *self.labels.get(x, y)
    }

    pub fn raster(&self) -> &Raster<u32> {
        &self.labels
    }

    pub fn as_slice(&self) -> &[u32] {
        self.labels.as_slice()
    }

    pub fn into_raster(self) -> Raster<u32> {
        self.labels
    }

    /// Pixel area of each label; index 0 holds the unlabeled pixel count.
    pub fn areas(&self) -> Vec<usize> {
        let mut areas = vec![0; self.count as usize + 1];
        for &l in self.labels.as_slice() {
            areas[l as usize] += 1;
        }
        areas
    }

    /// Pixel indices of each positive label, in raster order.
    pub fn regions(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count as usize];
        for (i, &l) in self.labels.as_slice().iter().enumerate() {
            if l > 0 {
                out[l as usize - 1].push(i);
            }
        }
        out
    }

    pub fn foreground(&self) -> BinaryMask {
        self.labels.map(|&l| l > 0)
    }

    pub fn region_mask(&self, label: u32) -> BinaryMask {
        self.labels.map(|&l| l == label)
    }
}

/// 8-connected component labeling; labels follow the raster order of each
/// component's first pixel.
pub fn connected_components(mask: &BinaryMask) -> LabelMap {
    let (w, h) = (mask.width(), mask.height());
    let m = mask.as_slice();
    let mut labels = vec![0u32; m.len()];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..m.len() {
        if !m[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            for_each_neighbor(p, w, h, &NEIGHBORS_8, |q| {
                if m[q] && labels[q] == 0 {
                    labels[q] = next;
                    queue.push_back(q);
                }
            });
        }
    }
    LabelMap {
        labels: Raster::from_vec(w, h, labels).expect("shape preserved"),
        count: next,
    }
}
