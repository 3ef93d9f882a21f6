use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::{connected_components, for_each_neighbor, impose_minima, LabelMap, NEIGHBORS_8};
use crate::error::{AccError, Result};
use crate::imaging::{BinaryMask, GrayPlane, Raster};

#[derive(Debug, Clone, Copy)]
struct Entry {
    level: f64,
    seq: u64,
    idx: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.level
            .total_cmp(&other.level)
            .then(self.seq.cmp(&other.seq))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    Unseen,
    Queued,
    Done,
}

/// Marker-controlled watershed by priority flooding.
///
/// Minima are imposed at the 8-connected marker components, so the result has
/// exactly one basin per component, numbered in raster order of the
/// component's first pixel. A pixel whose labelled neighbours disagree becomes
/// a watershed line (label 0), as does everything outside `domain`. Equal
/// flood levels are resolved by insertion order.
///
/// An empty marker set yields an all-zero map.
pub fn marker_watershed(
    topography: &GrayPlane,
    markers: &BinaryMask,
    domain: &BinaryMask,
) -> Result<LabelMap> {
    if !topography.same_shape(markers) || !topography.same_shape(domain) {
        return Err(AccError::Parameter(
            "topography, markers and domain must have identical dimensions".into(),
        ));
    }
    let (w, h) = (topography.width(), topography.height());
    if markers
        .as_slice()
        .iter()
        .zip(domain.as_slice())
        .any(|(&m, &d)| m && !d)
    {
        return Err(AccError::Precondition(
            "watershed markers must lie inside the domain".into(),
        ));
    }
    if !markers.any() {
        return Ok(LabelMap::empty(w, h));
    }

    let imposed = impose_minima(topography, markers, domain)?;
    let level = imposed.as_slice();
    let dom = domain.as_slice();
    let seeds = connected_components(markers);
    let mut labels: Vec<u32> = seeds.as_slice().to_vec();
    let mut state: Vec<State> = labels
        .iter()
        .map(|&l| if l > 0 { State::Done } else { State::Unseen })
        .collect();

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    for p in 0..labels.len() {
        if labels[p] == 0 {
            continue;
        }
        for_each_neighbor(p, w, h, &NEIGHBORS_8, |q| {
            if dom[q] && state[q] == State::Unseen {
                state[q] = State::Queued;
                heap.push(Reverse(Entry {
                    level: level[q],
                    seq,
                    idx: q,
                }));
                seq += 1;
            }
        });
    }

    while let Some(Reverse(Entry { level: lv, idx: p, .. })) = heap.pop() {
        let mut label = 0u32;
        let mut conflict = false;
        for_each_neighbor(p, w, h, &NEIGHBORS_8, |q| {
            let l = labels[q];
            if l > 0 {
                if label == 0 {
                    label = l;
                } else if l != label {
                    conflict = true;
                }
            }
        });
        state[p] = State::Done;
        if conflict || label == 0 {
            continue;
        }
        labels[p] = label;
        for_each_neighbor(p, w, h, &NEIGHBORS_8, |q| {
            if dom[q] && state[q] == State::Unseen {
                state[q] = State::Queued;
                heap.push(Reverse(Entry {
                    level: level[q].max(lv),
                    seq,
                    idx: q,
                }));
                seq += 1;
            }
        });
    }

    LabelMap::from_raster(Raster::from_vec(w, h, labels)?)
}
