use std::collections::VecDeque;

use super::{for_each_neighbor, squared_distance_transform, SeShape, StructuringElement, NEIGHBORS_4};
use crate::imaging::BinaryMask;

/// Sets every background region that is not 4-connected to the image border.
pub fn fill_holes(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let m = mask.as_slice();
    let mut outside = vec![false; m.len()];
    let mut queue = VecDeque::new();
    let seed = |i: usize, outside: &mut Vec<bool>, queue: &mut VecDeque<usize>| {
        if !m[i] && !outside[i] {
            outside[i] = true;
            queue.push_back(i);
        }
    };
    for x in 0..w {
        seed(x, &mut outside, &mut queue);
        seed((h - 1) * w + x, &mut outside, &mut queue);
    }
    for y in 0..h {
        seed(y * w, &mut outside, &mut queue);
        seed(y * w + w - 1, &mut outside, &mut queue);
    }
    while let Some(p) = queue.pop_front() {
        for_each_neighbor(p, w, h, &NEIGHBORS_4, |q| {
            if !m[q] && !outside[q] {
                outside[q] = true;
                queue.push_back(q);
            }
        });
    }
    BinaryMask::from_vec(w, h, outside.into_iter().map(|o| !o).collect()).expect("shape preserved")
}

/// Binary (Minkowski) dilation.
pub fn dilate(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    if se.radius == 0 {
        return mask.clone();
    }
    match se.shape {
        SeShape::Disk => {
            // a pixel is covered iff its distance to the nearest set pixel is <= r
            let r2 = (se.radius * se.radius) as f64;
            squared_distance_transform(&mask.map(|&b| !b)).map(|&d| d <= r2)
        }
        SeShape::Square => {
            let (w, h) = (mask.width(), mask.height());
            let r = se.radius as isize;
            let horiz = BinaryMask::from_fn(w, h, |x, y| {
                (-r..=r).any(|dx| {
                    let nx = x as isize + dx;
                    nx >= 0 && (nx as usize) < w && *mask.get(nx as usize, y)
                })
            });
            BinaryMask::from_fn(w, h, |x, y| {
                (-r..=r).any(|dy| {
                    let ny = y as isize + dy;
                    ny >= 0 && (ny as usize) < h && *horiz.get(x, ny as usize)
                })
            })
        }
    }
}
