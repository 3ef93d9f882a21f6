//! Per-colony features and the files written for every processed image.

use std::fs;
use std::path::{Path, PathBuf};

use crate::blobs::Blob;
use crate::error::{AccError, Result};
use crate::imaging::{save_mask_png, save_rgb_png, BinaryMask, GrayPlane, RgbImage};
use crate::morphology::{fill_holes, LabelMap, NEIGHBORS_4};

#[derive(Debug, Clone, PartialEq)]
pub struct ColonyRecord {
    pub image: String,
    pub colony_id: u32,
    pub centroid: (f64, f64),
    pub area: usize,
    pub circularity: f64,
    /// `(mean, std)` of red, green, blue, gray and the selected PC plane.
    pub rgb: [(f64, f64); 3],
    pub gray: (f64, f64),
    pub pc: (f64, f64),
}

pub const COLONY_HEADER: [&str; 16] = [
    "image",
    "colony_id",
    "centroid_x",
    "centroid_y",
    "area_px",
    "circularity",
    "mean_r",
    "std_r",
    "mean_g",
    "std_g",
    "mean_b",
    "std_b",
    "mean_gray",
    "std_gray",
    "mean_pc",
    "std_pc",
];

/// Mean and population standard deviation.
fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// One record per positive label, in label order.
pub fn extract_colony_features(
    image: &str,
    labels: &LabelMap,
    img: &RgbImage,
    gray: &GrayPlane,
    pc: &GrayPlane,
) -> Vec<ColonyRecord> {
    let w = labels.width();
    labels
        .regions()
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let n = r.len() as f64;
            let cx = r.iter().map(|&i| (i % w) as f64).sum::<f64>() / n;
            let cy = r.iter().map(|&i| (i / w) as f64).sum::<f64>() / n;
            let px = img.as_slice();
            let rgb = [0, 1, 2].map(|c| mean_std(r.iter().map(move |&i| px[i][c])));
            let blob = Blob::from_pixels(0, r, w);
            ColonyRecord {
                image: image.to_string(),
                colony_id: k as u32 + 1,
                centroid: (cx, cy),
                area: r.len(),
                circularity: blob.circularity,
                rgb,
                gray: mean_std(r.iter().map(|&i| gray.as_slice()[i])),
                pc: mean_std(r.iter().map(|&i| pc.as_slice()[i])),
            }
        })
        .collect()
}

/// Pixels of a colony with at least one 4-neighbour outside it.
pub fn outline(labels: &LabelMap) -> BinaryMask {
    let (w, h) = (labels.width(), labels.height());
    BinaryMask::from_fn(w, h, |x, y| {
        let l = labels.get(x, y);
        l > 0
            && NEIGHBORS_4.iter().any(|&(dx, dy)| {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                nx < 0
                    || ny < 0
                    || nx as usize >= w
                    || ny as usize >= h
                    || labels.get(nx as usize, ny as usize) != l
            })
    })
}

pub fn overlay(img: &RgbImage, labels: &LabelMap) -> RgbImage {
    let edge = outline(labels);
    let mut out = img.clone();
    for (p, &e) in out.as_mut_slice().iter_mut().zip(edge.as_slice()) {
        if e {
            *p = [1.0, 0.0, 0.0];
        }
    }
    out
}

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

pub fn write_colonies_csv(path: &Path, records: &[ColonyRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| AccError::csv(path, e))?;
    w.write_record(COLONY_HEADER).map_err(|e| AccError::csv(path, e))?;
    for r in records {
        let mut row = vec![
            r.image.clone(),
            r.colony_id.to_string(),
            f6(r.centroid.0),
            f6(r.centroid.1),
            r.area.to_string(),
            f6(r.circularity),
        ];
        for (m, s) in r.rgb.iter().chain([&r.gray, &r.pc]) {
            row.push(f6(*m));
            row.push(f6(*s));
        }
        w.write_record(&row).map_err(|e| AccError::csv(path, e))?;
    }
    w.flush().map_err(|e| AccError::io(path, e))
}

/// `key,value` rows.
pub fn write_summary_csv(path: &Path, summary: &[(String, String)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| AccError::csv(path, e))?;
    w.write_record(["key", "value"]).map_err(|e| AccError::csv(path, e))?;
    for (k, v) in summary {
        w.write_record([k, v]).map_err(|e| AccError::csv(path, e))?;
    }
    w.flush().map_err(|e| AccError::io(path, e))
}

#[derive(Debug, Clone)]
pub struct OutputPaths {
    pub colonies: PathBuf,
    pub summary: PathBuf,
    pub mask: PathBuf,
    pub overlay: PathBuf,
}

impl OutputPaths {
    pub fn new(out_dir: &Path, image: &str) -> Self {
        Self {
            colonies: out_dir.join(format!("{image}_colonies.csv")),
            summary: out_dir.join(format!("{image}_summary.csv")),
            mask: out_dir.join(format!("{image}_mask.png")),
            overlay: out_dir.join(format!("{image}_overlay.png")),
        }
    }
}

/// Writes the colony table, the summary, the filled colony mask and the
/// red-outline overlay for one image.
pub fn write_outputs(
    out_dir: &Path,
    image: &str,
    records: &[ColonyRecord],
    labels: &LabelMap,
    img: &RgbImage,
    summary: &[(String, String)],
) -> Result<OutputPaths> {
    fs::create_dir_all(out_dir).map_err(|e| AccError::io(out_dir, e))?;
    let paths = OutputPaths::new(out_dir, image);
    write_colonies_csv(&paths.colonies, records)?;
    write_summary_csv(&paths.summary, summary)?;
    save_mask_png(&fill_holes(&labels.foreground()), &paths.mask)?;
    save_rgb_png(&overlay(img, labels), &paths.overlay)?;
    Ok(paths)
}
