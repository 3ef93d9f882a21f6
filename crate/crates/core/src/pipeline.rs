//! Per-image processing and batch execution.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;

use crate::blobs::{blobs_to_mask, build_pixel_features, kmeans_blob_mask, postprocess_blobs, suppress_background, Blob};
use crate::config::PipelineConfig;
use crate::error::{AccError, Result};
use crate::evaluation::{evaluate, load_marks_csv, write_metrics_csv, GtMarks, ImageMetrics};
use crate::imaging::{
    gaussian_filter, load_mask, load_rgb, minmax_normalize, to_gray, BinaryMask, GrayPlane, RgbImage,
};
use crate::morphology::connected_components;
use crate::pca::decompose;
use crate::reporting::{extract_colony_features, write_outputs, ColonyRecord};
use crate::splitting::{median_area, segment_image, ImageSegmentation};
use crate::texture::{clahe, select_pc_channel, ChannelSelection};

const IMAGE_EXTENSIONS: [&str; 6] = ["png", "jpg", "jpeg", "tif", "tiff", "bmp"];

/// Everything computed for one image.
#[derive(Debug, Clone)]
pub struct ImageResult {
    pub image: String,
    pub selection: ChannelSelection,
    pub blobs: Vec<Blob>,
    pub segmentation: ImageSegmentation,
    pub records: Vec<ColonyRecord>,
    pub metrics: Option<ImageMetrics>,
}

impl ImageResult {
    pub fn colony_count(&self) -> usize {
        self.records.len()
    }
}

/// Image id used for output names: the file stem.
pub fn image_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string_lossy().into_owned())
}

/// Enhanced grayscale used for splitting. The grayscale is oriented so that
/// colonies are brighter than the dish, multiplied by the blob mask, then
/// smoothed, adaptively equalized and min-max normalized. Without blob pixels
/// the plain image is enhanced.
pub fn enhance_gray(gray: &GrayPlane, blob_mask: &BinaryMask, cfg: &PipelineConfig) -> Result<GrayPlane> {
    let (mut fg, mut n_fg, mut bg, mut n_bg) = (0.0, 0usize, 0.0, 0usize);
    for (&v, &m) in gray.as_slice().iter().zip(blob_mask.as_slice()) {
        if m {
            fg += v;
            n_fg += 1;
        } else {
            bg += v;
            n_bg += 1;
        }
    }
    let masked = if n_fg == 0 {
        gray.clone()
    } else {
        let dark = n_bg > 0 && fg / (n_fg as f64) < bg / (n_bg as f64);
        let (lo, hi) = gray.min_max();
        GrayPlane::from_vec(
            gray.width(),
            gray.height(),
            gray.as_slice()
                .iter()
                .zip(blob_mask.as_slice())
                .map(|(&v, &m)| match (m, dark) {
                    (false, _) => 0.0,
                    (true, true) => hi - v + lo,
                    (true, false) => v,
                })
                .collect(),
        )?
    };
    let s = &cfg.smoothing;
    let smoothed = gaussian_filter(&masked, s.gray[0], s.gray[1], s.half_extent)?;
    let eq = clahe(&minmax_normalize(&smoothed), &cfg.enhance)?;
    Ok(minmax_normalize(&eq))
}

/// Runs the three phases (channel selection, blob extraction, splitting) on
/// an image already in memory.
pub fn process_image(image: &str, img: &RgbImage, cfg: &PipelineConfig, gt: Option<&GtMarks>) -> Result<ImageResult> {
    let pcs = decompose(img)?;
    let selection = select_pc_channel(&pcs.planes, &cfg.texture.clahe, cfg.texture.levels)?;
    let pc = &pcs.planes[selection.index];

    let s = &cfg.smoothing;
    let residual = suppress_background(
        pc,
        cfg.background.r_obrcbr,
        (s.pca[0], s.pca[1]),
        s.half_extent,
        cfg.background.min_contrast,
    )?;
    let mask = kmeans_blob_mask(&build_pixel_features(&residual));
    let blobs = postprocess_blobs(&mask, cfg.colony.a_min, cfg.blobs.dilation_radius);

    let gray = to_gray(img);
    let enhanced = enhance_gray(&gray, &blobs_to_mask(&blobs, img.width(), img.height()), cfg)?;
    let segmentation = segment_image(&blobs, &enhanced, &cfg.seg_params())?;
    let records = extract_colony_features(image, &segmentation.labels, img, &gray, pc);
    let metrics = gt.map(|m| evaluate(image, &segmentation.labels, m)).transpose()?;
    Ok(ImageResult {
        image: image.to_string(),
        selection,
        blobs,
        segmentation,
        records,
        metrics,
    })
}

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

/// Key-value rows of `<image>_summary.csv`.
pub fn summary_rows(res: &ImageResult, cfg: &PipelineConfig) -> Vec<(String, String)> {
    let hs: Vec<f64> = res.segmentation.blobs.iter().filter_map(|b| b.h_opt).collect();
    let mut rows: Vec<(String, String)> = vec![
        ("image".into(), res.image.clone()),
        ("colony_count".into(), res.colony_count().to_string()),
        ("blob_count".into(), res.blobs.len().to_string()),
        ("median_blob_area".into(), f6(median_area(&res.blobs))),
        ("pc_channel".into(), (res.selection.index + 1).to_string()),
    ];
    for (k, c) in res.selection.contrasts.iter().enumerate() {
        rows.push((format!("pc{}_contrast", k + 1), f6(*c)));
    }
    rows.push(("split_blobs".into(), hs.len().to_string()));
    if !hs.is_empty() {
        let mean = hs.iter().sum::<f64>() / hs.len() as f64;
        let min = hs.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = hs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        rows.push(("h_opt_mean".into(), f6(mean)));
        rows.push(("h_opt_min".into(), f6(min)));
        rows.push(("h_opt_max".into(), f6(max)));
    }
    if let Some(m) = &res.metrics {
        rows.push(("tp".into(), m.counts.tp.to_string()));
        rows.push(("fp".into(), m.counts.fp.to_string()));
        rows.push(("fn".into(), m.counts.fn_.to_string()));
        rows.push(("precision".into(), f6(m.scores.precision)));
        rows.push(("recall".into(), f6(m.scores.recall)));
        rows.push(("f1".into(), f6(m.scores.f1)));
    }
    let sp = cfg.seg_params();
    let params = [
        ("param_pca_sigma_x", cfg.smoothing.pca[0]),
        ("param_pca_sigma_y", cfg.smoothing.pca[1]),
        ("param_gray_sigma_x", cfg.smoothing.gray[0]),
        ("param_gray_sigma_y", cfg.smoothing.gray[1]),
        ("param_r_obrcbr", cfg.background.r_obrcbr as f64),
        ("param_a_min", sp.a_min),
        ("param_a_max", sp.a_max),
        ("param_h_min", sp.h_min),
        ("param_h_max", sp.h_max),
        ("param_h_step", sp.h_step),
        ("param_a_thresh_factor", sp.a_thresh_factor),
        ("param_circ_split", sp.circ_split),
    ];
    rows.extend(params.iter().map(|(k, v)| (k.to_string(), f6(*v))));
    rows
}

/// Loads, processes and writes the outputs of one image file.
pub fn run_image(cfg: &PipelineConfig, path: &Path, out_dir: &Path, gt: Option<&GtMarks>) -> Result<ImageResult> {
    let id = image_id(path);
    let img = load_rgb(path)?;
    let res = process_image(&id, &img, cfg, gt)?;
    write_outputs(out_dir, &id, &res.records, &res.segmentation.labels, &img, &summary_rows(&res, cfg))?;
    Ok(res)
}

/// Image files named by a directory (sorted) or a glob pattern.
pub fn collect_inputs(input: &str) -> Result<Vec<PathBuf>> {
    let p = Path::new(input);
    let mut files: Vec<PathBuf> = if p.is_dir() {
        let entries = fs::read_dir(p).map_err(|e| AccError::io(p, e))?;
        entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|f| {
                f.is_file()
                    && f.extension()
                        .map(|x| IMAGE_EXTENSIONS.contains(&x.to_string_lossy().to_lowercase().as_str()))
                        .unwrap_or(false)
            })
            .collect()
    } else {
        glob::glob(input)
            .map_err(|e| AccError::Config(format!("bad input pattern {input:?}: {e}")))?
            .filter_map(|g| g.ok())
            .filter(|f| f.is_file())
            .collect()
    };
    files.sort();
    Ok(files)
}

/// Ground-truth mask for `id` inside `dir`, trying a few common names.
pub fn find_gt_mask(dir: &Path, id: &str) -> Option<PathBuf> {
    ["", "_mask", "_gt_mask", "_gt"]
        .iter()
        .flat_map(|suffix| IMAGE_EXTENSIONS.iter().map(move |ext| dir.join(format!("{id}{suffix}.{ext}"))))
        .find(|p| p.is_file())
}

#[derive(Debug, Clone)]
pub struct ImageOutcome {
    pub path: PathBuf,
    pub image: String,
    pub result: std::result::Result<ImageResult, String>,
}

#[derive(Debug, Clone)]
pub struct BatchReport {
    pub outcomes: Vec<ImageOutcome>,
    pub metrics: Vec<ImageMetrics>,
    pub out_dir: PathBuf,
}

impl BatchReport {
    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| o.result.is_err()).count()
    }

    /// 0 when every image succeeded, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.failures() == 0 {
            0
        } else {
            1
        }
    }
}

fn gt_for(
    id: &str,
    marks: &Option<BTreeMap<String, GtMarks>>,
    masks: &Option<PathBuf>,
) -> Result<Option<GtMarks>> {
    if let Some(m) = marks {
        return Ok(Some(m.get(id).cloned().unwrap_or_default()));
    }
    if let Some(dir) = masks {
        let path = find_gt_mask(dir, id)
            .ok_or_else(|| AccError::Input(format!("no ground-truth mask for {id} in {}", dir.display())))?;
        return Ok(Some(GtMarks::from_mask(&load_mask(path)?)));
    }
    Ok(None)
}

/// Processes every input image on a pool of `cfg.threads` workers. A failing
/// image is recorded and does not stop the batch. Writes per-image outputs,
/// `batch_summary.csv` and, with ground truth, `metrics.csv`.
pub fn run_batch(cfg: &PipelineConfig) -> Result<BatchReport> {
    cfg.validate()?;
    let input = cfg
        .input
        .as_deref()
        .ok_or_else(|| AccError::Config("no input directory or pattern given".into()))?;
    let out_dir = cfg
        .output
        .clone()
        .ok_or_else(|| AccError::Config("no output directory given".into()))?;
    let inputs = collect_inputs(input)?;
    if inputs.is_empty() {
        return Err(AccError::Config(format!("no images found for {input:?}")));
    }
    fs::create_dir_all(&out_dir).map_err(|e| AccError::io(&out_dir, e))?;
    let marks = cfg.evaluation.gt_marks.as_ref().map(load_marks_csv).transpose()?;
    let masks = cfg.evaluation.gt_masks.clone();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.resolve())
        .build()
        .map_err(|e| AccError::Config(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<ImageOutcome> = pool.install(|| {
        inputs
            .par_iter()
            .map(|path| {
                let image = image_id(path);
                let result = gt_for(&image, &marks, &masks)
                    .and_then(|gt| run_image(cfg, path, &out_dir, gt.as_ref()))
                    .map_err(|e| e.to_string());
                match &result {
                    Ok(r) => info!("{image}: {} colonies", r.colony_count()),
                    Err(e) => warn!("{image}: failed: {e}"),
                }
                ImageOutcome {
                    path: path.clone(),
                    image,
                    result,
                }
            })
            .collect()
    });

    let summary = out_dir.join("batch_summary.csv");
    let mut w = csv::Writer::from_path(&summary).map_err(|e| AccError::csv(&summary, e))?;
    w.write_record(["image", "status", "colonies", "message"])
        .map_err(|e| AccError::csv(&summary, e))?;
    for o in &outcomes {
        let row = match &o.result {
            Ok(r) => [o.image.clone(), "ok".into(), r.colony_count().to_string(), String::new()],
            Err(e) => [o.image.clone(), "failed".into(), String::new(), e.clone()],
        };
        w.write_record(&row).map_err(|e| AccError::csv(&summary, e))?;
    }
    w.flush().map_err(|e| AccError::io(&summary, e))?;

    let metrics: Vec<ImageMetrics> = outcomes
        .iter()
        .filter_map(|o| o.result.as_ref().ok().and_then(|r| r.metrics.clone()))
        .collect();
    if marks.is_some() || masks.is_some() {
        write_metrics_csv(out_dir.join("metrics.csv"), &metrics)?;
    }
    Ok(BatchReport {
        outcomes,
        metrics,
        out_dir,
    })
}

/// Scores previously saved `<id>_mask.png` files against ground truth. Each
/// 8-connected component of a saved mask counts as one colony. Exactly one
/// of `gt_marks` and `gt_masks` must be given.
pub fn evaluate_saved_masks(
    mask_dir: &Path,
    gt_marks: Option<&Path>,
    gt_masks: Option<&Path>,
) -> Result<Vec<ImageMetrics>> {
    if gt_marks.is_some() == gt_masks.is_some() {
        return Err(AccError::Config(
            "give exactly one of ground-truth marks or ground-truth masks".into(),
        ));
    }
    let entries = fs::read_dir(mask_dir).map_err(|e| AccError::io(mask_dir, e))?;
    let mut files: Vec<(String, PathBuf)> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| {
            let name = p.file_name()?.to_str()?.to_string();
            let id = name.strip_suffix("_mask.png")?.to_string();
            Some((id, p))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(AccError::Config(format!(
            "no *_mask.png files in {}",
            mask_dir.display()
        )));
    }
    let marks = gt_marks.map(load_marks_csv).transpose()?;
    let masks = gt_masks.map(Path::to_path_buf);
    files
        .iter()
        .map(|(id, path)| {
            let labels = connected_components(&load_mask(path)?);
            let gt = gt_for(id, &marks, &masks)?.expect("ground truth source checked above");
            evaluate(id, &labels, &gt)
        })
        .collect()
}
