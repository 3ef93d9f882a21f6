//! Region-wise detection metrics against ground-truth colony marks.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AccError, Result};
use crate::imaging::BinaryMask;
use crate::morphology::{connected_components, LabelMap};

/// One ground-truth point per true colony, in pixel coordinates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GtMarks {
    pub points: Vec<(f64, f64)>,
}

impl GtMarks {
    pub fn new(points: Vec<(f64, f64)>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Centroids of the 8-connected components of a ground-truth mask.
    pub fn from_mask(mask: &BinaryMask) -> Self {
        let labels = connected_components(mask);
        let w = mask.width();
        let points = labels
            .regions()
            .iter()
            .map(|r| {
                let n = r.len() as f64;
                let sx: f64 = r.iter().map(|&i| (i % w) as f64).sum();
                let sy: f64 = r.iter().map(|&i| (i / w) as f64).sum();
                (sx / n, sy / n)
            })
            .collect();
        Self { points }
    }
}

#[derive(Debug, Deserialize)]
struct MarkRow {
    image: String,
    x: f64,
    y: f64,
}

/// Reads a marks file with header `image,x,y`; returns the marks per image id.
pub fn load_marks_csv(path: impl AsRef<Path>) -> Result<BTreeMap<String, GtMarks>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| AccError::csv(path, e))?;
    let mut out: BTreeMap<String, GtMarks> = BTreeMap::new();
    for row in rdr.deserialize::<MarkRow>() {
        let row = row.map_err(|e| AccError::csv(path, e))?;
        out.entry(row.image).or_default().points.push((row.x, row.y));
    }
    Ok(out)
}

pub fn write_marks_csv(path: impl AsRef<Path>, marks: &BTreeMap<String, GtMarks>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| AccError::csv(path, e))?;
    w.write_record(["image", "x", "y"]).map_err(|e| AccError::csv(path, e))?;
    for (image, m) in marks {
        for &(x, y) in &m.points {
            w.write_record([image.clone(), format!("{x:.6}"), format!("{y:.6}")])
                .map_err(|e| AccError::csv(path, e))?;
        }
    }
    w.flush().map_err(|e| AccError::io(path, e))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// TP: regions holding at least one mark. FP: regions without marks.
/// FN: marks not accounted for by a TP region, i.e. marks outside every
/// region (watershed lines included) plus extra marks in merged regions.
pub fn match_gt_marks(labels: &LabelMap, marks: &GtMarks) -> Result<ConfusionCounts> {
    let (w, h) = (labels.width(), labels.height());
    let mut hit = vec![false; labels.count() as usize + 1];
    for &(x, y) in &marks.points {
        let (px, py) = (x.round(), y.round());
        if !(px >= 0.0 && py >= 0.0 && (px as usize) < w && (py as usize) < h) {
            return Err(AccError::Input(format!(
                "mark ({x}, {y}) lies outside the {w}x{h} image"
            )));
        }
        hit[labels.get(px as usize, py as usize) as usize] = true;
    }
    let tp = hit[1..].iter().filter(|&&b| b).count();
    let c = ConfusionCounts {
        tp,
        fp: labels.count() as usize - tp,
        fn_: marks.len() - tp,
    };
    debug_assert_eq!(c.tp + c.fp, labels.count() as usize);
    debug_assert_eq!(c.tp + c.fn_, marks.len());
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when precision or recall is undefined or zero and F1 was forced to 0.
    pub degenerate: bool,
}

pub fn prf1(c: &ConfusionCounts) -> Scores {
    let pred = c.tp + c.fp;
    let gt = c.tp + c.fn_;
    if pred == 0 || gt == 0 || c.tp == 0 {
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        return Scores {
            precision: ratio(c.tp, pred),
            recall: ratio(c.tp, gt),
            f1: 0.0,
            degenerate: true,
        };
    }
    let precision = c.tp as f64 / pred as f64;
    let recall = c.tp as f64 / gt as f64;
    Scores {
        precision,
        recall,
        f1: f1_from(precision, recall),
        degenerate: false,
    }
}

/// Harmonic mean of precision and recall (0 if either is 0).
pub fn f1_from(precision: f64, recall: f64) -> f64 {
    if precision <= 0.0 || recall <= 0.0 {
        return 0.0;
    }
    2.0 / (1.0 / precision + 1.0 / recall)
}

/// Root mean square of the relative count errors `(pred - gt) / gt`.
pub fn count_rmse(pairs: &[(usize, usize)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(AccError::Input("no count pairs".into()));
    }
    let mut acc = 0.0;
    for &(pred, gt) in pairs {
        if gt == 0 {
            return Err(AccError::Input("ground-truth count of zero".into()));
        }
        let e = (pred as f64 - gt as f64) / gt as f64;
        acc += e * e;
    }
    Ok((acc / pairs.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageMetrics {
    pub image: String,
    pub counts: ConfusionCounts,
    pub scores: Scores,
    pub pred_count: usize,
    pub gt_count: usize,
}

pub fn evaluate(image: &str, labels: &LabelMap, marks: &GtMarks) -> Result<ImageMetrics> {
    let counts = match_gt_marks(labels, marks)?;
    Ok(ImageMetrics {
        image: image.to_string(),
        counts,
        scores: prf1(&counts),
        pred_count: labels.count() as usize,
        gt_count: marks.len(),
    })
}

pub const METRICS_HEADER: [&str; 9] = [
    "image", "tp", "fp", "fn", "precision", "recall", "f1", "pred_count", "gt_count",
];

pub fn write_metrics_csv(path: impl AsRef<Path>, rows: &[ImageMetrics]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| AccError::csv(path, e))?;
    w.write_record(METRICS_HEADER).map_err(|e| AccError::csv(path, e))?;
    for m in rows {
        w.write_record([
            m.image.clone(),
            m.counts.tp.to_string(),
            m.counts.fp.to_string(),
            m.counts.fn_.to_string(),
            format!("{:.6}", m.scores.precision),
            format!("{:.6}", m.scores.recall),
            format!("{:.6}", m.scores.f1),
            m.pred_count.to_string(),
            m.gt_count.to_string(),
        ])
        .map_err(|e| AccError::csv(path, e))?;
    }
    w.flush().map_err(|e| AccError::io(path, e))
}
