//! Texture analysis used to pick the principal-component plane that depicts
//! the colonies: CLAHE enhancement, co-occurrence matrices and the Haralick
//! contrast statistic.

mod clahe;
mod glcm;

use rayon::prelude::*;

pub use clahe::{clahe, ClaheParams};
pub use glcm::{glcm, glcm_contrast, quantize, GlcmMatrix, Offset, SELECTION_OFFSETS};

use crate::error::{AccError, Result};
use crate::imaging::{minmax_normalize, GrayPlane};

/// Outcome of the channel selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSelection {
    /// 0-based index of the selected plane.
    pub index: usize,
    /// Offset-averaged contrast of each plane.
    pub contrasts: [f64; 3],
}

/// Mean contrast of a plane over `offsets`.
pub fn mean_contrast(plane: &GrayPlane, offsets: &[Offset], levels: usize) -> Result<f64> {
    let values = offsets
        .par_iter()
        .map(|&o| glcm(plane, o, levels).map(|g| glcm_contrast(&g)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Picks the plane with the lowest mean GLCM contrast after min-max
/// normalization and CLAHE. Ties go to the lower index.
pub fn select_pc_channel(
    planes: &[GrayPlane; 3],
    clahe_params: &ClaheParams,
    levels: usize,
) -> Result<ChannelSelection> {
    if !planes[0].same_shape(&planes[1]) || !planes[0].same_shape(&planes[2]) {
        return Err(AccError::Parameter("PC planes must have equal size".into()));
    }
    let contrasts = planes
        .par_iter()
        .map(|p| {
            let enhanced = clahe(&minmax_normalize(p), clahe_params)?;
            mean_contrast(&enhanced, &SELECTION_OFFSETS, levels)
        })
        .collect::<Result<Vec<f64>>>()?;
    let contrasts = [contrasts[0], contrasts[1], contrasts[2]];
    let mut index = 0;
    for k in 1..3 {
        if contrasts[k] < contrasts[index] {
            index = k;
        }
    }
    Ok(ChannelSelection { index, contrasts })
}
