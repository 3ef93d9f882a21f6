//! Principal-component decomposition of the three colour channels.
//!
//! Each pixel is an observation in R^3. The centred observations are projected
//! onto the eigenvectors of the channel covariance, giving three planes
//! ordered by explained variance.

use nalgebra::Matrix3;

use crate::error::{AccError, Result};
use crate::imaging::{GrayPlane, RgbImage};

/// Centred 3 x n observation matrix, stored column-wise (one `[r, g, b]`
/// per pixel in raster order).
#[derive(Debug, Clone)]
pub struct ObservationMatrix {
    width: usize,
    height: usize,
    mean: [f64; 3],
    centered: Vec<[f64; 3]>,
}

impl ObservationMatrix {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn mean(&self) -> [f64; 3] {
        self.mean
    }

    /// Mean-deviation columns.
    pub fn columns(&self) -> &[[f64; 3]] {
        &self.centered
    }

    pub fn len(&self) -> usize {
        self.centered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centered.is_empty()
    }

    /// Sample covariance `X X^T / (n - 1)` of the centred data.
    pub fn covariance(&self) -> [[f64; 3]; 3] {
        let mut c = [[0.0; 3]; 3];
        for col in &self.centered {
            for i in 0..3 {
                for j in i..3 {
                    c[i][j] += col[i] * col[j];
                }
            }
        }
        let denom = (self.centered.len().max(2) - 1) as f64;
        for i in 0..3 {
            for j in i..3 {
                c[i][j] /= denom;
                c[j][i] = c[i][j];
            }
        }
        c
    }
}

pub fn build_observation_matrix(img: &RgbImage) -> ObservationMatrix {
    let n = img.len() as f64;
    let mut sum = [0.0; 3];
    for p in img.as_slice() {
        for c in 0..3 {
            sum[c] += p[c];
        }
    }
    let mean = sum.map(|s| s / n);
    let centered = img
        .as_slice()
        .iter()
        .map(|p| [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]])
        .collect();
    ObservationMatrix {
        width: img.width(),
        height: img.height(),
        mean,
        centered,
    }
}

#[derive(Debug, Clone)]
pub struct PcDecomposition {
    pub mean: [f64; 3],
    /// `basis[k]` is the unit eigenvector of the k-th component.
    pub basis: [[f64; 3]; 3],
    /// Eigenvalues in descending order.
    pub eigenvalues: [f64; 3],
    pub planes: [GrayPlane; 3],
}

impl PcDecomposition {
    /// Orthogonal matrix with the eigenvectors as columns.
    pub fn basis_matrix(&self) -> [[f64; 3]; 3] {
        let mut p = [[0.0; 3]; 3];
        for (k, u) in self.basis.iter().enumerate() {
            for r in 0..3 {
                p[r][k] = u[r];
            }
        }
        p
    }
}

/// Eigen-decomposes the covariance (through its SVD, the matrix being
/// symmetric positive semi-definite) and projects every pixel.
///
/// Each eigenvector is oriented so that its largest-magnitude entry is
/// positive; equal eigenvalues keep the solver's order.
pub fn pca_transform(obs: &ObservationMatrix) -> Result<PcDecomposition> {
    if obs.len() < 2 {
        return Err(AccError::Precondition(
            "PCA needs at least two pixels".into(),
        ));
    }
    let c = obs.covariance();
    let (eigenvalues, basis) = symmetric_eigen(&c);

    let planes = [0, 1, 2].map(|k| {
        let u = basis[k];
        let data = obs
            .columns()
            .iter()
            .map(|x| u[0] * x[0] + u[1] * x[1] + u[2] * x[2])
            .collect();
        GrayPlane::from_vec(obs.width, obs.height, data).expect("shape preserved")
    });
    Ok(PcDecomposition {
        mean: obs.mean,
        basis,
        eigenvalues,
        planes,
    })
}

/// Convenience wrapper: observation matrix plus transform.
pub fn decompose(img: &RgbImage) -> Result<PcDecomposition> {
    pca_transform(&build_observation_matrix(img))
}

fn symmetric_eigen(c: &[[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let m = Matrix3::from_fn(|r, k| c[r][k]);
    let svd = m.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let s = svd.singular_values;

    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));

    let mut values = [0.0; 3];
    let mut vectors = [[0.0; 3]; 3];
    for (k, &src) in order.iter().enumerate() {
        values[k] = s[src];
        let mut v = [u[(0, src)], u[(1, src)], u[(2, src)]];
        let mut lead = 0;
        for i in 1..3 {
            if v[i].abs() > v[lead].abs() {
                lead = i;
            }
        }
        if v[lead] < 0.0 {
            v = v.map(|e| -e);
        }
        vectors[k] = v;
    }
    (values, vectors)
}
