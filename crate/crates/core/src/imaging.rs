//! Raster containers, image I/O and the few pixel-wise filters shared by the
//! rest of the pipeline.
//!
//! All rasters are stored row-major (`index = y * width + x`) and all
//! intensities are `f64`. Images are converted exactly once at load time.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, Luma, Rgb, RgbImage as Rgb8Image};

use crate::error::{AccError, Result};

/// Default half-width of a sampled Gaussian kernel, in standard deviations.
pub const DEFAULT_GAUSSIAN_EXTENT: f64 = 2.0;

/// BT.601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.2989, 0.5870, 0.1140];

/// A dense row-major 2-D raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// Colour image with channels in `[0, 1]`.
pub type RgbImage = Raster<[f64; 3]>;
/// Scalar intensity plane.
pub type GrayPlane = Raster<f64>;
/// Foreground mask.
pub type BinaryMask = Raster<bool>;

impl<T: Clone> Raster<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Raster<T> {
    /// Wraps `data` as a `width x height` raster.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(AccError::Parameter(format!(
                "raster dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(AccError::Parameter(format!(
                "raster data has {} samples, expected {}",
                data.len(),
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut T {
        &mut self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn same_shape<U>(&self, other: &Raster<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Raster<U> {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Copies the rectangle `[x0, x0+w) x [y0, y0+h)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Raster<T>
    where
        T: Clone,
    {
        assert!(x0 + w <= self.width && y0 + h <= self.height);
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            let row = y * self.width;
            data.extend_from_slice(&self.data[row + x0..row + x0 + w]);
        }
        Raster {
            width: w,
            height: h,
            data,
        }
    }
}

impl<T: Copy> Raster<T> {
    /// Value at `(x + dx, y + dy)` with coordinates clamped to the raster.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> T {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.data[cy * self.width + cx]
    }
}

impl Raster<bool> {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&b| b)
    }
}

impl Raster<f64> {
    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Reads a PNG, TIFF or JPEG file into an RGB image in `[0, 1]`.
///
/// Single-channel images are replicated to three channels, 8-bit samples are
/// divided by 255 and 16-bit samples by 65535. An alpha channel on an RGB
/// image is discarded; gray+alpha is rejected.
pub fn load_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| AccError::io(path, e))?;
    let format = image::guess_format(&bytes)
        .or_else(|_| image::ImageFormat::from_path(path))
        .map_err(|e| format_error(path, e))?;
    let img = image::load_from_memory_with_format(&bytes, format).map_err(|e| format_error(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<[f64; 3]> = match img {
        DynamicImage::ImageLuma8(buf) => buf
            .pixels()
            .map(|p| {
                let v = p.0[0] as f64 / 255.0;
                [v, v, v]
            })
            .collect(),
        DynamicImage::ImageLuma16(buf) => buf
            .pixels()
            .map(|p| {
                let v = p.0[0] as f64 / 65535.0;
                [v, v, v]
            })
            .collect(),
        DynamicImage::ImageRgb8(buf) => buf
            .pixels()
            .map(|p| p.0.map(|s| s as f64 / 255.0))
            .collect(),
        DynamicImage::ImageRgba8(buf) => buf
            .pixels()
            .map(|p| [p.0[0], p.0[1], p.0[2]].map(|s| s as f64 / 255.0))
            .collect(),
        DynamicImage::ImageRgb16(buf) => buf
            .pixels()
            .map(|p| p.0.map(|s| s as f64 / 65535.0))
            .collect(),
        DynamicImage::ImageRgba16(buf) => buf
            .pixels()
            .map(|p| [p.0[0], p.0[1], p.0[2]].map(|s| s as f64 / 65535.0))
            .collect(),
        other => {
            return Err(AccError::Format {
                path: path.to_path_buf(),
                message: format!("unsupported pixel layout {:?}", other.color()),
            })
        }
    };
    RgbImage::from_vec(w, h, data)
}

fn format_error(path: &Path, e: image::ImageError) -> AccError {
    match e {
        image::ImageError::IoError(source) => AccError::io(path, source),
        other => AccError::Format {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

fn quantize8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes an RGB image as an 8-bit PNG.
pub fn save_rgb_png(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let buf: Rgb8Image = ImageBuffer::from_fn(img.width() as u32, img.height() as u32, |x, y| {
        Rgb(img.get(x as usize, y as usize).map(quantize8))
    });
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| format_error(path, e))
}

/// Writes a mask as an 8-bit PNG with values 0 and 255.
pub fn save_mask_png(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let buf: GrayImage = ImageBuffer::from_fn(mask.width() as u32, mask.height() as u32, |x, y| {
        Luma([if *mask.get(x as usize, y as usize) { 255 } else { 0 }])
    });
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| format_error(path, e))
}

/// Reads a binary mask; any pixel with gray level of at least one half is
/// foreground.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let rgb = load_rgb(path)?;
    Ok(to_gray(&rgb).map(|&v| v >= 0.5))
}

/// BT.601 luma conversion.
pub fn to_gray(img: &RgbImage) -> GrayPlane {
    img.map(|p| LUMA_WEIGHTS[0] * p[0] + LUMA_WEIGHTS[1] * p[1] + LUMA_WEIGHTS[2] * p[2])
}

/// Sampled, truncated and renormalized 1-D Gaussian kernel.
pub fn gaussian_kernel(sigma: f64, half_extent: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(AccError::Parameter(format!(
            "Gaussian sigma must be positive, got {sigma}"
        )));
    }
    if !(half_extent >= 1.0) {
        return Err(AccError::Parameter(format!(
            "Gaussian half extent must be at least one sigma, got {half_extent}"
        )));
    }
    let radius = (half_extent * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    Ok(k)
}

/// Separable Gaussian smoothing with replicate padding.
///
/// Each axis uses a kernel of half-width `ceil(half_extent * sigma)`.
pub fn gaussian_filter(
    plane: &GrayPlane,
    sigma_x: f64,
    sigma_y: f64,
    half_extent: f64,
) -> Result<GrayPlane> {
    let kx = gaussian_kernel(sigma_x, half_extent)?;
    let ky = gaussian_kernel(sigma_y, half_extent)?;
    let (w, h) = (plane.width(), plane.height());
    let rx = (kx.len() / 2) as isize;
    let ry = (ky.len() / 2) as isize;

    let mut tmp = GrayPlane::filled(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in kx.iter().enumerate() {
                acc += kv * plane.get_clamped(x as isize + i as isize - rx, y as isize);
            }
            tmp.set(x, y, acc);
        }
    }
    let mut out = GrayPlane::filled(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, kv) in ky.iter().enumerate() {
                acc += kv * tmp.get_clamped(x as isize, y as isize + j as isize - ry);
            }
            out.set(x, y, acc);
        }
    }
    Ok(out)
}

/// Linearly rescales a plane to `[0, 1]`; a constant plane becomes all zeros.
pub fn minmax_normalize(plane: &GrayPlane) -> GrayPlane {
    let (lo, hi) = plane.min_max();
    let span = hi - lo;
    if !(span > 0.0) {
        return plane.map(|_| 0.0);
    }
    plane.map(|&v| (v - lo) / span)
}
