//! Seeded synthetic culture dishes with exact ground truth.
//!
//! Colonies are stained ellipses whose darkness falls off from the centre.
//! The background carries a linear illumination gradient, optional flask
//! rim and additive Gaussian noise.

use std::f64::consts::PI;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{AccError, Result};
use crate::evaluation::{write_marks_csv, GtMarks};
use crate::imaging::{save_mask_png, save_rgb_png, BinaryMask, RgbImage};

const MAX_ATTEMPTS: usize = 2000;
/// Free pixels kept between colonies that must not touch.
const GAP: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub colonies: usize,
    /// Semi-major axis range in pixels.
    pub radius: (f64, f64),
    pub eccentricity: (f64, f64),
    /// Largest allowed intrusion of two colonies, as a fraction of the sum of
    /// their semi-major axes.
    pub overlap: f64,
    /// Share of colonies placed in contact with an earlier one.
    pub touching: f64,
    pub background: [f64; 3],
    pub stain: [f64; 3],
    /// Blend weight of the stain at a colony centre.
    pub darkness: f64,
    /// Relative loss of stain weight from the centre to the rim of a colony.
    pub edge_fade: f64,
    /// Peak-to-peak relative illumination change across the dish.
    pub gradient: f64,
    pub noise_sigma: f64,
    pub flask_ring: bool,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            width: 512,
            height: 512,
            colonies: 30,
            radius: (8.0, 14.0),
            eccentricity: (0.0, 0.6),
            overlap: 0.0,
            touching: 0.0,
            background: [0.93, 0.91, 0.88],
            stain: [0.38, 0.20, 0.45],
            darkness: 0.8,
            edge_fade: 0.35,
            gradient: 0.1,
            noise_sigma: 0.02,
            flask_ring: false,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(AccError::Parameter(format!("synthetic spec: {m}")));
        if self.width < 8 || self.height < 8 {
            return bad("image must be at least 8x8");
        }
        if !(self.radius.0 >= 1.0 && self.radius.0 <= self.radius.1) {
            return bad("radius range must satisfy 1 <= min <= max");
        }
        let (e0, e1) = self.eccentricity;
        if !(0.0 <= e0 && e0 <= e1 && e1 < 1.0) {
            return bad("eccentricity range must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.overlap) || !(0.0..=1.0).contains(&self.touching) {
            return bad("overlap must lie in [0, 1) and touching in [0, 1]");
        }
        if !(self.darkness > 0.0 && self.darkness <= 1.0) {
            return bad("darkness must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.edge_fade) {
            return bad("edge_fade must lie in [0, 1]");
        }
        if !(self.noise_sigma >= 0.0) || !(self.gradient >= 0.0) {
            return bad("noise and gradient must be non-negative");
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text).map_err(|e| AccError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
}

impl Ellipse {
    /// Normalised elliptic radius: < 1 inside, 1 on the boundary.
    pub fn rho(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let (s, c) = self.theta.sin_cos();
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        ((u / self.a).powi(2) + (v / self.b).powi(2)).sqrt()
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.rho(x, y) <= 1.0
    }
}

#[derive(Debug, Clone)]
pub struct SynthDish {
    pub image: RgbImage,
    pub colonies: Vec<Ellipse>,
    /// True colony centres.
    pub marks: GtMarks,
    /// Union of all colony supports.
    pub mask: BinaryMask,
}

impl SynthDish {
    /// Support of colony `k`.
    pub fn colony_mask(&self, k: usize) -> BinaryMask {
        let e = self.colonies[k];
        BinaryMask::from_fn(self.image.width(), self.image.height(), |x, y| {
            e.contains(x as f64, y as f64)
        })
    }
}

struct Dish {
    cx: f64,
    cy: f64,
    r: f64,
}

fn place(spec: &SynthSpec, rng: &mut ChaCha8Rng, dish: &Option<Dish>) -> Result<Vec<Ellipse>> {
    let (w, h) = (spec.width as f64, spec.height as f64);
    let mut placed: Vec<Ellipse> = Vec::with_capacity(spec.colonies);
    for k in 0..spec.colonies {
        let mut ok = None;
        for _ in 0..MAX_ATTEMPTS {
            let a = rng.random_range(spec.radius.0..=spec.radius.1);
            let ecc = rng.random_range(spec.eccentricity.0..=spec.eccentricity.1);
            let b = a * (1.0 - ecc * ecc).sqrt();
            let theta = rng.random_range(0.0..PI);
            let touch = !placed.is_empty() && rng.random::<f64>() < spec.touching;
            let (cx, cy) = if touch {
                let other = placed[rng.random_range(0..placed.len())];
                let reach = other.a + a;
                let d = rng.random_range((1.0 - spec.overlap) * reach..=reach);
                let phi = rng.random_range(0.0..2.0 * PI);
                (other.cx + d * phi.cos(), other.cy + d * phi.sin())
            } else {
                (rng.random_range(0.0..w), rng.random_range(0.0..h))
            };
            let inside = match dish {
                Some(d) => ((cx - d.cx).powi(2) + (cy - d.cy).powi(2)).sqrt() + a + GAP <= d.r,
                None => cx - a - GAP >= 0.0 && cy - a - GAP >= 0.0 && cx + a + GAP < w && cy + a + GAP < h,
            };
            if !inside {
                continue;
            }
            let fits = placed.iter().all(|o| {
                let d = ((cx - o.cx).powi(2) + (cy - o.cy).powi(2)).sqrt();
                let reach = o.a + a;
                if spec.overlap > 0.0 && touch {
                    d >= (1.0 - spec.overlap) * reach
                } else {
                    d >= reach + GAP
                }
            });
            if fits {
                ok = Some(Ellipse { cx, cy, a, b, theta });
                break;
            }
        }
        match ok {
            Some(e) => placed.push(e),
            None => {
                return Err(AccError::Synthesis(format!(
                    "could not place colony {} of {} after {MAX_ATTEMPTS} attempts",
                    k + 1,
                    spec.colonies
                )))
            }
        }
    }
    Ok(placed)
}

/// Renders a dish. Identical specs (seed included) give identical output.
pub fn generate(spec: &SynthSpec) -> Result<SynthDish> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h) = (spec.width, spec.height);
    let dish = spec.flask_ring.then(|| Dish {
        cx: w as f64 / 2.0,
        cy: h as f64 / 2.0,
        r: 0.44 * w.min(h) as f64,
    });
    let colonies = place(spec, &mut rng, &dish)?;

    let phi = rng.random_range(0.0..2.0 * PI);
    let (gx, gy) = (phi.cos(), phi.sin());
    let diag = ((w * w + h * h) as f64).sqrt();
    let noise = Normal::new(0.0, spec.noise_sigma.max(1e-300)).expect("finite sigma");

    let mut image = RgbImage::filled(w, h, [0.0; 3]);
    let mut mask = BinaryMask::filled(w, h, false);
    for y in 0..h {
        for x in 0..w {
            let (fx, fy) = (x as f64, y as f64);
            let t = ((fx - w as f64 / 2.0) * gx + (fy - h as f64 / 2.0) * gy) / diag;
            let light = 1.0 + spec.gradient * t;
            let mut px = spec.background.map(|c| c * light);
            if let Some(d) = &dish {
                let r = ((fx - d.cx).powi(2) + (fy - d.cy).powi(2)).sqrt();
                if (r - d.r - 4.0).abs() <= 2.0 {
                    px = px.map(|c| 0.55 * c);
                }
            }
            let mut alpha: f64 = 0.0;
            for e in &colonies {
                if (fx - e.cx).abs() > e.a + 1.0 || (fy - e.cy).abs() > e.a + 1.0 {
                    continue;
                }
                let rho = e.rho(fx, fy);
                if rho <= 1.0 {
                    alpha = alpha.max(spec.darkness * (1.0 - spec.edge_fade * rho * rho));
                    mask.set(x, y, true);
                }
            }
            for c in 0..3 {
                let v = (1.0 - alpha) * px[c] + alpha * spec.stain[c] * light;
                let n = if spec.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                px[c] = (v + n).clamp(0.0, 1.0);
            }
            image.set(x, y, px);
        }
    }
    let marks = GtMarks::new(colonies.iter().map(|e| (e.cx, e.cy)).collect());
    Ok(SynthDish {
        image,
        colonies,
        marks,
        mask,
    })
}

/// Writes `images/<name>.png`, `gt_masks/<name>.png` and one `marks.csv`
/// (`image,x,y`) covering all dishes.
pub fn write_dishes(dishes: &[(String, SynthDish)], out_dir: &Path) -> Result<()> {
    let images = out_dir.join("images");
    let masks = out_dir.join("gt_masks");
    for d in [&images, &masks] {
        fs::create_dir_all(d).map_err(|e| AccError::io(d, e))?;
    }
    let mut all: BTreeMap<String, GtMarks> = BTreeMap::new();
    for (name, dish) in dishes {
        save_rgb_png(&dish.image, images.join(format!("{name}.png")))?;
        save_mask_png(&dish.mask, masks.join(format!("{name}.png")))?;
        all.insert(name.clone(), dish.marks.clone());
    }
    write_marks_csv(out_dir.join("marks.csv"), &all)
}
