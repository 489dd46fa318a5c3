//! Shepp-Logan test images and image file formats.

mod io;

pub use io::{load_image, load_pgm, save_image, save_pgm, ImageFormat, PgmEncoding};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::image::Image;

/// One ellipse of the phantom table, in coordinates normalised to `[-1, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct Ellipse {
    pub intensity: f64,
    pub semi_x: f64,
    pub semi_y: f64,
    pub center_x: f64,
    pub center_y: f64,
    pub phi_deg: f64,
}

impl Ellipse {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.phi_deg.to_radians().sin_cos();
        let dx = x - self.center_x;
        let dy = y - self.center_y;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.semi_x).powi(2) + (v / self.semi_y).powi(2) <= 1.0
    }
}

const fn ellipse(intensity: f64, semi_x: f64, semi_y: f64, cx: f64, cy: f64, phi: f64) -> Ellipse {
    Ellipse { intensity, semi_x, semi_y, center_x: cx, center_y: cy, phi_deg: phi }
}

/// The original ten-ellipse Shepp-Logan head table.
pub const SHEPP_LOGAN: [Ellipse; 10] = [
    ellipse(2.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0),
    ellipse(-0.98, 0.6624, 0.8740, 0.00, -0.0184, 0.0),
    ellipse(-0.02, 0.1100, 0.3100, 0.22, 0.0000, -18.0),
    ellipse(-0.02, 0.1600, 0.4100, -0.22, 0.0000, 18.0),
    ellipse(0.01, 0.2100, 0.2500, 0.00, 0.3500, 0.0),
    ellipse(0.01, 0.0460, 0.0460, 0.00, 0.1000, 0.0),
    ellipse(0.01, 0.0460, 0.0460, 0.00, -0.1000, 0.0),
    ellipse(0.01, 0.0460, 0.0230, -0.08, -0.6050, 0.0),
    ellipse(0.01, 0.0230, 0.0230, 0.00, -0.6060, 0.0),
    ellipse(0.01, 0.0230, 0.0460, 0.06, -0.6050, 0.0),
];

/// Summed intensities of the table's tissue classes, ascending. Integer mode
/// maps a pixel to the rank of the largest class not above its sum.
pub const SUMMED_LEVELS: [f64; 6] = [0.0, 1.0, 1.02, 1.03, 1.04, 2.0];

/// The only other sum the table produces: the upper ellipse overlapping the
/// right ventricle. It ranks with the ventricles.
pub const OVERLAP_LEVEL: f64 = 1.01;

/// Binary mode keeps every class from brain matter up, so the two ventricles
/// become holes inside the skull.
const BINARY_MIN_RANK: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "k")]
pub enum PhantomMode {
    Binary,
    IntegerLevels(usize),
}

/// Summed ellipse intensity at a point in normalised coordinates.
pub fn summed_intensity(x: f64, y: f64) -> f64 {
    SHEPP_LOGAN
        .iter()
        .filter(|e| e.contains(x, y))
        .map(|e| e.intensity)
        .sum()
}

fn level_rank(value: f64) -> usize {
    SUMMED_LEVELS
        .iter()
        .rposition(|&l| l <= value + 1e-9)
        .unwrap_or(0)
}

/// Samples the phantom at pixel centres and quantises it.
pub fn generate_shepp_logan(size: usize, mode: PhantomMode) -> Result<Image> {
    if size < 4 {
        return Err(invalid(format!("phantom size {size} must be at least 4")));
    }
    let (levels, map): (Vec<f64>, Box<dyn Fn(f64) -> f64>) = match mode {
        PhantomMode::Binary => (
            vec![0.0, 1.0],
            Box::new(|s| if level_rank(s) >= BINARY_MIN_RANK { 1.0 } else { 0.0 }),
        ),
        PhantomMode::IntegerLevels(k) => {
            if k < 2 {
                return Err(invalid(format!("integer phantom needs at least 2 levels, got {k}")));
            }
            (
                (0..k).map(|l| l as f64).collect(),
                Box::new(move |s| level_rank(s).min(k - 1) as f64),
            )
        }
    };
    let half = size as f64 / 2.0;
    let values = (0..size)
        .flat_map(|i| (0..size).map(move |j| (i, j)))
        .map(|(i, j)| {
            let x = (j as f64 - half + 0.5) / half;
            let y = (half - i as f64 - 0.5) / half;
            map(summed_intensity(x, y))
        })
        .collect();
    Image::new(size, size, values)?.with_levels(levels)
}
