//! Image grid and rectangular pixel regions.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Row-major grid of non-negative pixel intensities.
///
/// Pixel `(i, j)` is the unit square centred at
/// `(j - width/2 + 0.5, height/2 - i - 0.5)`, so the grid is centred on the
/// rotation axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    height: usize,
    width: usize,
    values: Vec<f64>,
    levels: Option<Vec<f64>>,
}

impl Image {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(invalid(format!(
                "image {height}x{width} needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(invalid(format!("pixel value {v} is not a finite non-negative number")));
        }
        Ok(Self { height, width, values, levels: None })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, values: vec![0.0; height * width], levels: None }
    }

    /// Declares a discrete level set; every pixel must already be a member.
    pub fn with_levels(mut self, levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(invalid("level set is empty"));
        }
        if let Some(v) = self.values.iter().find(|v| !levels.contains(v)) {
            return Err(invalid(format!("pixel value {v} not in declared levels {levels:?}")));
        }
        self.levels = Some(levels);
        Ok(self)
    }

    pub fn without_levels(mut self) -> Self {
        self.levels = None;
        self
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn levels(&self) -> Option<&[f64]> {
        self.levels.as_deref()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Writes one pixel. Drops the level declaration if the new value is not
    /// one of the levels.
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        assert!(value.is_finite() && value >= 0.0, "pixel value {value} out of domain");
        if let Some(levels) = &self.levels {
            if !levels.contains(&value) {
                self.levels = None;
            }
        }
        self.values[row * self.width + col] = value;
    }

    pub fn is_square(&self) -> bool {
        self.height == self.width
    }

    /// Copy with every pixel inside `region` set to zero.
    pub fn masked(&self, region: &Region) -> Self {
        let mut out = self.clone();
        for (r, c) in region.pixels() {
            out.values[r * self.width + c] = 0.0;
        }
        if out.levels.as_ref().is_some_and(|l| !l.contains(&0.0)) {
            out.levels = None;
        }
        out
    }

    /// Copy keeping only the pixels inside `region`.
    pub fn region_only(&self, region: &Region) -> Self {
        let mut out = Image::zeros(self.height, self.width);
        for (r, c) in region.pixels() {
            out.values[r * self.width + c] = self.get(r, c);
        }
        out
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Axis-aligned block of pixels `[row0, row0+height) x [col0, col0+width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    pub row0: usize,
    pub col0: usize,
    pub height: usize,
    pub width: usize,
}

impl Region {
    pub fn new(row0: usize, col0: usize, height: usize, width: usize) -> Self {
        Self { row0, col0, height, width }
    }

    pub fn whole(image_height: usize, image_width: usize) -> Self {
        Self::new(0, 0, image_height, image_width)
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row >= self.row0
            && row < self.row0 + self.height
            && col >= self.col0
            && col < self.col0 + self.width
    }

    pub fn check_inside(&self, image_height: usize, image_width: usize) -> Result<()> {
        if self.is_empty()
            || self.row0 + self.height > image_height
            || self.col0 + self.width > image_width
        {
            return Err(invalid(format!(
                "region {self:?} does not lie inside a {image_height}x{image_width} image"
            )));
        }
        Ok(())
    }

    /// Absolute `(row, col)` coordinates in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.row0..self.row0 + self.height)
            .flat_map(move |r| (self.col0..self.col0 + self.width).map(move |c| (r, c)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length_and_negative_values() {
        assert!(Image::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Image::new(1, 2, vec![0.0, -1.0]).is_err());
        assert!(Image::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn levels_must_cover_values() {
        let img = Image::new(1, 3, vec![0.0, 1.0, 2.0]).unwrap();
        assert!(img.clone().with_levels(vec![0.0, 1.0]).is_err());
        assert!(img.with_levels(vec![0.0, 1.0, 2.0]).is_ok());
    }

    #[test]
    fn region_bounds() {
        assert!(Region::new(2, 2, 2, 2).check_inside(4, 4).is_ok());
        assert!(Region::new(3, 2, 2, 2).check_inside(4, 4).is_err());
        assert!(Region::new(0, 0, 0, 2).check_inside(4, 4).is_err());
        let px: Vec<_> = Region::new(1, 2, 2, 2).pixels().collect();
        assert_eq!(px, vec![(1, 2), (1, 3), (2, 2), (2, 3)]);
    }

    #[test]
    fn masking_and_region_only_partition_the_image() {
        let img = Image::new(3, 3, (0..9).map(f64::from).collect()).unwrap();
        let reg = Region::new(0, 1, 2, 2);
        let a = img.masked(&reg);
        let b = img.region_only(&reg);
        for i in 0..9 {
            assert_eq!(a.values()[i] + b.values()[i], img.values()[i]);
        }
    }
}
