//! Feature maps consumed by the weak regressors.
//!
//! * [`dense_box_features`]: HOG over the face box resampled to a fixed square.
//! * [`sparse_shape_features`]: two-scale HOG on a square patch around every
//!   landmark.
//! * [`context_features`]: the dense description of the current shape's box
//!   followed by the sparse landmark features.

pub mod hog;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Border, GrayImage};
use crate::shape::{shape_to_bbox, BoundingBox, Shape};

pub use hog::{cell_histograms, hog, CellHistograms, HogConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub dense_face_size: usize,
    pub dense_hog: HogConfig,
    pub patch_size: usize,
    pub patch_hog: HogConfig,
    pub inner_patch_size: usize,
    pub inner_hog: HogConfig,
    /// Patch radius as a fraction of the larger side of the shape's bounds.
    pub radius_fraction: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            dense_face_size: 100,
            dense_hog: HogConfig::with_cell_size(10),
            patch_size: 30,
            patch_hog: HogConfig::with_cell_size(10),
            inner_patch_size: 15,
            inner_hog: HogConfig::with_cell_size(5),
            radius_fraction: 1.0 / 7.0,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius_fraction > 0.0 && self.radius_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "radius_fraction must lie in (0, 1), got {}",
                self.radius_fraction
            )));
        }
        if self.inner_patch_size >= self.patch_size {
            return Err(Error::InvalidConfig(format!(
                "inner patch ({}) must be smaller than the patch ({})",
                self.inner_patch_size, self.patch_size
            )));
        }
        self.dense_dim()?;
        self.patch_dim()?;
        self.inner_dim()?;
        Ok(())
    }

    pub fn dense_dim(&self) -> Result<usize> {
        self.dense_hog
            .descriptor_len(self.dense_face_size, self.dense_face_size)
    }

    pub fn patch_dim(&self) -> Result<usize> {
        self.patch_hog
            .descriptor_len(self.patch_size, self.patch_size)
    }

    pub fn inner_dim(&self) -> Result<usize> {
        self.inner_hog
            .descriptor_len(self.inner_patch_size, self.inner_patch_size)
    }

    pub fn sparse_dim(&self, n_landmarks: usize) -> Result<usize> {
        Ok(n_landmarks * (self.patch_dim()? + self.inner_dim()?))
    }

    /// Length of [`context_features`] for shapes with `n_landmarks` points.
    pub fn context_dim(&self, n_landmarks: usize) -> Result<usize> {
        Ok(self.dense_dim()? + self.sparse_dim(n_landmarks)?)
    }
}

fn intersects_image(image: &GrayImage, bbox: &BoundingBox) -> bool {
    let (w, h) = (image.width() as f64, image.height() as f64);
    bbox.x2 > -0.5 && bbox.x1 < w - 0.5 && bbox.y2 > -0.5 && bbox.y1 < h - 0.5
}

pub fn dense_box_features(
    image: &GrayImage,
    bbox: &BoundingBox,
    cfg: &FeatureConfig,
) -> Result<Vec<f64>> {
    if !intersects_image(image, bbox) {
        return Err(Error::InvalidInput(format!(
            "face box {:?} lies entirely outside the {}x{} image",
            bbox.corners(),
            image.width(),
            image.height()
        )));
    }
    let size = cfg.dense_face_size;
    let face = image.crop_resize(
        bbox.x1,
        bbox.y1,
        bbox.width(),
        bbox.height(),
        size,
        size,
        Border::Zero,
    );
    hog(&face, &cfg.dense_hog)
}

/// Side of the square landmark patch in pixels (always even, at least 2).
pub fn patch_side(shape: &Shape, cfg: &FeatureConfig) -> Result<usize> {
    let b = shape_to_bbox(shape)?;
    let radius = cfg.radius_fraction * b.width().max(b.height());
    Ok(((2.0 * radius.round()) as usize).max(2))
}

/// The resampled square patch centred on landmark `(x, y)`.
pub fn landmark_patch(image: &GrayImage, x: f64, y: f64, side: usize, out: usize) -> GrayImage {
    let half = (side / 2) as f64;
    let left = x.round() - half - 0.5;
    let top = y.round() - half - 0.5;
    image.crop_resize(left, top, side as f64, side as f64, out, out, Border::Zero)
}

pub fn sparse_shape_features(
    image: &GrayImage,
    shape: &Shape,
    cfg: &FeatureConfig,
) -> Result<Vec<f64>> {
    let side = patch_side(shape, cfg)?;
    let offset = ((cfg.patch_size - cfg.inner_patch_size) / 2) as isize;
    let mut out = Vec::with_capacity(cfg.sparse_dim(shape.num_landmarks())?);
    for (x, y) in shape.iter_points() {
        let patch = landmark_patch(image, x, y, side, cfg.patch_size);
        out.extend(hog(&patch, &cfg.patch_hog)?);
        let inner = patch.crop(offset, offset, cfg.inner_patch_size, cfg.inner_patch_size);
        out.extend(hog(&inner, &cfg.inner_hog)?);
    }
    Ok(out)
}

pub fn context_features(
    image: &GrayImage,
    shape: &Shape,
    cfg: &FeatureConfig,
) -> Result<Vec<f64>> {
    let bbox = shape_to_bbox(shape)?;
    let mut out = dense_box_features(image, &bbox, cfg)?;
    out.extend(sparse_shape_features(image, shape, cfg)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| {
            let (x, y) = (x as f64, y as f64);
            0.5 + 0.25 * (0.31 * x).sin() + 0.2 * (0.17 * y + 0.05 * x).cos()
        })
    }

    fn face_shape() -> Shape {
        Shape::from_points(&[(40.0, 50.0), (80.0, 48.0), (60.0, 75.0), (60.0, 100.0)]).unwrap()
    }

    #[test]
    fn default_dimensions() {
        let cfg = FeatureConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.dense_dim().unwrap(), 2916);
        assert_eq!(cfg.sparse_dim(19).unwrap(), 19 * 288);
        assert_eq!(cfg.context_dim(19).unwrap(), 2916 + 19 * 288);
    }

    #[test]
    fn config_validation() {
        let mut cfg = FeatureConfig::default();
        cfg.radius_fraction = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = FeatureConfig::default();
        cfg.inner_patch_size = 30;
        assert!(cfg.validate().is_err());
        let mut cfg = FeatureConfig::default();
        cfg.dense_face_size = 95;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn dense_length_and_zero_cases() {
        let cfg = FeatureConfig::default();
        let img = pattern(160, 140);
        let b = BoundingBox::new(20.0, 30.0, 110.0, 120.0).unwrap();
        assert_eq!(dense_box_features(&img, &b, &cfg).unwrap().len(), 2916);

        let uniform = GrayImage::filled(160, 140, 0.3);
        assert!(dense_box_features(&uniform, &b, &cfg)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));

        let outside = BoundingBox::new(500.0, 500.0, 600.0, 600.0).unwrap();
        assert!(dense_box_features(&img, &outside, &cfg).is_err());
    }

    #[test]
    fn dense_translation_within_uniform_region() {
        let cfg = FeatureConfig::default();
        let img = GrayImage::from_fn(200, 200, |x, y| {
            if (20..180).contains(&x) && (20..180).contains(&y) {
                0.6
            } else {
                0.1
            }
        });
        let a = BoundingBox::new(40.0, 40.0, 100.0, 100.0).unwrap();
        let b = BoundingBox::new(47.0, 52.0, 107.0, 112.0).unwrap();
        let fa = dense_box_features(&img, &a, &cfg).unwrap();
        let fb = dense_box_features(&img, &b, &cfg).unwrap();
        assert_eq!(fa, fb);
    }

    #[test]
    fn sparse_length_and_uniform_image() {
        let cfg = FeatureConfig::default();
        let s = face_shape();
        let f = sparse_shape_features(&pattern(150, 150), &s, &cfg).unwrap();
        assert_eq!(f.len(), cfg.sparse_dim(4).unwrap());
        let z = sparse_shape_features(&GrayImage::filled(150, 150, 0.8), &s, &cfg).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn patch_side_is_even() {
        let cfg = FeatureConfig::default();
        // extent 40x52 -> radius 52/7 = 7.43 -> side 14
        assert_eq!(patch_side(&face_shape(), &cfg).unwrap(), 14);
        let tiny = Shape::from_points(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]).unwrap();
        assert_eq!(patch_side(&tiny, &cfg).unwrap(), 2);
    }

    #[test]
    fn first_landmark_matches_standalone_patch_hog() {
        // Corner pattern: bright quadrant to the lower right of (61, 43).
        let img = GrayImage::from_fn(120, 120, |x, y| {
            if x >= 61 && y >= 43 {
                0.9
            } else {
                0.2
            }
        });
        let cfg = FeatureConfig::default();
        let s = Shape::from_points(&[(60.6, 43.2), (20.0, 100.0), (100.0, 90.0)]).unwrap();
        let f = sparse_shape_features(&img, &s, &cfg).unwrap();

        // Standalone oracle: integer crop around the rounded centre, then a
        // per-pixel bilinear resample written out by hand.
        let side = patch_side(&s, &cfg).unwrap(); // 80/7 -> 11.43 -> 22
        assert_eq!(side, 22);
        let crop = img.crop(61 - 11, 43 - 11, side, side);
        let scale = side as f64 / 30.0;
        let resized = GrayImage::from_fn(30, 30, |u, v| {
            let sx = (u as f64 + 0.5) * scale - 0.5;
            let sy = (v as f64 + 0.5) * scale - 0.5;
            // Borrow the outer image for samples that fall just outside the crop.
            let gx = sx + 50.0;
            let gy = sy + 32.0;
            let (x0, y0) = (gx.floor(), gy.floor());
            let (fx, fy) = (gx - x0, gy - y0);
            let p = |x: f64, y: f64| img.get(x as usize, y as usize);
            let top = p(x0, y0) * (1.0 - fx) + p(x0 + 1.0, y0) * fx;
            let bot = p(x0, y0 + 1.0) * (1.0 - fx) + p(x0 + 1.0, y0 + 1.0) * fx;
            top * (1.0 - fy) + bot * fy
        });
        assert_eq!(crop.get(0, 0), img.get(50, 32));
        let mut oracle = hog(&resized, &cfg.patch_hog).unwrap();
        oracle.extend(hog(&resized.crop(7, 7, 15, 15), &cfg.inner_hog).unwrap());
        assert_eq!(oracle.len(), 288);
        for (a, b) in f[..288].iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        assert!(oracle.iter().any(|&v| v > 0.0));
    }

    #[test]
    fn context_is_dense_then_sparse() {
        let cfg = FeatureConfig::default();
        let img = pattern(150, 150);
        let s = face_shape();
        let c = context_features(&img, &s, &cfg).unwrap();
        assert_eq!(c.len(), cfg.context_dim(4).unwrap());
        let dense = dense_box_features(&img, &shape_to_bbox(&s).unwrap(), &cfg).unwrap();
        assert_eq!(&c[..dense.len()], dense.as_slice());
        let sparse = sparse_shape_features(&img, &s, &cfg).unwrap();
        assert_eq!(&c[dense.len()..], sparse.as_slice());
        assert_eq!(c, context_features(&img, &s, &cfg).unwrap());
        let z = context_features(&GrayImage::filled(150, 150, 0.5), &s, &cfg).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }
}
