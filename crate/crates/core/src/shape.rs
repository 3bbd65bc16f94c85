//! Landmark shapes, face boxes and dataset samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::GrayImage;

/// An ordered set of `L` landmarks stored as `[x1, y1, ..., xL, yL]` in pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Shape {
    points: Vec<f64>,
}

impl Shape {
    pub const MIN_LANDMARKS: usize = 3;

    pub fn new(points: Vec<f64>) -> Result<Self> {
        if !points.len().is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "shape vector has odd length {}",
                points.len()
            )));
        }
        if points.len() < 2 * Self::MIN_LANDMARKS {
            return Err(Error::InvalidInput(format!(
                "shape needs at least {} landmarks, got {}",
                Self::MIN_LANDMARKS,
                points.len() / 2
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("shape coordinates"));
        }
        Ok(Shape { points })
    }

    pub fn from_points(points: &[(f64, f64)]) -> Result<Self> {
        Shape::new(points.iter().flat_map(|&(x, y)| [x, y]).collect())
    }

    pub fn num_landmarks(&self) -> usize {
        self.points.len() / 2
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.points
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.points
    }

    pub fn point(&self, i: usize) -> (f64, f64) {
        (self.points[2 * i], self.points[2 * i + 1])
    }

    pub fn iter_points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.chunks_exact(2).map(|p| (p[0], p[1]))
    }

    /// Adds a shape update of matching length.
    pub fn add_delta(&self, delta: &[f64]) -> Result<Shape> {
        if delta.len() != self.points.len() {
            return Err(Error::DimensionMismatch {
                context: "shape update",
                expected: self.points.len(),
                actual: delta.len(),
            });
        }
        Shape::new(self.points.iter().zip(delta).map(|(p, d)| p + d).collect())
    }

    /// `self - other`, coordinate-wise.
    pub fn difference(&self, other: &Shape) -> Vec<f64> {
        self.points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| a - b)
            .collect()
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Shape {
        let points = self
            .points
            .chunks_exact(2)
            .flat_map(|p| [p[0] + dx, p[1] + dy])
            .collect();
        Shape { points }
    }

    /// Tight bounds `(min_x, min_y, max_x, max_y)` without validity checks.
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (x, y) in self.iter_points() {
            b.0 = b.0.min(x);
            b.1 = b.1.min(y);
            b.2 = b.2.max(x);
            b.3 = b.3.max(y);
        }
        b
    }
}

impl TryFrom<Vec<f64>> for Shape {
    type Error = Error;

    fn try_from(points: Vec<f64>) -> Result<Self> {
        Shape::new(points)
    }
}

impl From<Shape> for Vec<f64> {
    fn from(shape: Shape) -> Self {
        shape.points
    }
}

/// Axis-aligned face box given by its upper-left and lower-right corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BoundingBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let finite = [x1, y1, x2, y2].iter().all(|v| v.is_finite());
        if !finite || x2 <= x1 || y2 <= y1 {
            return Err(Error::InvalidBox { x1, y1, x2, y2 });
        }
        Ok(BoundingBox { x1, y1, x2, y2 })
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))
    }

    pub fn corners(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn intersection_over_union(&self, other: &BoundingBox) -> f64 {
        let iw = (self.x2.min(other.x2) - self.x1.max(other.x1)).max(0.0);
        let ih = (self.y2.min(other.y2) - self.y1.max(other.y1)).max(0.0);
        let inter = iw * ih;
        inter / (self.area() + other.area() - inter)
    }

    /// Corner-wise difference `self - other`, the box regression target.
    pub fn delta_from(&self, other: &BoundingBox) -> [f64; 4] {
        [
            self.x1 - other.x1,
            self.y1 - other.y1,
            self.x2 - other.x2,
            self.y2 - other.y2,
        ]
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = Error;

    fn try_from(c: [f64; 4]) -> Result<Self> {
        BoundingBox::new(c[0], c[1], c[2], c[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        b.corners()
    }
}

/// One dataset entry: image, face box, and the annotation when known.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: GrayImage,
    pub bbox: BoundingBox,
    pub gt_shape: Option<Shape>,
}

impl Sample {
    pub fn new(image: GrayImage, bbox: BoundingBox, gt_shape: Option<Shape>) -> Self {
        Sample {
            image,
            bbox,
            gt_shape,
        }
    }

    pub fn require_gt(&self) -> Result<&Shape> {
        self.gt_shape
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("sample has no ground-truth shape".into()))
    }
}

/// Minimum enclosing rectangle of the landmarks.
pub fn shape_to_bbox(shape: &Shape) -> Result<BoundingBox> {
    let (x1, y1, x2, y2) = shape.extent();
    BoundingBox::new(x1, y1, x2, y2).map_err(|_| {
        Error::DegenerateShape(format!(
            "landmarks span zero width or height ({}x{})",
            x2 - x1,
            y2 - y1
        ))
    })
}

/// Scales (independently in x and y) and translates `mean_shape` so that its
/// tight bounds coincide with `bbox`.
pub fn place_mean_shape(mean_shape: &Shape, bbox: &BoundingBox) -> Result<Shape> {
    let src = shape_to_bbox(mean_shape)?;
    let sx = bbox.width() / src.width();
    let sy = bbox.height() / src.height();
    let points = mean_shape
        .iter_points()
        .flat_map(|(x, y)| [bbox.x1 + (x - src.x1) * sx, bbox.y1 + (y - src.y1) * sy])
        .collect();
    Shape::new(points)
}

pub fn apply_bbox_delta(bbox: &BoundingBox, delta: &[f64]) -> Result<BoundingBox> {
    if delta.len() != 4 {
        return Err(Error::DimensionMismatch {
            context: "bounding box delta",
            expected: 4,
            actual: delta.len(),
        });
    }
    BoundingBox::new(
        bbox.x1 + delta[0],
        bbox.y1 + delta[1],
        bbox.x2 + delta[2],
        bbox.y2 + delta[3],
    )
    .map_err(|e| Error::RefinerDiverged(e.to_string()))
}
