//! Pose-varying shape synthesis along the yaw eigenvector.

use crate::augmentation::warp::{build_warp_mesh, piecewise_affine_warp};
use crate::error::{Error, Result};
use crate::shape::{shape_to_bbox, Sample, Shape};
use crate::subspace::{normalize_shape, ShapeSubspace};

/// Coefficients within this many standard deviations of the mean count as
/// near-frontal and may be pushed in either direction.
pub const NEAR_FRONTAL: f64 = 0.05;

const RANGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PoseShapeModel {
    subspace: ShapeSubspace,
    /// Zero-based index of the eigenvector that controls yaw.
    yaw_axis: usize,
    coeff_range: Vec<(f64, f64)>,
}

impl PoseShapeModel {
    /// Fits the subspace over a pose-rich shape set.
    pub fn fit(shapes: &[Shape], k: usize, yaw_axis: usize) -> Result<Self> {
        let normalized = shapes.iter().map(normalize_shape).collect::<Result<Vec<_>>>()?;
        let subspace = ShapeSubspace::fit(&normalized, k)?;
        let mut coeff_range = vec![(f64::INFINITY, f64::NEG_INFINITY); k];
        for x in &normalized {
            for (r, c) in coeff_range.iter_mut().zip(subspace.project(x)?) {
                r.0 = r.0.min(c);
                r.1 = r.1.max(c);
            }
        }
        Self::new(subspace, yaw_axis, coeff_range)
    }

    pub fn new(subspace: ShapeSubspace, yaw_axis: usize, coeff_range: Vec<(f64, f64)>) -> Result<Self> {
        if yaw_axis >= subspace.k() {
            return Err(Error::InvalidConfig(format!(
                "yaw axis {yaw_axis} out of range for a {}-dimensional subspace",
                subspace.k()
            )));
        }
        if coeff_range.len() != subspace.k() || coeff_range.iter().any(|r| !(r.0 <= r.1)) {
            return Err(Error::InvalidConfig("malformed coefficient range".into()));
        }
        Ok(PoseShapeModel {
            subspace,
            yaw_axis,
            coeff_range,
        })
    }

    pub fn subspace(&self) -> &ShapeSubspace {
        &self.subspace
    }

    pub fn yaw_axis(&self) -> usize {
        self.yaw_axis
    }

    pub fn coeff_range(&self) -> &[(f64, f64)] {
        &self.coeff_range
    }

    pub fn yaw_coefficient(&self, shape: &Shape) -> Result<f64> {
        Ok(self.subspace.shape_coefficients(shape)?[self.yaw_axis])
    }

    /// Yaw offset from the mean in standard deviations.
    pub fn yaw_deviation(&self, shape: &Shape) -> Result<f64> {
        let a = self.yaw_axis;
        Ok((self.yaw_coefficient(shape)? - self.subspace.coeff_mean()[a]) / self.subspace.coeff_std()[a])
    }

    /// Replaces the shape's yaw coefficient by `target` and maps the
    /// reconstruction back onto the shape's own bounds.
    pub fn synthesize(&self, shape: &Shape, target: f64) -> Result<Shape> {
        let a = self.yaw_axis;
        let normalized = normalize_shape(shape)?;
        let mut c = self.subspace.project(&normalized)?;
        let mean = self.subspace.coeff_mean()[a];
        let dev = self.yaw_deviation(shape)?;
        if !target.is_finite() {
            return Err(Error::NonFinite("target yaw coefficient"));
        }
        if dev.abs() > NEAR_FRONTAL && (target - mean) * (c[a] - mean) < 0.0 {
            return Err(Error::PoseRejected(format!(
                "target {target} reverses the rotation direction of coefficient {}",
                c[a]
            )));
        }
        let (lo, hi) = self.coeff_range[a];
        if target < lo - RANGE_TOL || target > hi + RANGE_TOL {
            return Err(Error::PoseRejected(format!(
                "target {target} outside observed range [{lo}, {hi}]"
            )));
        }
        c[a] = target;
        let z = self.subspace.reconstruct(&c)?;
        let b = shape_to_bbox(shape)?;
        let points = z
            .chunks_exact(2)
            .flat_map(|p| [b.x1 + p[0] * b.width(), b.y1 + p[1] * b.height()])
            .collect();
        Shape::new(points)
    }

    /// `n` targets evenly spaced from the current coefficient (exclusive) to
    /// the range limit on its side (inclusive).
    pub fn sweep_targets(&self, shape: &Shape, n: usize) -> Result<Vec<f64>> {
        let a = self.yaw_axis;
        let current = self.yaw_coefficient(shape)?;
        let (lo, hi) = self.coeff_range[a];
        let limit = if current >= self.subspace.coeff_mean()[a] { hi } else { lo };
        let current = current.clamp(lo, hi);
        Ok((1..=n)
            .map(|j| current + (limit - current) * j as f64 / n as f64)
            .collect())
    }

    /// Synthesizes the shape and warps the texture to match. The face box is
    /// kept since the synthesized shape shares the source bounds. Targets
    /// whose warp mesh folds over itself are rejected.
    pub fn synthesize_sample(&self, sample: &Sample, target: f64) -> Result<Sample> {
        let gt = sample.require_gt()?;
        let new_shape = self.synthesize(gt, target)?;
        let mesh = build_warp_mesh(gt, &new_shape, (sample.image.width(), sample.image.height()))?;
        if mesh.folds() {
            return Err(Error::PoseRejected(format!("warp mesh folds at target {target}")));
        }
        let image = piecewise_affine_warp(&sample.image, &mesh)?;
        Ok(Sample::new(image, sample.bbox, Some(new_shape)))
    }
}
