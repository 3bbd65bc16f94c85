//! Training-set augmentation: mirroring, blur, box jitter and synthetic poses.

pub mod pose;
pub mod warp;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::GrayImage;
use crate::shape::{BoundingBox, Sample, Shape};

pub use pose::PoseShapeModel;
pub use warp::{build_warp_mesh, delaunay, piecewise_affine_warp, WarpMesh};

pub const DEFAULT_JITTER: f64 = 0.05;

/// Zero-based landmark permutation pairing each landmark with its mirror.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct MirrorMap(Vec<usize>);

impl MirrorMap {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        for (i, &j) in map.iter().enumerate() {
            if j >= n || map[j] != i {
                return Err(Error::InvalidInput(format!(
                    "mirror map is not an involutive permutation at index {i}"
                )));
            }
        }
        Ok(MirrorMap(map))
    }

    pub fn identity(n: usize) -> Self {
        MirrorMap((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl TryFrom<Vec<usize>> for MirrorMap {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        MirrorMap::new(v)
    }
}

impl From<MirrorMap> for Vec<usize> {
    fn from(m: MirrorMap) -> Self {
        m.0
    }
}

fn mirror_x(x: f64, width: usize) -> f64 {
    (width as f64 - 1.0) - x
}

pub fn flip_shape(shape: &Shape, map: &MirrorMap, width: usize) -> Result<Shape> {
    if map.len() != shape.num_landmarks() {
        return Err(Error::DimensionMismatch {
            context: "mirror map",
            expected: shape.num_landmarks(),
            actual: map.len(),
        });
    }
    let points = map
        .as_slice()
        .iter()
        .flat_map(|&j| {
            let (x, y) = shape.point(j);
            [mirror_x(x, width), y]
        })
        .collect();
    Shape::new(points)
}

pub fn flip_bbox(b: &BoundingBox, width: usize) -> Result<BoundingBox> {
    BoundingBox::new(mirror_x(b.x2, width), b.y1, mirror_x(b.x1, width), b.y2)
}

/// Mirrors image, box and landmarks about the vertical axis.
pub fn flip_sample(sample: &Sample, map: &MirrorMap) -> Result<Sample> {
    let w = sample.image.width();
    let gt_shape = sample
        .gt_shape
        .as_ref()
        .map(|s| flip_shape(s, map, w))
        .transpose()?;
    Ok(Sample::new(
        sample.image.flip_horizontal(),
        flip_bbox(&sample.bbox, w)?,
        gt_shape,
    ))
}

/// Normalized taps for offsets `-r..=r`, `r = ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!("blur sigma must be positive, got {sigma}")));
    }
    let r = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    Ok(k)
}

/// Reflect-101 border index (`-1 → 1`, `n → n-2`).
fn reflect(i: i64, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as i64 - 1);
    let m = i.rem_euclid(period);
    (if m < n as i64 { m } else { period - m }) as usize
}

pub fn gaussian_blur(image: &GrayImage, sigma: f64) -> Result<GrayImage> {
    let k = gaussian_kernel(sigma)?;
    let r = (k.len() / 2) as i64;
    let (w, h) = (image.width(), image.height());
    let horizontal = GrayImage::from_fn(w, h, |x, y| {
        k.iter()
            .enumerate()
            .map(|(t, kv)| kv * image.get(reflect(x as i64 + t as i64 - r, w), y))
            .sum()
    });
    Ok(GrayImage::from_fn(w, h, |x, y| {
        k.iter()
            .enumerate()
            .map(|(t, kv)| kv * horizontal.get(x, reflect(y as i64 + t as i64 - r, h)))
            .sum()
    }))
}

/// Jitters each corner by uniform noise in `±magnitude × side`.
pub fn perturb_bbox(b: &BoundingBox, seed: u64, magnitude: f64) -> Result<BoundingBox> {
    if !(0.0..0.5).contains(&magnitude) {
        return Err(Error::InvalidConfig(format!(
            "perturbation magnitude must be in [0, 0.5), got {magnitude}"
        )));
    }
    if magnitude == 0.0 {
        return Ok(*b);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (b.width(), b.height());
    let mut jitter = |side: f64| (rng.gen::<f64>() * 2.0 - 1.0) * magnitude * side;
    BoundingBox::new(b.x1 + jitter(w), b.y1 + jitter(h), b.x2 + jitter(w), b.y2 + jitter(h))
}

/// Mixes a base seed with a stream index (splitmix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentOptions {
    pub flip: bool,
    pub blur_sigma: Option<f64>,
    /// Synthetic poses per eligible sample.
    pub synth_poses: usize,
    /// Only samples whose yaw coefficient lies within this many standard
    /// deviations of the mean receive synthetic poses; `None` admits all.
    pub semi_frontal: Option<f64>,
    pub pose_k: usize,
    pub bbox_jitter: Option<f64>,
    pub seed: u64,
}

impl Default for AugmentOptions {
    fn default() -> Self {
        AugmentOptions {
            flip: false,
            blur_sigma: None,
            synth_poses: 0,
            semi_frontal: None,
            pose_k: 2,
            bbox_jitter: None,
            seed: 0,
        }
    }
}

impl AugmentOptions {
    pub fn is_noop(&self) -> bool {
        !self.flip && self.blur_sigma.is_none() && self.synth_poses == 0 && self.bbox_jitter.is_none()
    }
}

/// Originals, then synthetic poses, then mirrored and blurred copies of
/// everything before them; box jitter applies last to every sample.
pub fn augment_samples(
    samples: &[Sample],
    opts: &AugmentOptions,
    mirror: Option<&MirrorMap>,
) -> Result<Vec<Sample>> {
    use rayon::prelude::*;

    let mut out: Vec<Sample> = samples.to_vec();
    if opts.synth_poses > 0 {
        let shapes = samples
            .iter()
            .map(|s| s.require_gt().cloned())
            .collect::<Result<Vec<_>>>()?;
        let model = PoseShapeModel::fit(&shapes, opts.pose_k, 0)?;
        let synthesized: Vec<Vec<Sample>> = samples
            .par_iter()
            .map(|s| -> Result<Vec<Sample>> {
                let gt = s.require_gt()?;
                if let Some(limit) = opts.semi_frontal {
                    if model.yaw_deviation(gt)?.abs() > limit {
                        return Ok(Vec::new());
                    }
                }
                let mut v = Vec::with_capacity(opts.synth_poses);
                for target in model.sweep_targets(gt, opts.synth_poses)? {
                    match model.synthesize_sample(s, target) {
                        Ok(new) => v.push(new),
                        Err(e @ (Error::PoseRejected(_) | Error::DegenerateTriangulation(_))) => {
                            log::debug!("skipping synthetic pose: {e}")
                        }
                        Err(e) => return Err(e),
                    }
                }
                Ok(v)
            })
            .collect::<Result<_>>()?;
        out.extend(synthesized.into_iter().flatten());
    }
    if opts.flip {
        let map = mirror.ok_or_else(|| Error::InvalidConfig("flipping requires a mirror map".into()))?;
        let flipped = out
            .par_iter()
            .map(|s| flip_sample(s, map))
            .collect::<Result<Vec<_>>>()?;
        out.extend(flipped);
    }
    if let Some(sigma) = opts.blur_sigma {
        let blurred = out
            .par_iter()
            .map(|s| Ok(Sample::new(gaussian_blur(&s.image, sigma)?, s.bbox, s.gt_shape.clone())))
            .collect::<Result<Vec<_>>>()?;
        out.extend(blurred);
    }
    if let Some(mag) = opts.bbox_jitter {
        for (i, s) in out.iter_mut().enumerate() {
            s.bbox = perturb_bbox(&s.bbox, derive_seed(opts.seed, i as u64), mag)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Sample {
        let img = GrayImage::from_fn(40, 30, |x, y| ((x * 7 + y * 13) % 11) as f64 / 10.0);
        let shape = Shape::from_points(&[(10.0, 12.0), (29.0, 12.5), (19.5, 20.0)]).unwrap();
        Sample::new(img, BoundingBox::new(8.0, 9.0, 31.0, 24.0).unwrap(), Some(shape))
    }

    #[test]
    fn mirror_map_validation() {
        assert!(MirrorMap::new(vec![1, 0, 2]).is_ok());
        assert!(MirrorMap::new(vec![1, 2, 0]).is_err());
        assert!(MirrorMap::new(vec![0, 3]).is_err());
    }

    #[test]
    fn flip_swaps_pairs_and_reflects_axis_points() {
        let map = MirrorMap::new(vec![1, 0, 2]).unwrap();
        let f = flip_sample(&sample(), &map).unwrap();
        let s = f.gt_shape.as_ref().unwrap();
        assert_eq!(s.point(0), (39.0 - 29.0, 12.5));
        assert_eq!(s.point(1), (39.0 - 10.0, 12.0));
        assert_eq!(s.point(2), (39.0 - 19.5, 20.0));
        assert_eq!(f.bbox, BoundingBox::new(8.0, 9.0, 31.0, 24.0).unwrap());
        assert_eq!(f.image.get(0, 3), sample().image.get(39, 3));
    }

    #[test]
    fn flip_twice_is_identity() {
        let map = MirrorMap::new(vec![1, 0, 2]).unwrap();
        let s = sample();
        let back = flip_sample(&flip_sample(&s, &map).unwrap(), &map).unwrap();
        assert_eq!(back.image, s.image);
        assert_eq!(back.bbox, s.bbox);
        assert_eq!(back.gt_shape, s.gt_shape);
    }

    #[test]
    fn blur_preserves_constants_and_mass() {
        let c = GrayImage::filled(17, 9, 0.25);
        let b = gaussian_blur(&c, 1.0).unwrap();
        assert!(b.pixels().iter().all(|v| (v - 0.25).abs() < 1e-12));

        let blob = GrayImage::from_fn(31, 31, |x, y| {
            let d = (x as f64 - 15.0).powi(2) + (y as f64 - 15.0).powi(2);
            (-d / 8.0).exp()
        });
        let before: f64 = blob.pixels().iter().sum();
        let after: f64 = gaussian_blur(&blob, 1.0).unwrap().pixels().iter().sum();
        assert!(((after - before) / before).abs() < 1e-6);
    }

    #[test]
    fn impulse_response_matches_analytic_kernel() {
        let sigma = 1.3;
        let mut img = GrayImage::filled(21, 21, 0.0);
        img.set(10, 10, 1.0);
        let out = gaussian_blur(&img, sigma).unwrap();
        let r = (3.0 * sigma).ceil() as i64;
        let g = |i: i64| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp();
        let norm: f64 = (-r..=r).map(g).sum();
        for y in 0..21i64 {
            for x in 0..21i64 {
                let (dx, dy) = (x - 10, y - 10);
                let expect = if dx.abs() <= r && dy.abs() <= r {
                    g(dx) * g(dy) / (norm * norm)
                } else {
                    0.0
                };
                assert!((out.get(x as usize, y as usize) - expect).abs() < 1e-9);
            }
        }
        assert!(gaussian_blur(&img, 0.0).is_err());
    }

    #[test]
    fn reflect_padding_indices() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(-2, 5), 2);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(0, 1), 0);
    }

    #[test]
    fn perturbation_contracts() {
        let b = BoundingBox::new(10.0, 20.0, 60.0, 90.0).unwrap();
        assert_eq!(perturb_bbox(&b, 1, 0.0).unwrap(), b);
        assert_eq!(perturb_bbox(&b, 9, 0.1).unwrap(), perturb_bbox(&b, 9, 0.1).unwrap());
        assert_ne!(perturb_bbox(&b, 9, 0.1).unwrap(), perturb_bbox(&b, 10, 0.1).unwrap());
        for seed in 0..1000 {
            let p = perturb_bbox(&b, seed, 0.1).unwrap();
            assert!(p.intersection_over_union(&b) > 0.5);
        }
        assert!(perturb_bbox(&b, 0, 0.5).is_err());
        assert!(perturb_bbox(&b, 0, -0.1).is_err());
    }

    #[test]
    fn augmentation_counts() {
        let map = MirrorMap::new(vec![1, 0, 2]).unwrap();
        let opts = AugmentOptions {
            flip: true,
            blur_sigma: Some(1.0),
            ..Default::default()
        };
        let out = augment_samples(&[sample(), sample()], &opts, Some(&map)).unwrap();
        assert_eq!(out.len(), 8);
        let no_map = augment_samples(&[sample()], &opts, None);
        assert!(no_map.is_err());
    }

    proptest! {
        #[test]
        fn perturbed_boxes_stay_valid(seed in any::<u64>(), mag in 0.0f64..0.49) {
            let b = BoundingBox::new(-5.0, 3.0, 20.0, 40.0).unwrap();
            let p = perturb_bbox(&b, seed, mag).unwrap();
            prop_assert!(p.x2 > p.x1 && p.y2 > p.y1);
        }
    }
}
